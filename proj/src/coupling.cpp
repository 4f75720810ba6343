#include "coalsim/coupling.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>

#include "coalsim/parallel.hpp"

namespace coalsim {
namespace {

void validate_pair(std::int64_t k, const CountVector& v, const CountVector& vt) {
  if (k < 2) throw std::invalid_argument("coupling needs level k >= 2");
  if (v.empty() || std::ssize(v) > kMaxTrackedOrders)
    throw std::invalid_argument("tracked spectrum must cover 1 to 8 orders");
  if (vt.size() != v.size())
    throw std::invalid_argument("the two states must track the same orders");
  std::int64_t m = 0;
  for (const auto w : v) {
    if (w < 0) throw std::invalid_argument("negative count in the joint state");
    m += w;
  }
  if (m > k) throw std::invalid_argument("joint counts exceed the level");
  for (const auto w : vt)
    if (w < 0 || w > k)
      throw std::invalid_argument("external count outside [0, level]");
}

template <class I>
I from_big(const BigInt& x) {
  if constexpr (std::is_same_v<I, BigInt>)
    return x;
  else
    return x.template convert_to<I>();
}

// Jump components live in {-2..1}; two bits per order index the support.
std::uint32_t jump_key(const Jump& z, int s) {
  std::uint32_t key = 0;
  for (int i = 0; i < s; ++i)
    key |= static_cast<std::uint32_t>(static_cast<int>(z.d[i]) + 2) << (2 * i);
  return key;
}

// Per-component external jump support at level k for count w, in the fixed
// order 0, -1, -2 with zero-mass jumps dropped.
struct ExtSupport {
  std::array<std::int8_t, 3> delta{};
  std::array<std::int64_t, 3> num{};
  int size = 0;
};

ExtSupport ext_support(std::int64_t k, std::int64_t w) {
  const std::int64_t nums[3] = {pairs2(k - w), w * (k - w), pairs2(w)};
  ExtSupport sup;
  for (int t = 0; t < 3; ++t)
    if (nums[t] > 0) {
      sup.delta[sup.size] = static_cast<std::int8_t>(-t);
      sup.num[sup.size] = nums[t];
      ++sup.size;
    }
  return sup;
}

// Shared core over the exact integer type; int64 is used whenever C(k,2)^s
// fits comfortably, which covers all simulation-scale levels.
template <class I>
CouplingDecomposition build_decomposition(std::int64_t k, const CountVector& v,
                                          const CountVector& vt) {
  const int s = static_cast<int>(v.size());
  const std::int64_t ck = pairs2(k);
  const JumpLaw q_law = transition_law(k, v);

  I denom(1);
  for (int i = 0; i < s; ++i) denom = denom * I(ck);
  I scale(1);
  for (int i = 1; i < s; ++i) scale = scale * I(ck);

  // the joint law, rescaled to the common denominator, canonical order kept
  std::vector<std::pair<Jump, I>> q;
  q.reserve(q_law.entries.size());
  for (const auto& [z, num] : q_law.entries) q.emplace_back(z, from_big<I>(num) * scale);

  // the product law, lexicographic with the first component slowest
  std::array<ExtSupport, kMaxTrackedOrders> sup;
  std::uint64_t combos = 1;
  for (int r = 0; r < s; ++r) {
    sup[static_cast<std::size_t>(r)] = ext_support(k, vt[static_cast<std::size_t>(r)]);
    combos *= static_cast<std::uint64_t>(sup[static_cast<std::size_t>(r)].size);
  }
  std::vector<std::pair<Jump, I>> qt;
  qt.reserve(combos);
  for (std::uint64_t t = 0; t < combos; ++t) {
    std::uint64_t x = t;
    Jump z{};
    I prod(1);
    for (int r = s - 1; r >= 0; --r) {
      const auto& comp = sup[static_cast<std::size_t>(r)];
      const auto choice = static_cast<int>(x % static_cast<std::uint64_t>(comp.size));
      x /= static_cast<std::uint64_t>(comp.size);
      z.d[r] = comp.delta[choice];
      prod = prod * I(comp.num[choice]);
    }
    qt.emplace_back(z, prod);
  }

  const auto make_index = [s](const std::vector<std::pair<Jump, I>>& law) {
    std::vector<std::pair<std::uint32_t, std::size_t>> index;
    index.reserve(law.size());
    for (std::size_t i = 0; i < law.size(); ++i) index.emplace_back(jump_key(law[i].first, s), i);
    std::sort(index.begin(), index.end());
    return index;
  };
  const auto q_index = make_index(q);
  const auto qt_index = make_index(qt);
  const auto lookup = [](const std::vector<std::pair<Jump, I>>& law,
                         const std::vector<std::pair<std::uint32_t, std::size_t>>& index,
                         std::uint32_t key) -> const I* {
    const auto it = std::lower_bound(index.begin(), index.end(), key,
                                     [](const auto& e, std::uint32_t x) { return e.first < x; });
    if (it == index.end() || it->first != key) return nullptr;
    return &law[it->second].second;
  };

  I same(0);
  std::vector<std::pair<Jump, BigInt>> g1, g2, g3;
  for (const auto& [z, qv] : q) {
    const I* tp = lookup(qt, qt_index, jump_key(z, s));
    const I tv = tp ? *tp : I(0);
    const I mn = qv < tv ? qv : tv;
    if (mn > 0) {
      same += mn;
      g1.emplace_back(z, BigInt(mn));
    }
    if (qv > tv) g2.emplace_back(z, BigInt(qv - tv));
  }
  for (const auto& [z, tv] : qt) {
    const I* qp = lookup(q, q_index, jump_key(z, s));
    const I qv = qp ? *qp : I(0);
    if (tv > qv) g3.emplace_back(z, BigInt(tv - qv));
  }

  CouplingDecomposition out;
  out.s = s;
  out.denom = BigInt(denom);
  out.same_num = BigInt(same);
  const BigInt rest = out.denom - out.same_num;
  out.gamma_I = JumpLaw{s, out.same_num, std::move(g1)};
  out.gamma_II = JumpLaw{s, rest, std::move(g2)};
  out.gamma_III = JumpLaw{s, rest, std::move(g3)};
  return out;
}

Jump walk_entries(const JumpLaw& law, BigInt x, const char* what) {
  for (const auto& [z, num] : law.entries) {
    if (x < num) return z;
    x -= num;
  }
  throw std::logic_error(std::string("uniform walked past the ") + what + " mass");
}

// 128-bit fast lane for coupled_step. It samples the same optimal coupling
// with stack-allocated laws, walking gamma_I/II/III in the same entry order
// and consuming the engine exactly like the general path (below_big's
// small-bound delegation, word count and rejection all mirrored), so both
// lanes produce identical state streams; the lane only removes the cost of
// materializing the laws. s <= 3 keeps the product law stack-sized.
using u128 = unsigned __int128;

constexpr int kFastOrders = 3;
constexpr int kFastJointCap = 10;     // 1 + s + s + C(s,2) at s = 3
constexpr int kFastProductCap = 27;   // 3^s at s = 3

bool fast_lane_fits(std::int64_t k, int s) {
  if (s > kFastOrders) return false;
  const u128 cap = u128{1} << 120;
  const auto ck = static_cast<std::uint64_t>(pairs2(k));
  u128 acc = 1;
  for (int i = 0; i < s; ++i) {
    if (acc > cap / ck) return false;
    acc *= ck;
  }
  return true;
}

// Mirrors Rng::below_big: bounds at most 2^62 delegate to the 64-bit
// sampler, larger ones draw whole words and reject above the masked range.
u128 below128(Rng& rng, u128 bound) {
  if (bound <= (u128{1} << 62)) return rng.below(static_cast<std::uint64_t>(bound));
  const auto hi = static_cast<std::uint64_t>(bound >> 64);
  const unsigned bits =
      hi ? 128u - static_cast<unsigned>(std::countl_zero(hi))
         : 64u - static_cast<unsigned>(std::countl_zero(static_cast<std::uint64_t>(bound)));
  const unsigned words = (bits + 63) / 64;
  const u128 mask = (u128{1} << bits) - 1;
  for (;;) {
    u128 x = 0;
    for (unsigned i = 0; i < words; ++i) x = (x << 64) | rng.u64();
    x &= mask;
    if (x < bound) return x;
  }
}

static_assert(sizeof(Jump) == 8);
std::uint64_t jump_bits(const Jump& z) { return std::bit_cast<std::uint64_t>(z); }

struct FastEntry {
  std::uint64_t key;
  Jump z;
  u128 num;
};

// Preconditions handled by the caller: valid pair, fast_lane_fits.
CoupledJumps fast_coupled_jumps(std::int64_t k, const CountVector& v, const CountVector& vt,
                                Rng& rng) {
  const int s = static_cast<int>(v.size());
  const auto ck = static_cast<std::uint64_t>(pairs2(k));
  u128 denom = 1;
  for (int i = 0; i < s; ++i) denom *= ck;
  u128 scale = 1;
  for (int i = 1; i < s; ++i) scale *= ck;

  FastEntry joint[kFastJointCap];
  int nj = 0;
  for_each_transition(k, v, [&](const Jump& z, std::int64_t num) {
    joint[nj].key = jump_bits(z);
    joint[nj].z = z;
    joint[nj].num = static_cast<u128>(static_cast<std::uint64_t>(num)) * scale;
    ++nj;
    return true;
  });

  FastEntry prod[kFastProductCap];
  std::array<ExtSupport, kFastOrders> sup;
  std::uint64_t combos = 1;
  for (int r = 0; r < s; ++r) {
    sup[static_cast<std::size_t>(r)] = ext_support(k, vt[static_cast<std::size_t>(r)]);
    combos *= static_cast<std::uint64_t>(sup[static_cast<std::size_t>(r)].size);
  }
  for (std::uint64_t t = 0; t < combos; ++t) {
    std::uint64_t x = t;
    Jump z{};
    u128 p = 1;
    for (int r = s - 1; r >= 0; --r) {
      const auto& comp = sup[static_cast<std::size_t>(r)];
      const auto choice = static_cast<int>(x % static_cast<std::uint64_t>(comp.size));
      x /= static_cast<std::uint64_t>(comp.size);
      z.d[r] = comp.delta[choice];
      p *= static_cast<std::uint64_t>(comp.num[choice]);
    }
    prod[t] = {jump_bits(z), z, p};
  }
  const int np = static_cast<int>(combos);

  const auto product_mass = [&](std::uint64_t key) -> u128 {
    for (int j = 0; j < np; ++j)
      if (prod[j].key == key) return prod[j].num;
    return 0;
  };
  const auto joint_mass = [&](std::uint64_t key) -> u128 {
    for (int i = 0; i < nj; ++i)
      if (joint[i].key == key) return joint[i].num;
    return 0;
  };

  u128 mins[kFastJointCap];
  u128 same = 0;
  for (int i = 0; i < nj; ++i) {
    const u128 other = product_mass(joint[i].key);
    mins[i] = joint[i].num < other ? joint[i].num : other;
    same += mins[i];
  }

  CoupledJumps out;
  const u128 u = below128(rng, denom);
  if (u < same) {
    u128 x = u;
    int i = 0;
    while (x >= mins[i]) x -= mins[i++];
    out.dv = out.dv_tilde = joint[i].z;
    out.matched = true;
    return out;
  }
  u128 x = u - same;
  int i = 0;
  for (;;) {
    const u128 excess = joint[i].num - mins[i];
    if (x < excess) break;
    x -= excess;
    ++i;
  }
  out.dv = joint[i].z;
  u128 x2 = below128(rng, denom - same);
  int j = 0;
  for (;;) {
    const u128 other = joint_mass(prod[j].key);
    const u128 excess = prod[j].num > other ? prod[j].num - other : 0;
    if (x2 < excess) break;
    x2 -= excess;
    ++j;
  }
  out.dv_tilde = prod[j].z;
  out.matched = false;
  return out;
}

}  // namespace

JumpLaw product_external_law(std::int64_t k, const CountVector& counts) {
  if (k < 2) throw std::invalid_argument("product law needs level k >= 2");
  if (counts.empty() || std::ssize(counts) > kMaxTrackedOrders)
    throw std::invalid_argument("tracked spectrum must cover 1 to 8 orders");
  for (const auto w : counts)
    if (w < 0 || w > k) throw std::invalid_argument("external count outside [0, level]");

  const int s = static_cast<int>(counts.size());
  const std::int64_t ck = pairs2(k);
  JumpLaw law;
  law.s = s;
  law.denom = 1;
  for (int i = 0; i < s; ++i) law.denom *= ck;

  std::array<ExtSupport, kMaxTrackedOrders> sup;
  std::uint64_t combos = 1;
  for (int r = 0; r < s; ++r) {
    sup[static_cast<std::size_t>(r)] = ext_support(k, counts[static_cast<std::size_t>(r)]);
    combos *= static_cast<std::uint64_t>(sup[static_cast<std::size_t>(r)].size);
  }
  law.entries.reserve(combos);
  for (std::uint64_t t = 0; t < combos; ++t) {
    std::uint64_t x = t;
    Jump z{};
    BigInt prod(1);
    for (int r = s - 1; r >= 0; --r) {
      const auto& comp = sup[static_cast<std::size_t>(r)];
      const auto choice = static_cast<int>(x % static_cast<std::uint64_t>(comp.size));
      x /= static_cast<std::uint64_t>(comp.size);
      z.d[r] = comp.delta[choice];
      prod *= comp.num[choice];
    }
    law.entries.emplace_back(z, std::move(prod));
  }
  return law;
}

Rational tv_distance(const JumpLaw& a, const JumpLaw& b) {
  if (a.s != b.s) throw std::invalid_argument("laws track different spectra");
  std::map<Jump, Rational> diff;
  for (const auto& [z, num] : a.entries) diff[z] += Rational(num, a.denom);
  for (const auto& [z, num] : b.entries) diff[z] -= Rational(num, b.denom);
  Rational sum(0);
  for (const auto& [z, d] : diff) sum += d < 0 ? Rational(-d) : d;
  return sum / 2;
}

CouplingDecomposition optimal_coupling(std::int64_t k, const CountVector& v,
                                       const CountVector& v_tilde) {
  validate_pair(k, v, v_tilde);
  const std::int64_t ck = pairs2(k);
  const int s = static_cast<int>(v.size());
  bool fits = true;
  unsigned __int128 acc = 1;
  const auto cap =
      static_cast<unsigned __int128>(std::numeric_limits<std::int64_t>::max() / 2);
  for (int i = 0; i < s && fits; ++i) {
    acc *= static_cast<unsigned __int128>(ck);
    if (acc > cap) fits = false;
  }
  return fits ? build_decomposition<std::int64_t>(k, v, v_tilde)
              : build_decomposition<BigInt>(k, v, v_tilde);
}

CoupledJumps coupled_jumps_for_uniforms(const CouplingDecomposition& coupling, const BigInt& u,
                                        const BigInt& u2) {
  if (u < 0 || u >= coupling.denom)
    throw std::invalid_argument("u must lie in [0, denom)");
  CoupledJumps out;
  if (u < coupling.same_num) {
    out.dv = out.dv_tilde = walk_entries(coupling.gamma_I, u, "matched");
    out.matched = true;
    return out;
  }
  const BigInt rest = coupling.denom - coupling.same_num;
  if (u2 < 0 || u2 >= rest)
    throw std::invalid_argument("u2 must lie in [0, denom - same_num)");
  out.dv = walk_entries(coupling.gamma_II, u - coupling.same_num, "joint residual");
  out.dv_tilde = walk_entries(coupling.gamma_III, u2, "external residual");
  out.matched = false;
  return out;
}

CoupledState coupled_step(const CoupledState& state, Rng& rng, CoupledJumps* jumps) {
  validate_pair(state.level, state.v, state.v_tilde);
  CoupledJumps cj;
  if (fast_lane_fits(state.level, static_cast<int>(state.v.size()))) {
    cj = fast_coupled_jumps(state.level, state.v, state.v_tilde, rng);
  } else {
    const auto coupling = optimal_coupling(state.level, state.v, state.v_tilde);
    const BigInt u = rng.below_big(coupling.denom);
    BigInt u2(0);
    if (u >= coupling.same_num) u2 = rng.below_big(coupling.denom - coupling.same_num);
    cj = coupled_jumps_for_uniforms(coupling, u, u2);
  }
  CoupledState next;
  next.level = state.level - 1;
  next.v = state.v;
  next.v_tilde = state.v_tilde;
  for (std::size_t i = 0; i < state.v.size(); ++i) {
    next.v[i] += cj.dv.d[i];
    next.v_tilde[i] += cj.dv_tilde.d[i];
  }
  if (jumps) *jumps = cj;
  return next;
}

RegionConfig default_region(std::int64_t n) {
  if (n < 3) throw std::invalid_argument("default window needs n >= 3");
  const double ln = std::log(static_cast<double>(n));
  auto a = static_cast<std::int64_t>(static_cast<double>(n) / (ln * ln));
  auto b = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n)));
  while (b * b < n) ++b;
  while (b >= 2 && (b - 1) * (b - 1) >= n) --b;
  if (a < b + 1) a = b + 1;
  return {a, b};
}

double mismatch_rate_bound_shape(std::int64_t n, std::int64_t a, std::int64_t k) {
  const auto dn = static_cast<double>(n);
  const auto da = static_cast<double>(a);
  const auto dk = static_cast<double>(k);
  return dk / (da * std::sqrt(dn)) + da * dk / (dn * dn) + 1.0 / dk;
}

double mean_abs_diff_bound_shape(std::int64_t n, std::int64_t a, std::int64_t k) {
  const auto dn = static_cast<double>(n);
  const auto da = static_cast<double>(a);
  const auto dk = static_cast<double>(k);
  return dk * dk / (da * std::sqrt(dn)) + da * dk * dk / (dn * dn) + 1.0;
}

double variance_diff_bound_shape(std::int64_t n, std::int64_t a, std::int64_t k) {
  const auto dn = static_cast<double>(n);
  const auto da = static_cast<double>(a);
  const auto dk = static_cast<double>(k);
  return mean_abs_diff_bound_shape(n, a, k) + dk * dk * dk / (da * dn);
}

double CouplingDiagnostics::mismatch_rate(std::size_t row, int r) const {
  const std::size_t cell = row * static_cast<std::size_t>(s) + static_cast<std::size_t>(r - 1);
  return replicates == 0
             ? 0.0
             : static_cast<double>(mismatch_counts[cell]) / static_cast<double>(replicates);
}

double CouplingDiagnostics::mean_abs_diff(std::size_t row, int r) const {
  const std::size_t cell = row * static_cast<std::size_t>(s) + static_cast<std::size_t>(r - 1);
  return replicates == 0
             ? 0.0
             : static_cast<double>(abs_diff_sums[cell]) / static_cast<double>(replicates);
}

double CouplingDiagnostics::var_diff(std::size_t row, int r) const {
  if (replicates < 2) return 0.0;
  const std::size_t cell = row * static_cast<std::size_t>(s) + static_cast<std::size_t>(r - 1);
  const auto reps = static_cast<double>(replicates);
  const auto sum = static_cast<double>(diff_sums[cell]);
  const auto sq = static_cast<double>(sq_diff_sums[cell]);
  return (sq - sum * sum / reps) / (reps - 1.0);
}

namespace {

void apply_external_step(std::int64_t k, std::int32_t& w, Rng& rng) {
  std::int64_t w64 = w;
  external_step_in_place(k, w64, rng);
  w = static_cast<std::int32_t>(w64);
}

struct DiagTallies {
  std::vector<std::int64_t> mismatch, abs_sum, sum, sq_sum;

  void init(std::size_t cells) {
    mismatch.assign(cells, 0);
    abs_sum.assign(cells, 0);
    sum.assign(cells, 0);
    sq_sum.assign(cells, 0);
  }
};

// One replicate of the windowed pair: independent evolution above a_n,
// coupled jumps through the window, independent again below b_n (only when
// full-tree lengths are requested). Per level the draw order is fixed:
// the joint chain first, then the external components in order.
void run_coupled_replicate(std::int64_t n, const RegionConfig& reg, int s, Rng& rng,
                           DiagTallies* diag, double* win_l, double* win_lt, double* full_l,
                           double* full_lt) {
  CountVector v(static_cast<std::size_t>(s), 0);
  v[0] = static_cast<std::int32_t>(n);
  CountVector vt(static_cast<std::size_t>(s), static_cast<std::int32_t>(n));
  for (std::int64_t k = n; k >= 2; --k) {
    const bool in_window = k <= reg.a_n && k > reg.b_n;
    const double inc = 2.0 / (static_cast<double>(k) * static_cast<double>(k - 1));
    for (int r = 0; r < s; ++r) {
      const auto idx = static_cast<std::size_t>(r);
      if (full_l) {
        full_l[idx] += v[idx] * inc;
        full_lt[idx] += vt[idx] * inc;
      }
      if (win_l && in_window) {
        win_l[idx] += v[idx] * inc;
        win_lt[idx] += vt[idx] * inc;
      }
    }
    if (!full_l && k <= reg.b_n) break;
    if (in_window) {
      CoupledJumps cj;
      const CoupledState next = coupled_step({k, v, vt}, rng, &cj);
      v = next.v;
      vt = next.v_tilde;
      if (diag) {
        const auto row = static_cast<std::size_t>(reg.a_n - k);
        for (int r = 0; r < s; ++r) {
          const std::size_t cell = row * static_cast<std::size_t>(s) + static_cast<std::size_t>(r);
          if (cj.dv.d[r] != cj.dv_tilde.d[r]) ++diag->mismatch[cell];
          const std::int64_t d = static_cast<std::int64_t>(v[static_cast<std::size_t>(r)]) -
                                 vt[static_cast<std::size_t>(r)];
          diag->abs_sum[cell] += d < 0 ? -d : d;
          diag->sum[cell] += d;
          diag->sq_sum[cell] += d * d;
        }
      }
    } else {
      step_in_place(k, v, rng);
      for (int r = 0; r < s; ++r) apply_external_step(k, vt[static_cast<std::size_t>(r)], rng);
    }
  }
}

void validate_experiment(std::int64_t n, int s, std::uint64_t replicates) {
  if (n < 2) throw std::invalid_argument("needs n >= 2");
  if (s < 1 || s > kMaxTrackedOrders)
    throw std::invalid_argument("tracked spectrum must cover 1 to 8 orders");
  if (replicates < 1) throw std::invalid_argument("needs at least one replicate");
}

}  // namespace

CoupledRegionResult simulate_coupled_region(std::int64_t n, const RegionConfig& region, int s,
                                            std::uint64_t replicates, std::uint64_t master_seed,
                                            int workers) {
  validate_experiment(n, s, replicates);
  if (region.b_n < 1 || region.b_n >= region.a_n || region.a_n > n)
    throw std::invalid_argument("window must satisfy 1 <= b_n < a_n <= n");

  CoupledRegionResult res;
  res.n = n;
  res.region = region;
  res.s = s;
  res.replicates = replicates;
  const std::size_t su = static_cast<std::size_t>(s);
  const std::size_t cells = static_cast<std::size_t>(region.a_n - region.b_n) * su;
  res.lengths.assign(replicates * su, 0.0);
  res.lengths_tilde.assign(replicates * su, 0.0);

  const int used = workers < 1 ? 1 : workers;
  std::vector<DiagTallies> per_worker(static_cast<std::size_t>(used));
  run_partitioned(replicates, used, [&](std::uint64_t first, std::uint64_t last, int worker) {
    auto& tallies = per_worker[static_cast<std::size_t>(worker)];
    tallies.init(cells);
    for (std::uint64_t rep = first; rep < last; ++rep) {
      Rng rng = replicate_rng(master_seed, rep);
      run_coupled_replicate(n, region, s, rng, &tallies, &res.lengths[rep * su],
                            &res.lengths_tilde[rep * su], nullptr, nullptr);
    }
  });

  auto& diag = res.diagnostics;
  diag.n = n;
  diag.region = region;
  diag.s = s;
  diag.replicates = replicates;
  diag.mismatch_counts.assign(cells, 0);
  diag.abs_diff_sums.assign(cells, 0);
  diag.diff_sums.assign(cells, 0);
  diag.sq_diff_sums.assign(cells, 0);
  for (const auto& tallies : per_worker) {
    if (tallies.mismatch.empty()) continue;
    for (std::size_t i = 0; i < cells; ++i) {
      diag.mismatch_counts[i] += tallies.mismatch[i];
      diag.abs_diff_sums[i] += tallies.abs_sum[i];
      diag.diff_sums[i] += tallies.sum[i];
      diag.sq_diff_sums[i] += tallies.sq_sum[i];
    }
  }
  return res;
}

LengthGapSummary coupled_length_gap(std::int64_t n, int s, std::uint64_t replicates,
                                    std::uint64_t master_seed, int workers) {
  if (n < 100) throw std::invalid_argument("gap experiment needs n >= 100");
  validate_experiment(n, s, replicates);
  if (replicates < 2) throw std::invalid_argument("centering needs at least two replicates");
  // Couple the jumps at every level from n down to 1. Both chains start
  // deterministically at level n, and the level boundaries that split the
  // analysis into regions play no role in the construction itself; leaving
  // any stretch uncoupled would re-inject noise that never shrinks with n.
  const RegionConfig region{n, 1};

  const std::size_t su = static_cast<std::size_t>(s);
  std::vector<double> full_l(replicates * su, 0.0);
  std::vector<double> full_lt(replicates * su, 0.0);
  const int used = workers < 1 ? 1 : workers;
  run_partitioned(replicates, used, [&](std::uint64_t first, std::uint64_t last, int) {
    for (std::uint64_t rep = first; rep < last; ++rep) {
      Rng rng = replicate_rng(master_seed, rep);
      run_coupled_replicate(n, region, s, rng, nullptr, nullptr, nullptr, &full_l[rep * su],
                            &full_lt[rep * su]);
    }
  });

  LengthGapSummary out;
  out.n = n;
  out.s = s;
  out.replicates = replicates;
  out.region = region;
  out.median_abs_gap.assign(su, 0.0);
  out.sd_gap.assign(su, 0.0);
  const double scale = std::sqrt(static_cast<double>(n) / std::log(static_cast<double>(n)));
  std::vector<double> gaps(replicates);
  for (std::size_t r = 0; r < su; ++r) {
    double mean_l = 0.0, mean_lt = 0.0;
    for (std::uint64_t rep = 0; rep < replicates; ++rep) {
      mean_l += full_l[rep * su + r];
      mean_lt += full_lt[rep * su + r];
    }
    mean_l /= static_cast<double>(replicates);
    mean_lt /= static_cast<double>(replicates);
    double sq = 0.0;
    for (std::uint64_t rep = 0; rep < replicates; ++rep) {
      const double gap =
          scale * ((full_l[rep * su + r] - mean_l) - (full_lt[rep * su + r] - mean_lt));
      gaps[rep] = std::abs(gap);
      sq += gap * gap;
    }
    out.sd_gap[r] = std::sqrt(sq / static_cast<double>(replicates - 1));
    std::sort(gaps.begin(), gaps.end());
    const std::uint64_t mid = replicates / 2;
    out.median_abs_gap[r] = replicates % 2 == 1
                                ? gaps[mid]
                                : 0.5 * (gaps[mid - 1] + gaps[mid]);
  }
  return out;
}

}  // namespace coalsim
