#include "coalsim/moments.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "coalsim/chain.hpp"
#include "coalsim/errors.hpp"

namespace coalsim {

namespace {

void check_level_order(std::int64_t n, std::int64_t k, std::int64_t r) {
  if (r < 1 || k < 1 || k > n)
    throw std::invalid_argument("moment formulas need 1 <= k <= n and r >= 1");
}

// Counts are packed one byte per tracked order, so oracle states fit a
// 64-bit key (n <= 255, s <= 8).
std::uint64_t pack_counts(const CountVector& v) {
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    key |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(v[i])) << (8 * i);
  return key;
}

CountVector unpack_counts(std::uint64_t key, int s) {
  CountVector v(s);
  for (int i = 0; i < s; ++i) v[i] = static_cast<std::int32_t>((key >> (8 * i)) & 0xff);
  return v;
}

template <class Map>
ExactLevelLaw make_level_law(std::int64_t level, const Map& states, const BigInt& denom,
                             int s) {
  ExactLevelLaw law;
  law.level = level;
  law.denom = denom;
  law.states.reserve(states.size());
  for (const auto& [key, num] : states) law.states.emplace_back(unpack_counts(key, s), num);
  std::sort(law.states.begin(), law.states.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return law;
}

}  // namespace

Rational mean_w(std::int64_t n, std::int64_t k, std::int64_t r) {
  check_level_order(n, k, r);
  if (n <= r) throw UnsupportedRegimeError("mean_w needs n > r");
  BigInt num = BigInt(k) * (k - 1);
  for (std::int64_t i = 0; i <= r - 2; ++i) num *= (n - k - i);
  BigInt den = 1;
  for (std::int64_t i = 1; i <= r; ++i) den *= (n - i);
  return Rational(num, den);
}

Rational second_moment_w(std::int64_t n, std::int64_t k, std::int64_t r) {
  check_level_order(n, k, r);
  if (n <= 2 * r) throw UnsupportedRegimeError("second_moment_w needs n > 2r");
  BigInt num = BigInt(k) * (k - 1) * (k - 1) * (k - 2);
  for (std::int64_t i = 0; i <= 2 * r - 3; ++i) num *= (n - k - i);
  BigInt den = 1;
  for (std::int64_t i = 1; i <= 2 * r; ++i) den *= (n - i);
  return mean_w(n, k, r) + Rational(num, den);
}

Rational variance_w(std::int64_t n, std::int64_t k, std::int64_t r) {
  const Rational mean = mean_w(n, k, r);
  return second_moment_w(n, k, r) - mean * mean;
}

Rational mean_length(std::int64_t n, std::int64_t r) {
  if (r < 1) throw std::invalid_argument("mean_length needs r >= 1");
  if (n <= r) throw UnsupportedRegimeError("mean_length needs n > r");
  BigInt den = 1;
  for (std::int64_t i = 1; i <= r; ++i) den *= (n - i);
  // Sum over j = n-k of the falling product j(j-1)...(j-r+2), maintained
  // incrementally; this is exactly sum_k mean_w(n,k,r) * 2/(k(k-1)).
  BigInt sum = 0;
  if (r == 1) {
    sum = n - 1;
  } else {
    BigInt falling = 1;
    for (std::int64_t t = 1; t <= r - 1; ++t) falling *= t;
    for (std::int64_t j = r - 1; j <= n - 2; ++j) {
      if (j > r - 1) falling = falling * j / (j - r + 1);
      sum += falling;
    }
  }
  return Rational(2 * sum, den);
}

double asymptotic_mean_w(std::int64_t n, std::int64_t k, std::int64_t r) {
  check_level_order(n, k, r);
  const double base = static_cast<double>(n - k) / static_cast<double>(n);
  return std::pow(base, static_cast<double>(r - 1)) * static_cast<double>(k) *
         static_cast<double>(k) / static_cast<double>(n);
}

Rational ExactLevelLaw::moment(int order, int power) const {
  if (order < 1 || (power != 1 && power != 2))
    throw std::invalid_argument("moment needs order >= 1 and power in {1, 2}");
  BigInt sum = 0;
  for (const auto& [state, num] : states) {
    if (order > static_cast<int>(state.size())) continue;
    std::int64_t w = state[order - 1];
    sum += num * (power == 1 ? w : w * w);
  }
  return Rational(sum, denom);
}

Rational ExactLevelLaw::probability_of(const CountVector& state) const {
  auto it = std::lower_bound(
      states.begin(), states.end(), state,
      [](const auto& entry, const CountVector& key) { return entry.first < key; });
  if (it == states.end() || it->first != state) return Rational(0);
  return Rational(it->second, denom);
}

const ExactLevelLaw& ExactChainLaw::at_level(std::int64_t level) const {
  if (level < 1 || level > n) throw std::invalid_argument("level outside [1, n]");
  return levels[static_cast<std::size_t>(n - level)];
}

ExactChainLaw enumerate_tree_oracle(std::int64_t n, int s) {
  if (n < 1) throw std::invalid_argument("enumeration needs n >= 1");
  if (s < 1 || s > kMaxTrackedOrders)
    throw std::invalid_argument("tracked spectrum must have 1..8 orders");
  if (n > 7)
    throw ResourceLimitError("merge-history enumeration is capped at n = 7");

  // weight[k]: number of ways to finish a history from level k downward.
  std::vector<std::int64_t> weight(n + 1, 1);
  for (std::int64_t k = 2; k <= n; ++k) weight[k] = weight[k - 1] * pairs2(k);

  std::vector<std::map<std::uint64_t, BigInt>> hist(n + 1);
  const auto record = [&](const std::vector<std::int32_t>& blocks) {
    CountVector v(s, 0);
    for (std::int32_t size : blocks)
      if (size <= s) ++v[size - 1];
    hist[blocks.size()][pack_counts(v)] += weight[blocks.size()];
  };

  const std::function<void(std::vector<std::int32_t>&)> visit =
      [&](std::vector<std::int32_t>& blocks) {
        record(blocks);
        const std::size_t k = blocks.size();
        if (k == 1) return;
        for (std::size_t i = 0; i < k; ++i) {
          for (std::size_t j = i + 1; j < k; ++j) {
            std::vector<std::int32_t> merged;
            merged.reserve(k - 1);
            for (std::size_t t = 0; t < k; ++t)
              if (t != i && t != j) merged.push_back(blocks[t]);
            merged.push_back(blocks[i] + blocks[j]);
            visit(merged);
          }
        }
      };

  std::vector<std::int32_t> blocks(static_cast<std::size_t>(n), 1);
  visit(blocks);

  ExactChainLaw law;
  law.n = n;
  law.s = s;
  const BigInt total = weight[n];
  for (std::int64_t level = n; level >= 1; --level)
    law.levels.push_back(make_level_law(level, hist[level], total, s));
  return law;
}

void propagate_chain_law(std::int64_t n, int s,
                         const std::function<void(const ExactLevelLaw&)>& visit) {
  if (n < 1) throw std::invalid_argument("propagation needs n >= 1");
  if (s < 1 || s > kMaxTrackedOrders)
    throw std::invalid_argument("tracked spectrum must have 1..8 orders");
  if (n > 255)
    throw ResourceLimitError("exact propagation is capped at n = 255");
  constexpr std::size_t kStateBudget = 4'000'000;

  std::unordered_map<std::uint64_t, BigInt> current;
  CountVector start(s, 0);
  start[0] = static_cast<std::int32_t>(n);
  current.emplace(pack_counts(start), 1);
  BigInt denom = 1;
  visit(make_level_law(n, current, denom, s));

  for (std::int64_t k = n; k >= 2; --k) {
    std::unordered_map<std::uint64_t, BigInt> next;
    next.reserve(current.size() * 2);
    for (const auto& [key, num] : current) {
      const CountVector v = unpack_counts(key, s);
      const JumpLaw law = transition_law(k, v);
      for (const auto& [jump, jump_num] : law.entries) {
        std::uint64_t new_key = key;
        for (int i = 0; i < s; ++i)
          new_key += static_cast<std::uint64_t>(static_cast<std::int64_t>(jump.d[i]))
                     << (8 * i);
        next[new_key] += num * jump_num;
      }
    }
    if (next.size() > kStateBudget)
      throw ResourceLimitError("exact propagation exceeded the state budget");
    denom *= pairs2(k);
    current = std::move(next);
    visit(make_level_law(k - 1, current, denom, s));
  }
}

ExactChainLaw propagate_chain_law(std::int64_t n, int s) {
  ExactChainLaw law;
  law.n = n;
  law.s = s;
  propagate_chain_law(n, s,
                      [&](const ExactLevelLaw& level) { law.levels.push_back(level); });
  return law;
}

MomentReport moment_report(std::int64_t n, std::int64_t k, std::int64_t r) {
  MomentReport report;
  report.n = n;
  report.k = k;
  report.r = r;
  report.mean = mean_w(n, k, r);
  report.second_moment = second_moment_w(n, k, r);
  report.variance = report.second_moment - report.mean * report.mean;
  report.variance_ratio = report.variance * Rational(BigInt(n), BigInt(k) * BigInt(k));
  report.asymptotic_mean = asymptotic_mean_w(n, k, r);
  return report;
}

}  // namespace coalsim
