#include "coalsim/chain.hpp"

#include <stdexcept>

namespace coalsim {

namespace {

std::int64_t tracked_total(const CountVector& v) {
  std::int64_t m = 0;
  for (auto w : v) {
    if (w < 0) throw std::invalid_argument("count vector has a negative entry");
    m += w;
  }
  return m;
}

std::int64_t validate_state(std::int64_t k, const CountVector& v) {
  if (k < 2) throw std::invalid_argument("transition law needs level k >= 2");
  if (v.empty() || v.size() > static_cast<std::size_t>(kMaxTrackedOrders))
    throw std::invalid_argument("tracked spectrum must have 1..8 orders");
  std::int64_t m = tracked_total(v);
  if (m > k) throw std::invalid_argument("more tracked blocks than the level holds");
  return m;
}

void apply_jump(CountVector& v, const Jump& z) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += z.d[i];
}

}  // namespace

Rational JumpLaw::probability(const Jump& z) const {
  for (const auto& [jump, num] : entries)
    if (jump == z) return Rational(num, denom);
  return Rational(0);
}

Rational JumpLaw::total() const {
  BigInt sum = 0;
  for (const auto& [jump, num] : entries) sum += num;
  return Rational(sum, denom);
}

JumpLaw transition_law(std::int64_t k, const CountVector& v) {
  validate_state(k, v);
  JumpLaw law;
  law.s = static_cast<int>(v.size());
  law.denom = pairs2(k);
  for_each_transition(k, v, [&](const Jump& z, std::int64_t num) {
    law.entries.emplace_back(z, BigInt(num));
    return true;
  });
  return law;
}

JumpLaw external_transition_law(std::int64_t k, std::int64_t w) {
  if (k < 2) throw std::invalid_argument("transition law needs level k >= 2");
  if (w < 0 || w > k) throw std::invalid_argument("external count must lie in [0, k]");
  JumpLaw law;
  law.s = 1;
  law.denom = pairs2(k);
  const std::int64_t nums[3] = {pairs2(k - w), w * (k - w), pairs2(w)};
  for (int delta = 0; delta < 3; ++delta) {
    if (nums[delta] > 0) {
      Jump z{};
      z.d[0] = static_cast<std::int8_t>(-delta);
      law.entries.emplace_back(z, BigInt(nums[delta]));
    }
  }
  return law;
}

Jump jump_for_uniform(std::int64_t k, const CountVector& v, std::int64_t u) {
  validate_state(k, v);
  if (u < 0 || u >= pairs2(k))
    throw std::invalid_argument("uniform draw outside [0, C(k,2))");
  Jump result{};
  for_each_transition(k, v, [&](const Jump& z, std::int64_t num) {
    if (u < num) {
      result = z;
      return false;
    }
    u -= num;
    return true;
  });
  return result;
}

int external_jump_for_uniform(std::int64_t k, std::int64_t w, std::int64_t u) {
  if (k < 2) throw std::invalid_argument("transition law needs level k >= 2");
  if (w < 0 || w > k) throw std::invalid_argument("external count must lie in [0, k]");
  if (u < 0 || u >= pairs2(k))
    throw std::invalid_argument("uniform draw outside [0, C(k,2))");
  if (u < pairs2(k - w)) return 0;
  u -= pairs2(k - w);
  return u < w * (k - w) ? -1 : -2;
}

std::int64_t z_creation(const CountVector& v, int r) {
  const int s = static_cast<int>(v.size());
  if (s < 1 || s > kMaxTrackedOrders)
    throw std::invalid_argument("tracked spectrum must have 1..8 orders");
  tracked_total(v);
  if (r < 2 || r > 2 * s)
    throw std::invalid_argument("creation count needs 2 <= r <= 2s");
  const auto count_of = [&](int order) -> std::int64_t {
    return order <= s ? v[order - 1] : 0;
  };
  std::int64_t total = 0;
  for (int i = 1; 2 * i < r; ++i) total += count_of(i) * count_of(r - i);
  if (r % 2 == 0) total += pairs2(count_of(r / 2));
  return total;
}

Rational expected_jump(std::int64_t level, const CountVector& v, int r) {
  validate_state(level, v);
  if (r < 1 || r > static_cast<int>(v.size()))
    throw std::invalid_argument("drift needs a tracked order 1 <= r <= s");
  const std::int64_t creation = r >= 2 ? z_creation(v, r) : 0;
  return Rational(BigInt(creation) - BigInt(level - 1) * v[r - 1], BigInt(pairs2(level)));
}

void step_in_place(std::int64_t k, CountVector& v, Rng& rng) {
  tracked_total(v);
  std::int64_t u = static_cast<std::int64_t>(rng.below(pairs2(k)));
  for_each_transition(k, v, [&](const Jump& z, std::int64_t num) {
    if (u < num) {
      apply_jump(v, z);
      return false;
    }
    u -= num;
    return true;
  });
}

void external_step_in_place(std::int64_t k, std::int64_t& w, Rng& rng) {
  const std::int64_t u = static_cast<std::int64_t>(rng.below(pairs2(k)));
  if (u < pairs2(k - w)) return;
  w += (u - pairs2(k - w) < w * (k - w)) ? -1 : -2;
}

BranchCountPath simulate_path(std::int64_t n, int s, Rng& rng) {
  if (n < 1) throw std::invalid_argument("simulate_path needs n >= 1");
  if (s < 1 || s > kMaxTrackedOrders)
    throw std::invalid_argument("tracked spectrum must have 1..8 orders");
  BranchCountPath path;
  path.n = n;
  path.s = s;
  path.counts.resize(static_cast<std::size_t>(n) * s);
  CountVector v(s, 0);
  v[0] = static_cast<std::int32_t>(n);
  for (std::int64_t k = n; k >= 1; --k) {
    auto* row = path.counts.data() + static_cast<std::size_t>(n - k) * s;
    for (int r = 0; r < s; ++r) row[r] = v[r];
    if (k >= 2) step_in_place(k, v, rng);
  }
  return path;
}

}  // namespace coalsim
