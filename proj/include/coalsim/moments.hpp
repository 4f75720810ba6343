#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "coalsim/counts.hpp"
#include "coalsim/rational.hpp"

namespace coalsim {

// E[W_k(r)] for a coalescent on n leaves: the closed product form
//   (n-k)(n-k-1)...(n-k-r+2) / ((n-1)...(n-r)) * k(k-1).
// The numerator product is empty (= 1) for r = 1, and passes through an
// exact zero whenever an order-r block cannot exist at level k.
// Requires 1 <= k <= n, r >= 1 and n > r (the denominator needs it).
Rational mean_w(std::int64_t n, std::int64_t k, std::int64_t r);

// E[W_k(r)^2]: mean_w plus the pair-correlation product term
//   (n-k)...(n-k-2r+3) / ((n-1)...(n-2r)) * k(k-1)^2(k-2).
// Requires n > 2r (UnsupportedRegimeError otherwise).
Rational second_moment_w(std::int64_t n, std::int64_t k, std::int64_t r);

// V(W_k(r)) = second moment minus squared mean. Requires n > 2r.
Rational variance_w(std::int64_t n, std::int64_t k, std::int64_t r);

// E of the smoothed order-r length: sum over k of mean_w * 2/(k(k-1)),
// evaluated exactly; equals 2/r for every 1 <= r < n.
Rational mean_length(std::int64_t n, std::int64_t r);

// Large-n approximation ((n-k)/n)^(r-1) * k^2 / n of mean_w.
double asymptotic_mean_w(std::int64_t n, std::int64_t k, std::int64_t r);

// All exact moments at one (n, k, r), plus variance * n / k^2, the ratio
// whose boundedness the variance bound asserts (constants are fitted over
// grids by callers, never hardcoded). Requires n > 2r like variance_w.
struct MomentReport {
  std::int64_t n = 0;
  std::int64_t k = 0;
  std::int64_t r = 0;
  Rational mean;
  Rational second_moment;
  Rational variance;
  Rational variance_ratio;
  double asymptotic_mean = 0.0;
};

MomentReport moment_report(std::int64_t n, std::int64_t k, std::int64_t r);

// Exact distribution of the tracked count vector at one level. All state
// probabilities share one denominator; states are sorted for determinism.
struct ExactLevelLaw {
  std::int64_t level = 0;
  BigInt denom;
  std::vector<std::pair<CountVector, BigInt>> states;

  // Exact E[W(order)^power] under this law (power 1 or 2).
  Rational moment(int order, int power) const;
  Rational probability_of(const CountVector& state) const;
};

// Exact per-level laws, level n first.
struct ExactChainLaw {
  std::int64_t n = 0;
  int s = 0;
  std::vector<ExactLevelLaw> levels;

  const ExactLevelLaw& at_level(std::int64_t level) const;
};

// Exhaustive enumeration of all merge histories (every level picks each of
// its C(k,2) block pairs), recording the exact law of the tracked counts at
// every level. Independent of the one-step law code, so it can vouch for it.
// Hard cap n <= 7 (56,700 histories at n = 7); ResourceLimitError above.
ExactChainLaw enumerate_tree_oracle(std::int64_t n, int s);

// Exact forward propagation of the one-step law from V_n = (n, 0, ..., 0)
// down to level 1. State-space budget guarded by ResourceLimitError
// (n <= 255, s <= 8, and a per-level state cap).
ExactChainLaw propagate_chain_law(std::int64_t n, int s);

// Streaming variant: visits each level's law from level n down to 1 without
// retaining earlier levels; for moment scans over larger n.
void propagate_chain_law(std::int64_t n, int s,
                         const std::function<void(const ExactLevelLaw&)>& visit);

}  // namespace coalsim
