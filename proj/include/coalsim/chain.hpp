#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <utility>
#include <vector>

#include "coalsim/counts.hpp"
#include "coalsim/rational.hpp"
#include "coalsim/rng.hpp"

namespace coalsim {

class Rng;

// Jump-vector machinery stores per-order deltas in a fixed array, so the
// tracked spectrum is capped. Tree-based counting has no such cap.
inline constexpr int kMaxTrackedOrders = 8;

// One transition of the tracked count vector: d[r-1] is the change of the
// number of order-r blocks. Components beyond the law's s are zero.
struct Jump {
  std::array<std::int8_t, kMaxTrackedOrders> d{};

  friend auto operator<=>(const Jump&, const Jump&) = default;
};

// Exact one-step law on jump vectors. Probabilities are numerator/denom;
// entries keep a fixed canonical order (see transition_law) and carry only
// positive numerators. Numerators always sum to denom exactly.
struct JumpLaw {
  int s = 0;
  BigInt denom;
  std::vector<std::pair<Jump, BigInt>> entries;

  Rational probability(const Jump& z) const;
  Rational total() const;  // sum of all probabilities; exactly 1 for a law
};

// One-step law of the tracked count vector at level k (k blocks alive,
// jumping to level k - 1). All probabilities have denominator C(k, 2).
//
// Canonical entry order: the zero jump, then -e_i for i = 1..s (order-i
// block merges with an untracked block), then the within-order merges
// -2 e_i (+ e_{2i} when 2i <= s) for i = 1..s, then the cross merges
// -e_i - e_j (+ e_{i+j} when i + j <= s) for i < j. Zero-probability
// patterns are omitted.
//
// Requires 2 <= k, 1 <= s <= kMaxTrackedOrders, all v[i] >= 0 and
// sum(v) <= k.
JumpLaw transition_law(std::int64_t k, const CountVector& v);

// Visits the entries of the level-k law in the canonical order documented at
// transition_law, as (jump, numerator over C(k, 2)) pairs, without
// materializing a law. The visitor returns false to stop early. Requires a
// valid (k, v) pair as for transition_law; no validation is performed here.
template <class F>
void for_each_transition(std::int64_t k, const CountVector& v, F&& f) {
  const int s = static_cast<int>(v.size());
  std::int64_t m = 0;
  for (const auto w : v) m += w;
  Jump z{};
  std::int64_t num = pairs2(k - m);
  if (num > 0 && !f(z, num)) return;
  for (int i = 1; i <= s; ++i) {
    num = static_cast<std::int64_t>(v[static_cast<std::size_t>(i - 1)]) * (k - m);
    if (num > 0) {
      z = Jump{};
      z.d[i - 1] = -1;
      if (!f(z, num)) return;
    }
  }
  for (int i = 1; i <= s; ++i) {
    num = pairs2(v[static_cast<std::size_t>(i - 1)]);
    if (num > 0) {
      z = Jump{};
      z.d[i - 1] = -2;
      if (2 * i <= s) z.d[2 * i - 1] += 1;
      if (!f(z, num)) return;
    }
  }
  for (int i = 1; i <= s; ++i) {
    for (int j = i + 1; j <= s; ++j) {
      num = static_cast<std::int64_t>(v[static_cast<std::size_t>(i - 1)]) *
            v[static_cast<std::size_t>(j - 1)];
      if (num > 0) {
        z = Jump{};
        z.d[i - 1] -= 1;
        z.d[j - 1] -= 1;
        if (i + j <= s) z.d[i + j - 1] += 1;
        if (!f(z, num)) return;
      }
    }
  }
}

// One-step law of the count of external (order-1) branches alone: jumps
// 0, -1, -2 with probabilities C(k-w,2), w(k-w), C(w,2) over C(k,2).
// Requires 2 <= k and 0 <= w <= k.
JumpLaw external_transition_law(std::int64_t k, std::int64_t w);

// Decodes a uniform draw u in [0, C(k,2)) into a jump by walking the
// canonical entry order of transition_law; feeding every u in range
// reproduces the law's numerators exactly.
Jump jump_for_uniform(std::int64_t k, const CountVector& v, std::int64_t u);

// Same decoding for the external law; returns the jump of w (0, -1 or -2).
int external_jump_for_uniform(std::int64_t k, std::int64_t w, std::int64_t u);

// Number of merge pairs that create an order-r block out of tracked blocks:
// unordered cross pairs plus the within-order pair count for even r.
// Counts of orders above the tracked cap read as zero.
// Requires 2 <= r <= 2s.
std::int64_t z_creation(const CountVector& v, int r);

// Exact one-step drift of the order-r count, conditioned on state v at
// `level`: E[W_{level-1}(r) - W_level(r) | v]. The creation term is zero
// for r = 1. Requires 2 <= level and 1 <= r <= s.
Rational expected_jump(std::int64_t level, const CountVector& v, int r);

// Advances v by one sampled jump of the level-k law (one below() draw).
void step_in_place(std::int64_t k, CountVector& v, Rng& rng);

// Advances an external count by one sampled jump of its level-k law.
void external_step_in_place(std::int64_t k, std::int64_t& w, Rng& rng);

// Samples the tracked count vector level by level from V_n = (n, 0, ..., 0)
// down to level 1, one below() draw per level.
BranchCountPath simulate_path(std::int64_t n, int s, Rng& rng);

}  // namespace coalsim
