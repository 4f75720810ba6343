#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "coalsim/chain.hpp"
#include "coalsim/counts.hpp"
#include "coalsim/rational.hpp"
#include "coalsim/rng.hpp"

namespace coalsim {

// Joint state of the tracked count chain and of s independent external-count
// chains at one level. v obeys the joint constraint sum(v) <= level; the
// components of v_tilde are each bounded by the level on their own (their
// chains are independent, so no joint constraint applies).
struct CoupledState {
  std::int64_t level = 0;
  CountVector v;
  CountVector v_tilde;
};

// Joint one-step law of s independent external-count chains over the common
// denominator C(k,2)^s. Entries come in lexicographic component order, each
// component running through jumps 0, -1, -2; zero-mass entries are omitted.
JumpLaw product_external_law(std::int64_t k, const CountVector& counts);

// Half the L1 distance between two laws on the same jump space, exact.
Rational tv_distance(const JumpLaw& a, const JumpLaw& b);

// Maximal-coupling split of Q (the joint chain's jump law at level k) and
// Qt (the product of external laws). Over the common denominator
// denom = C(k,2)^s the overlap min(Q, Qt) has total mass same_num, and
//   gamma_I   = min(Q, Qt) / p          (the shared jump),
//   gamma_II  = (Q - Qt)^+ / (1 - p)    (jump of the joint chain when split),
//   gamma_III = (Qt - Q)^+ / (1 - p)    (jump of the external block when split),
// with p = same_num / denom = 1 - TV(Q, Qt). gamma_II and gamma_III always
// have disjoint supports, which is what makes the mismatch probability hit
// the TV lower bound. At p = 1 (or p = 0) the unused laws are empty with a
// zero denominator and must not be sampled.
//
// Entry order: gamma_I and gamma_II follow transition_law's canonical
// order; gamma_III follows product_external_law's. Sampling walks entries
// in that order, so the decode is reproducible.
struct CouplingDecomposition {
  int s = 0;
  BigInt denom;
  BigInt same_num;
  JumpLaw gamma_I;
  JumpLaw gamma_II;
  JumpLaw gamma_III;

  Rational p() const { return Rational(same_num, denom); }
  Rational mismatch_probability() const { return Rational(denom - same_num, denom); }
};

CouplingDecomposition optimal_coupling(std::int64_t k, const CountVector& v,
                                       const CountVector& v_tilde);

struct CoupledJumps {
  Jump dv;
  Jump dv_tilde;
  bool matched = false;
};

// Pure decode of one coupled transition. u is uniform on [0, denom): below
// same_num it walks gamma_I and both chains share the jump; otherwise
// gamma_II is walked with the remainder and gamma_III with u2, which must
// be uniform on [0, denom - same_num) and is ignored on the matched branch.
// Feeding every (u, u2) pair reproduces the exact coupled law.
CoupledJumps coupled_jumps_for_uniforms(const CouplingDecomposition& coupling, const BigInt& u,
                                        const BigInt& u2);

// One coupled transition to level - 1. Draws one bounded uniform, plus a
// second one only on the mismatched branch.
CoupledState coupled_step(const CoupledState& state, Rng& rng, CoupledJumps* jumps = nullptr);

// Coupled level window: the coupling runs from level a_n down to b_n, and
// windowed length sums collect levels b_n < k <= a_n.
struct RegionConfig {
  std::int64_t a_n = 0;
  std::int64_t b_n = 0;
};

// Defaults b_n = ceil(sqrt(n)) and a_n = floor(n / (ln n)^2), with a_n
// pushed up to b_n + 1 where the two cross (they do for n up to ~5000, so
// the window would otherwise be empty at n = 1000). Requires n >= 3.
RegionConfig default_region(std::int64_t n);

// Shapes of the coupling error bounds at level k for a coupling started at
// level a (constants deliberately excluded; callers fit them over grids):
//   per-step jump mismatch probability:  k/(a sqrt(n)) + a k/n^2 + 1/k
//   mean absolute count gap:             k^2/(a sqrt(n)) + a k^2/n^2 + 1
//   variance of the count gap:           adds k^3/(a n)
double mismatch_rate_bound_shape(std::int64_t n, std::int64_t a, std::int64_t k);
double mean_abs_diff_bound_shape(std::int64_t n, std::int64_t a, std::int64_t k);
double variance_diff_bound_shape(std::int64_t n, std::int64_t a, std::int64_t k);

// Per-level, per-order tallies over the coupled window, accumulated across
// replicates. Row i covers arrival level a_n - 1 - i, down to b_n; the flat
// index is row * s + (r - 1). All tallies are exact integers, so partial
// results merge the same way in any order.
struct CouplingDiagnostics {
  std::int64_t n = 0;
  RegionConfig region;
  int s = 0;
  std::uint64_t replicates = 0;
  std::vector<std::int64_t> mismatch_counts;  // this order's jump component differed
  std::vector<std::int64_t> abs_diff_sums;    // |W_k(r) - Wt_k(r)| at the arrival level
  std::vector<std::int64_t> diff_sums;        // W_k(r) - Wt_k(r)
  std::vector<std::int64_t> sq_diff_sums;     // (W_k(r) - Wt_k(r))^2

  std::size_t rows() const { return static_cast<std::size_t>(region.a_n - region.b_n); }
  std::int64_t level_of_row(std::size_t row) const {
    return region.a_n - 1 - static_cast<std::int64_t>(row);
  }
  double mismatch_rate(std::size_t row, int r) const;
  double mean_abs_diff(std::size_t row, int r) const;
  double var_diff(std::size_t row, int r) const;  // sample variance (divisor R - 1)
};

// Replicated window experiment. Each replicate runs the joint chain (as a
// streamed coalescent) and the s external chains (all started at n)
// independently from level n down to a_n, then couples their jumps from a_n
// down to b_n, tallying diagnostics at every arrival level and collecting
// the windowed smoothed lengths
//   lengths[rep*s + r-1] = sum over b_n < k <= a_n of 2/(k(k-1)) W_k(r)
// and the same for the external chains. Per-replicate streams are keyed by
// (master_seed, replicate), so any worker count gives identical results.
struct CoupledRegionResult {
  std::int64_t n = 0;
  RegionConfig region;
  int s = 0;
  std::uint64_t replicates = 0;
  CouplingDiagnostics diagnostics;
  std::vector<double> lengths;
  std::vector<double> lengths_tilde;
};

CoupledRegionResult simulate_coupled_region(std::int64_t n, const RegionConfig& region, int s,
                                            std::uint64_t replicates, std::uint64_t master_seed,
                                            int workers = 1);

// Whole-tree gap experiment: per replicate the joint chain and the external
// chains start at their deterministic level-n states and their jumps are
// coupled at every level from n down to 1. The full smoothed lengths are
// collected over all levels, and per order the gap
//   sqrt(n / ln n) * ((L - mean L) - (Lt - mean Lt))
// is centered with ensemble means; the summary reports the median absolute
// gap and the gap's standard deviation, with region = {n, 1}. The coupling
// keeps the per-level count difference small all the way down, so the gap
// shrinks with n even though each length alone has fluctuations of constant
// order under this rescaling. Requires n >= 100.
struct LengthGapSummary {
  std::int64_t n = 0;
  int s = 0;
  std::uint64_t replicates = 0;
  RegionConfig region;
  std::vector<double> median_abs_gap;
  std::vector<double> sd_gap;
};

LengthGapSummary coupled_length_gap(std::int64_t n, int s, std::uint64_t replicates,
                                    std::uint64_t master_seed, int workers = 1);

}  // namespace coalsim
