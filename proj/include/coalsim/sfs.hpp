#pragma once

#include <cstdint>
#include <vector>

#include "coalsim/coalescent.hpp"
#include "coalsim/rng.hpp"

namespace coalsim {

// Site frequency spectrum of one realization: m[r-1] counts the mutations
// carried by exactly r leaves (r = 1..n-1), segregating_sites their sum.
struct SfsCounts {
  std::int64_t n = 0;
  std::vector<std::int64_t> m;
  std::int64_t segregating_sites = 0;
};

// Mutations fall on every branch as a Poisson process with this rate per
// unit branch length. Callers working in the theta convention pass
// rate = theta / 2 (one highest common convention; the literature also uses
// theta itself, so downstream output states the mapping explicitly).
struct MutationConfig {
  double rate = 0.0;
};

// Drops Poisson(rate * branch length) mutations on each branch of the tree
// and bins them by branch order. Only counts are produced; positions along
// branches carry no information for the spectrum. Conditional on the tree,
// m[r-1] is Poisson with mean rate * (total order-r length).
SfsCounts sample_sfs(const MergeHistory& history, const CoalescentTimes& times,
                     const MutationConfig& config, Rng& rng);

// Monte Carlo summary of (M_1, ..., M_s) over independent realizations.
// covariance is row-major s x s with the sample variances on the diagonal.
struct SfsMomentSummary {
  std::int64_t n = 0;
  int s = 0;
  double rate = 0.0;
  std::uint64_t replicates = 0;
  std::vector<double> means;       // s entries, M_r sample means
  std::vector<double> mean_ses;    // standard errors of those means
  std::vector<double> covariance;  // s * s, symmetric

  double variance(int r) const;
  double correlation(int i, int j) const;
};

// Checks the independent-Poisson limit of the low-order spectrum counts:
// means near rate * 2/r, variance/mean ratios near 1, small cross
// correlations. Uses the conditional-Poisson identity, so each replicate
// only needs the order-count path and one Poisson draw per tracked order,
// never a materialized tree. Sequential; all draws come from rng.
// Requires n >= 2, 1 <= s <= min(n - 1, 8), replicates >= 2.
SfsMomentSummary corollary_check(std::int64_t n, int s, const MutationConfig& config,
                                 std::uint64_t replicates, Rng& rng);

}  // namespace coalsim
