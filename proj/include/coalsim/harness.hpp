#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coalsim/coalescent.hpp"
#include "coalsim/rng.hpp"

namespace coalsim {

// Which generator produces the length vectors. tree samples merge
// histories, chain walks the count process directly; the two agree in law.
// coupled is only meaningful to the coupling experiments.
enum class SimMode { tree, chain, coupled };

struct ExperimentConfig {
  std::int64_t n = 0;
  int s = 1;
  std::uint64_t replicates = 1;
  std::uint64_t master_seed = 0;
  SimMode mode = SimMode::tree;
  double mutation_rate = -1.0;  // negative = no mutation overlay
  std::string out_path;         // empty = caller-managed output
  int workers = 1;
};

// Resolves a worker count: an explicit positive request wins, otherwise the
// COALESCENT_WORKERS environment variable, otherwise 1.
int resolve_workers(int requested);

// sqrt(n / (4 ln n)), the factor that turns centered length vectors into
// approximately standard normal coordinates. Requires n >= 3.
double rescale_factor(std::int64_t n);

// Component r of the result is rescale_factor(n) * (raw_r - 2/r), for
// r = 1..s. Requires n == lengths.n >= 3 and 1 <= s <= lengths.s.
std::vector<double> rescale(const OrderLengths& lengths, std::int64_t n, int s);

// One replicate of the raw/smoothed length vectors under the given mode
// (tree or chain; coupled is rejected here).
OrderLengths sample_order_lengths(std::int64_t n, int s, Rng& rng, SimMode mode);

// Monte Carlo summary of the rescaled length vectors against the standard
// normal target. covariance is row-major s x s. ks_distance holds one
// Kolmogorov-Smirnov distance per marginal, computed against the exact
// normal CDF. insufficient_sample flags replicate counts too small for
// covariance (replicates < 2), in which case covariance is all zero.
struct CltSummary {
  std::int64_t n = 0;
  int s = 0;
  std::uint64_t replicates = 0;
  std::vector<double> mean;
  std::vector<double> mean_se;
  std::vector<double> covariance;
  std::vector<double> ks_distance;
  bool insufficient_sample = false;
  double wall_seconds = 0.0;
};

// Runs config.replicates independent replicates, rescales each length
// vector, and aggregates. Deterministic in everything except wall_seconds
// for a fixed master_seed, whatever the worker count: replicate rep always
// draws from replicate_rng(master_seed, rep), workers fill disjoint slots,
// and the final reduction is sequential compensated summation.
CltSummary run_clt_experiment(const ExperimentConfig& config);

// Empirical-vs-exact first and second moments of the counts W_k(r), one row
// per (level, order). mean_z is the z-score of the empirical mean against
// the exact value under the empirical standard error; deterministic levels
// (k = n) give z = 0 when the match is exact.
struct MomentRegressionRow {
  std::int64_t k = 0;
  int r = 0;
  double empirical_mean = 0.0;
  double exact_mean = 0.0;
  double mean_z = 0.0;
  double empirical_variance = 0.0;
  double exact_variance = 0.0;
};

struct MomentRegressionTable {
  std::int64_t n = 0;
  int s = 0;
  std::uint64_t replicates = 0;
  std::vector<MomentRegressionRow> rows;  // level n first, orders 1..s within
};

// Simulates config.replicates chain paths and compares the per-level count
// moments to the closed forms. Requires n > 2s so the exact variance column
// is defined everywhere.
MomentRegressionTable moment_regression(const ExperimentConfig& config);

}  // namespace coalsim
