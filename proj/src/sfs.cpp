#include "coalsim/sfs.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "coalsim/chain.hpp"

namespace coalsim {
namespace {

void validate_rate(double rate) {
  if (!(rate >= 0.0) || !std::isfinite(rate))
    throw std::invalid_argument("mutation rate must be a finite nonnegative real");
}

}  // namespace

SfsCounts sample_sfs(const MergeHistory& history, const CoalescentTimes& times,
                     const MutationConfig& config, Rng& rng) {
  validate_rate(config.rate);
  if (times.n != history.n)
    throw std::invalid_argument("history and times must come from the same n");

  const std::int64_t n = history.n;
  SfsCounts out;
  out.n = n;
  out.m.assign(static_cast<std::size_t>(n - 1), 0);
  if (config.rate == 0.0) return out;

  // depth_below[k] = total time spent at levels >= k; a branch alive at
  // levels formed_at >= level > ends_at has length
  // depth_below[ends_at + 1] - depth_below[formed_at + 1].
  std::vector<double> depth_below(static_cast<std::size_t>(n) + 2, 0.0);
  for (std::int64_t k = n; k >= 2; --k)
    depth_below[static_cast<std::size_t>(k)] =
        depth_below[static_cast<std::size_t>(k) + 1] + times.at(k);

  for (const BranchRecord& rec : branch_records(history)) {
    const double length = depth_below[static_cast<std::size_t>(rec.ends_at) + 1] -
                          depth_below[static_cast<std::size_t>(rec.formed_at) + 1];
    const std::int64_t hits = rng.poisson(config.rate * length);
    out.m[static_cast<std::size_t>(rec.order) - 1] += hits;
    out.segregating_sites += hits;
  }
  return out;
}

double SfsMomentSummary::variance(int r) const {
  const auto su = static_cast<std::size_t>(s);
  return covariance[static_cast<std::size_t>(r - 1) * su + static_cast<std::size_t>(r - 1)];
}

double SfsMomentSummary::correlation(int i, int j) const {
  const auto su = static_cast<std::size_t>(s);
  const double cij =
      covariance[static_cast<std::size_t>(i - 1) * su + static_cast<std::size_t>(j - 1)];
  const double denom = std::sqrt(variance(i) * variance(j));
  return denom == 0.0 ? 0.0 : cij / denom;
}

SfsMomentSummary corollary_check(std::int64_t n, int s, const MutationConfig& config,
                                 std::uint64_t replicates, Rng& rng) {
  validate_rate(config.rate);
  if (n < 2) throw std::invalid_argument("needs n >= 2");
  if (s < 1 || s > kMaxTrackedOrders || s > n - 1)
    throw std::invalid_argument("tracked orders must satisfy 1 <= s <= min(n - 1, 8)");
  if (replicates < 2) throw std::invalid_argument("summary statistics need replicates >= 2");

  const auto su = static_cast<std::size_t>(s);
  std::vector<std::int64_t> sum(su, 0);
  std::vector<std::int64_t> cross(su * su, 0);  // sums of M_i * M_j
  std::vector<double> lengths(su);
  std::vector<std::int64_t> counts(su);

  for (std::uint64_t rep = 0; rep < replicates; ++rep) {
    // Conditional on the realization, each M_r is Poisson with mean
    // rate * (order-r length), so the count path plus one Poisson draw per
    // order reproduces the joint law of (M_1..M_s).
    CountVector v(su, 0);
    v[0] = static_cast<std::int32_t>(n);
    std::fill(lengths.begin(), lengths.end(), 0.0);
    for (std::int64_t k = n; k >= 2; --k) {
      const double x = rng.exponential(static_cast<double>(pairs2(k)));
      for (std::size_t r = 0; r < su; ++r) lengths[r] += v[r] * x;
      step_in_place(k, v, rng);
    }
    for (std::size_t r = 0; r < su; ++r) {
      counts[r] = rng.poisson(config.rate * lengths[r]);
      sum[r] += counts[r];
    }
    for (std::size_t i = 0; i < su; ++i)
      for (std::size_t j = i; j < su; ++j) cross[i * su + j] += counts[i] * counts[j];
  }

  SfsMomentSummary out;
  out.n = n;
  out.s = s;
  out.rate = config.rate;
  out.replicates = replicates;
  out.means.resize(su);
  out.mean_ses.resize(su);
  out.covariance.assign(su * su, 0.0);
  const auto reps = static_cast<double>(replicates);
  for (std::size_t r = 0; r < su; ++r) out.means[r] = static_cast<double>(sum[r]) / reps;
  for (std::size_t i = 0; i < su; ++i)
    for (std::size_t j = i; j < su; ++j) {
      const double cij = (static_cast<double>(cross[i * su + j]) -
                          reps * out.means[i] * out.means[j]) /
                         (reps - 1.0);
      out.covariance[i * su + j] = cij;
      out.covariance[j * su + i] = cij;
    }
  for (std::size_t r = 0; r < su; ++r)
    out.mean_ses[r] = std::sqrt(out.covariance[r * su + r] / reps);
  return out;
}

}  // namespace coalsim
