#include "coalsim/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>

#include "coalsim/chain.hpp"
#include "coalsim/moments.hpp"
#include "coalsim/parallel.hpp"

namespace coalsim {
namespace {

// Compensated (Kahan) accumulator so reduction order cannot move sums by
// more than ~1 ulp per term.
struct Kahan {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

OrderLengths chain_order_lengths(std::int64_t n, int s, Rng& rng) {
  OrderLengths out;
  out.n = n;
  out.s = s;
  const auto su = static_cast<std::size_t>(s);
  out.raw.assign(su, 0.0);
  out.smoothed.assign(su, 0.0);
  CountVector v(su, 0);
  v[0] = static_cast<std::int32_t>(n);
  for (std::int64_t k = n; k >= 2; --k) {
    const double x = rng.exponential(static_cast<double>(pairs2(k)));
    const double mean_x = 2.0 / (static_cast<double>(k) * static_cast<double>(k - 1));
    for (std::size_t r = 0; r < su; ++r) {
      out.raw[r] += v[r] * x;
      out.smoothed[r] += v[r] * mean_x;
    }
    step_in_place(k, v, rng);
  }
  return out;
}

void validate_config(const ExperimentConfig& config) {
  if (config.n < 2) throw std::invalid_argument("needs n >= 2");
  if (config.s < 1 || config.s > kMaxTrackedOrders)
    throw std::invalid_argument("tracked spectrum must cover 1 to 8 orders");
  if (config.s > config.n - 1)
    throw std::invalid_argument("orders are capped at n - 1");
  if (config.replicates < 1) throw std::invalid_argument("needs at least one replicate");
}

}  // namespace

int resolve_workers(int requested) {
  if (requested >= 1) return requested;
  const char* env = std::getenv("COALESCENT_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long parsed = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || parsed < 1 || parsed > 4096)
    throw std::invalid_argument("COALESCENT_WORKERS must be a positive integer");
  return static_cast<int>(parsed);
}

double rescale_factor(std::int64_t n) {
  if (n < 3) throw std::invalid_argument("rescaling needs n >= 3");
  const auto dn = static_cast<double>(n);
  return std::sqrt(dn / (4.0 * std::log(dn)));
}

std::vector<double> rescale(const OrderLengths& lengths, std::int64_t n, int s) {
  if (n != lengths.n) throw std::invalid_argument("n does not match the length vector");
  if (s < 1 || s > lengths.s)
    throw std::invalid_argument("s must address tracked orders only");
  const double factor = rescale_factor(n);
  std::vector<double> out(static_cast<std::size_t>(s));
  for (int r = 1; r <= s; ++r)
    out[static_cast<std::size_t>(r - 1)] =
        factor * (lengths.raw[static_cast<std::size_t>(r - 1)] - 2.0 / static_cast<double>(r));
  return out;
}

OrderLengths sample_order_lengths(std::int64_t n, int s, Rng& rng, SimMode mode) {
  switch (mode) {
    case SimMode::tree:
      return simulate_order_lengths(n, s, rng);
    case SimMode::chain:
      return chain_order_lengths(n, s, rng);
    default:
      throw std::invalid_argument("length sampling supports tree and chain modes only");
  }
}

CltSummary run_clt_experiment(const ExperimentConfig& config) {
  validate_config(config);
  if (config.n < 3) throw std::invalid_argument("rescaling needs n >= 3");
  if (config.mode == SimMode::coupled)
    throw std::invalid_argument("this experiment supports tree and chain modes only");
  const auto start = std::chrono::steady_clock::now();

  const auto su = static_cast<std::size_t>(config.s);
  const std::uint64_t reps = config.replicates;
  std::vector<double> store(reps * su);
  const int workers = config.workers < 1 ? 1 : config.workers;
  run_partitioned(reps, workers, [&](std::uint64_t first, std::uint64_t last, int) {
    for (std::uint64_t rep = first; rep < last; ++rep) {
      Rng rng = replicate_rng(config.master_seed, rep);
      const OrderLengths lengths = sample_order_lengths(config.n, config.s, rng, config.mode);
      const std::vector<double> z = rescale(lengths, config.n, config.s);
      std::copy(z.begin(), z.end(), store.begin() + static_cast<std::ptrdiff_t>(rep * su));
    }
  });

  CltSummary out;
  out.n = config.n;
  out.s = config.s;
  out.replicates = reps;
  out.mean.assign(su, 0.0);
  out.mean_se.assign(su, 0.0);
  out.covariance.assign(su * su, 0.0);
  out.ks_distance.assign(su, 0.0);
  out.insufficient_sample = reps < 2;

  const auto dreps = static_cast<double>(reps);
  for (std::size_t r = 0; r < su; ++r) {
    Kahan acc;
    for (std::uint64_t rep = 0; rep < reps; ++rep) acc.add(store[rep * su + r]);
    out.mean[r] = acc.sum / dreps;
  }
  if (!out.insufficient_sample) {
    for (std::size_t i = 0; i < su; ++i)
      for (std::size_t j = i; j < su; ++j) {
        Kahan acc;
        for (std::uint64_t rep = 0; rep < reps; ++rep)
          acc.add((store[rep * su + i] - out.mean[i]) * (store[rep * su + j] - out.mean[j]));
        const double cij = acc.sum / (dreps - 1.0);
        out.covariance[i * su + j] = cij;
        out.covariance[j * su + i] = cij;
      }
    for (std::size_t r = 0; r < su; ++r)
      out.mean_se[r] = std::sqrt(out.covariance[r * su + r] / dreps);
  }

  std::vector<double> column(reps);
  for (std::size_t r = 0; r < su; ++r) {
    for (std::uint64_t rep = 0; rep < reps; ++rep) column[rep] = store[rep * su + r];
    std::sort(column.begin(), column.end());
    double d = 0.0;
    for (std::uint64_t i = 0; i < reps; ++i) {
      const double cdf = standard_normal_cdf(column[i]);
      d = std::max(d, std::abs(cdf - static_cast<double>(i) / dreps));
      d = std::max(d, std::abs(cdf - static_cast<double>(i + 1) / dreps));
    }
    out.ks_distance[r] = d;
  }

  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

MomentRegressionTable moment_regression(const ExperimentConfig& config) {
  validate_config(config);
  if (config.n <= 2 * config.s)
    throw std::invalid_argument("exact variances need n > 2s");
  if (config.replicates < 2)
    throw std::invalid_argument("regression needs replicates >= 2");

  const auto su = static_cast<std::size_t>(config.s);
  const auto levels = static_cast<std::size_t>(config.n - 1);  // levels n..2
  const std::size_t cells = levels * su;
  const int workers = config.workers < 1 ? 1 : config.workers;

  std::vector<std::vector<std::int64_t>> sums(static_cast<std::size_t>(workers));
  std::vector<std::vector<std::int64_t>> sq_sums(static_cast<std::size_t>(workers));
  run_partitioned(config.replicates, workers, [&](std::uint64_t first, std::uint64_t last,
                                                  int worker) {
    auto& sum = sums[static_cast<std::size_t>(worker)];
    auto& sq = sq_sums[static_cast<std::size_t>(worker)];
    sum.assign(cells, 0);
    sq.assign(cells, 0);
    CountVector v(su, 0);
    for (std::uint64_t rep = first; rep < last; ++rep) {
      Rng rng = replicate_rng(config.master_seed, rep);
      std::fill(v.begin(), v.end(), 0);
      v[0] = static_cast<std::int32_t>(config.n);
      for (std::int64_t k = config.n; k >= 2; --k) {
        const std::size_t row = static_cast<std::size_t>(config.n - k) * su;
        for (std::size_t r = 0; r < su; ++r) {
          const std::int64_t w = v[r];
          sum[row + r] += w;
          sq[row + r] += w * w;
        }
        step_in_place(k, v, rng);
      }
    }
  });

  std::vector<std::int64_t> sum(cells, 0);
  std::vector<std::int64_t> sq(cells, 0);
  for (int w = 0; w < workers; ++w) {
    if (sums[static_cast<std::size_t>(w)].empty()) continue;
    for (std::size_t i = 0; i < cells; ++i) {
      sum[i] += sums[static_cast<std::size_t>(w)][i];
      sq[i] += sq_sums[static_cast<std::size_t>(w)][i];
    }
  }

  MomentRegressionTable table;
  table.n = config.n;
  table.s = config.s;
  table.replicates = config.replicates;
  table.rows.reserve(cells);
  const auto reps = static_cast<double>(config.replicates);
  for (std::int64_t k = config.n; k >= 2; --k)
    for (int r = 1; r <= config.s; ++r) {
      const std::size_t cell =
          static_cast<std::size_t>(config.n - k) * su + static_cast<std::size_t>(r - 1);
      MomentRegressionRow row;
      row.k = k;
      row.r = r;
      row.empirical_mean = static_cast<double>(sum[cell]) / reps;
      row.empirical_variance =
          (static_cast<double>(sq[cell]) -
           static_cast<double>(sum[cell]) / reps * static_cast<double>(sum[cell])) /
          (reps - 1.0);
      row.exact_mean = to_double(mean_w(config.n, k, r));
      row.exact_variance = to_double(variance_w(config.n, k, r));
      const double se = std::sqrt(row.empirical_variance / reps);
      if (se == 0.0)
        row.mean_z = row.empirical_mean == row.exact_mean
                         ? 0.0
                         : std::numeric_limits<double>::infinity();
      else
        row.mean_z = (row.empirical_mean - row.exact_mean) / se;
      table.rows.push_back(row);
    }
  return table;
}

}  // namespace coalsim
