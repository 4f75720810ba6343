#include "coalsim/cli.hpp"

#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coalsim/chain.hpp"
#include "coalsim/coalescent.hpp"
#include "coalsim/coupling.hpp"
#include "coalsim/csvio.hpp"
#include "coalsim/errors.hpp"
#include "coalsim/harness.hpp"
#include "coalsim/moments.hpp"
#include "coalsim/parallel.hpp"
#include "coalsim/rng.hpp"
#include "coalsim/sfs.hpp"

namespace coalsim {
namespace {

using ordered_json = nlohmann::ordered_json;

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Resolves --out: "-" or empty means the caller's stream, anything else a
// file (binary so line endings stay LF everywhere).
class OutputTarget {
 public:
  OutputTarget(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      os_ = &fallback;
      return;
    }
    file_.open(path, std::ios::binary);
    if (!file_) throw IoFailure("cannot open " + path);
    os_ = &file_;
  }

  std::ostream& stream() { return *os_; }

  void finish() {
    os_->flush();
    if (!os_->good()) throw IoFailure("write failed");
  }

 private:
  std::ostream* os_ = nullptr;
  std::ofstream file_;
};

SimMode parse_mode(const std::string& mode) {
  if (mode == "tree") return SimMode::tree;
  if (mode == "chain") return SimMode::chain;
  throw std::invalid_argument("--mode must be tree or chain");
}

std::vector<int> parse_orders(const std::string& orders) {
  std::vector<int> out;
  std::stringstream ss(orders);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int r = 0;
    try {
      r = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("--orders must be a comma list of integers");
    }
    if (used != item.size()) throw std::invalid_argument("--orders must be a comma list of integers");
    if (r < 1 || r > kMaxTrackedOrders)
      throw std::invalid_argument("--orders entries must lie in 1..8");
    if (!out.empty() && r <= out.back())
      throw std::invalid_argument("--orders must be strictly increasing");
    out.push_back(r);
  }
  if (out.empty()) throw std::invalid_argument("--orders must name at least one order");
  return out;
}

// Exact E[W_k(r)] extended to the edge r >= n that the closed form
// excludes: the only order->= n block is the root (order n, level 1).
double exact_mean_count(std::int64_t n, std::int64_t k, std::int64_t r) {
  if (r >= n) return r == n && k == 1 ? 1.0 : 0.0;
  return to_double(mean_w(n, k, r));
}

struct SimulateParams {
  std::int64_t n = 0;
  int s = 1;
  std::uint64_t reps = 0;
  std::uint64_t seed = 0;
  std::string mode = "tree";
  std::string out_path = "-";
  std::string format = "csv";
  int workers = 0;
};

int run_simulate(const SimulateParams& p, std::ostream& out, std::ostream& err) {
  const SimMode mode = parse_mode(p.mode);
  if (p.format != "csv" && p.format != "json")
    throw std::invalid_argument("--format must be csv or json");
  if (p.reps < 1) throw std::invalid_argument("--reps must be at least 1");
  const int workers = resolve_workers(p.workers);
  const auto su = static_cast<std::size_t>(p.s);

  std::vector<double> raw(p.reps * su);
  std::vector<double> smoothed(p.reps * su);
  run_partitioned(p.reps, workers, [&](std::uint64_t first, std::uint64_t last, int) {
    for (std::uint64_t rep = first; rep < last; ++rep) {
      Rng rng = replicate_rng(p.seed, rep);
      const OrderLengths lengths = sample_order_lengths(p.n, p.s, rng, mode);
      for (std::size_t r = 0; r < su; ++r) {
        raw[rep * su + r] = lengths.raw[r];
        smoothed[rep * su + r] = lengths.smoothed[r];
      }
    }
  });

  OutputTarget target(p.out_path, out);
  if (p.format == "csv") {
    std::vector<std::string> row;
    row.emplace_back("replicate");
    for (int r = 1; r <= p.s; ++r) row.push_back("L_" + std::to_string(r));
    for (int r = 1; r <= p.s; ++r) row.push_back("Lsm_" + std::to_string(r));
    write_csv_row(target.stream(), row);
    for (std::uint64_t rep = 0; rep < p.reps; ++rep) {
      row.clear();
      row.push_back(std::to_string(rep));
      for (std::size_t r = 0; r < su; ++r) row.push_back(format_significant(raw[rep * su + r]));
      for (std::size_t r = 0; r < su; ++r)
        row.push_back(format_significant(smoothed[rep * su + r]));
      write_csv_row(target.stream(), row);
    }
  } else {
    ordered_json doc;
    doc["n"] = p.n;
    doc["s"] = p.s;
    doc["replicates"] = p.reps;
    doc["seed"] = p.seed;
    doc["mode"] = p.mode;
    ordered_json rows = ordered_json::array();
    for (std::uint64_t rep = 0; rep < p.reps; ++rep) {
      ordered_json row;
      row["replicate"] = rep;
      row["L"] = std::vector<double>(raw.begin() + static_cast<std::ptrdiff_t>(rep * su),
                                     raw.begin() + static_cast<std::ptrdiff_t>((rep + 1) * su));
      row["Lsm"] =
          std::vector<double>(smoothed.begin() + static_cast<std::ptrdiff_t>(rep * su),
                              smoothed.begin() + static_cast<std::ptrdiff_t>((rep + 1) * su));
      rows.push_back(std::move(row));
    }
    doc["rows"] = std::move(rows);
    target.stream() << doc.dump(2) << '\n';
  }
  target.finish();
  (void)err;
  return 0;
}

struct Figure2Params {
  std::int64_t n = 100;
  std::uint64_t reps = 1000;
  std::uint64_t seed = 0;
  std::string out_path = "-";
  int workers = 0;
};

int run_figure2(const Figure2Params& p, std::ostream& out) {
  if (p.reps < 1) throw std::invalid_argument("--reps must be at least 1");
  const int workers = resolve_workers(p.workers);
  std::vector<double> raw(p.reps * 2);
  run_partitioned(p.reps, workers, [&](std::uint64_t first, std::uint64_t last, int) {
    for (std::uint64_t rep = first; rep < last; ++rep) {
      Rng rng = replicate_rng(p.seed, rep);
      const OrderLengths lengths = simulate_order_lengths(p.n, 2, rng);
      raw[rep * 2] = lengths.raw[0];
      raw[rep * 2 + 1] = lengths.raw[1];
    }
  });

  OutputTarget target(p.out_path, out);
  write_csv_row(target.stream(), {"replicate", "L1", "L2"});
  double sum1 = 0.0, sum2 = 0.0;
  for (std::uint64_t rep = 0; rep < p.reps; ++rep) {
    write_csv_row(target.stream(),
                  {std::to_string(rep), format_significant(raw[rep * 2]),
                   format_significant(raw[rep * 2 + 1])});
    sum1 += raw[rep * 2];
    sum2 += raw[rep * 2 + 1];
  }
  const auto reps = static_cast<double>(p.reps);
  write_csv_row(target.stream(),
                {"mean", format_significant(sum1 / reps), format_significant(sum2 / reps)});
  target.finish();
  return 0;
}

struct Figure3Params {
  std::int64_t n = 100;
  std::string orders = "1,2";
  std::uint64_t seed = 0;
  std::string out_path = "-";
};

int run_figure3(const Figure3Params& p, std::ostream& out) {
  const std::vector<int> orders = parse_orders(p.orders);
  const int s = orders.back();
  Rng rng = replicate_rng(p.seed, 0);
  const MergeHistory history = sample_merge_history(p.n, rng);
  const BranchCountPath path = order_counts(history, s);

  OutputTarget target(p.out_path, out);
  std::vector<std::string> row;
  row.emplace_back("k");
  for (const int r : orders) row.push_back("W" + std::to_string(r));
  for (const int r : orders) row.push_back("EW" + std::to_string(r));
  write_csv_row(target.stream(), row);
  for (std::int64_t k = p.n; k >= 1; --k) {
    row.clear();
    row.push_back(std::to_string(k));
    for (const int r : orders) row.push_back(std::to_string(path.w(k, r)));
    for (const int r : orders) row.push_back(format_significant(exact_mean_count(p.n, k, r)));
    write_csv_row(target.stream(), row);
  }
  target.finish();
  return 0;
}

struct MomentsParams {
  std::int64_t n = 0;
  std::int64_t k = 0;
  std::int64_t r = 0;
  std::string out_path = "-";
};

int run_moments(const MomentsParams& p, std::ostream& out, std::ostream& err) {
  const Rational mean = mean_w(p.n, p.k, p.r);
  const double asym = asymptotic_mean_w(p.n, p.k, p.r);
  bool full = true;
  Rational second, variance;
  try {
    second = second_moment_w(p.n, p.k, p.r);
    variance = variance_w(p.n, p.k, p.r);
  } catch (const UnsupportedRegimeError&) {
    full = false;
  }

  OutputTarget target(p.out_path, out);
  write_csv_row(target.stream(),
                {"n", "k", "r", "mean_num", "mean_den", "mean", "second_num", "second_den",
                 "second", "variance_num", "variance_den", "variance", "asymptotic_mean"});
  std::vector<std::string> row = {std::to_string(p.n),
                                  std::to_string(p.k),
                                  std::to_string(p.r),
                                  numerator(mean).str(),
                                  denominator(mean).str(),
                                  format_significant(to_double(mean))};
  if (full) {
    row.push_back(numerator(second).str());
    row.push_back(denominator(second).str());
    row.push_back(format_significant(to_double(second)));
    row.push_back(numerator(variance).str());
    row.push_back(denominator(variance).str());
    row.push_back(format_significant(to_double(variance)));
  } else {
    for (int i = 0; i < 6; ++i) row.emplace_back();
  }
  row.push_back(format_significant(asym));
  write_csv_row(target.stream(), row);
  target.finish();
  if (!full) {
    err << "second moment and variance are undefined here: they need n > 2r\n";
    return 3;
  }
  return 0;
}

struct CoupleParams {
  std::int64_t n = 0;
  int s = 1;
  std::uint64_t reps = 0;
  std::uint64_t seed = 0;
  std::string out_path = "-";
  int workers = 0;
};

int run_couple(const CoupleParams& p, std::ostream& out, std::ostream& err) {
  const int workers = resolve_workers(p.workers);
  const RegionConfig region = default_region(p.n);
  const CoupledRegionResult res =
      simulate_coupled_region(p.n, region, p.s, p.reps, p.seed, workers);
  err << "coupled window: a_n = " << region.a_n << ", b_n = " << region.b_n << '\n';

  OutputTarget target(p.out_path, out);
  write_csv_row(target.stream(), {"k", "r", "mismatch_rate", "mean_abs_diff", "var_diff",
                                  "mismatch_bound_shape", "variance_bound_shape"});
  const auto& diag = res.diagnostics;
  for (std::size_t row = 0; row < diag.rows(); ++row) {
    const std::int64_t k = diag.level_of_row(row);
    for (int r = 1; r <= p.s; ++r)
      write_csv_row(target.stream(),
                    {std::to_string(k), std::to_string(r),
                     format_significant(diag.mismatch_rate(row, r)),
                     format_significant(diag.mean_abs_diff(row, r)),
                     format_significant(diag.var_diff(row, r)),
                     format_significant(mismatch_rate_bound_shape(p.n, region.a_n, k)),
                     format_significant(variance_diff_bound_shape(p.n, region.a_n, k))});
  }
  target.finish();
  return 0;
}

struct SfsParams {
  double rate = 0.0;
  std::int64_t n = 0;
  int s = 1;
  std::uint64_t reps = 0;
  std::uint64_t seed = 0;
  std::string out_path = "-";
  int workers = 0;
};

int run_sfs(const SfsParams& p, std::ostream& out, std::ostream& err) {
  if (p.reps < 1) throw std::invalid_argument("--reps must be at least 1");
  if (p.s < 1 || p.s > kMaxTrackedOrders || p.s > p.n - 1)
    throw std::invalid_argument("--s must satisfy 1 <= s <= min(n - 1, 8)");
  const int workers = resolve_workers(p.workers);
  const MutationConfig config{p.rate};
  const auto su = static_cast<std::size_t>(p.s);

  std::vector<std::int64_t> counts(p.reps * (su + 1));
  run_partitioned(p.reps, workers, [&](std::uint64_t first, std::uint64_t last, int) {
    for (std::uint64_t rep = first; rep < last; ++rep) {
      Rng rng = replicate_rng(p.seed, rep);
      const MergeHistory history = sample_merge_history(p.n, rng);
      const CoalescentTimes times = sample_times(p.n, rng);
      const SfsCounts sfs = sample_sfs(history, times, config, rng);
      for (std::size_t r = 0; r < su; ++r) counts[rep * (su + 1) + r] = sfs.m[r];
      counts[rep * (su + 1) + su] = sfs.segregating_sites;
    }
  });

  err << "mutation rate nu = " << format_significant(p.rate)
      << " (theta convention: theta = 2*nu = " << format_significant(2.0 * p.rate) << ")\n";
  OutputTarget target(p.out_path, out);
  std::vector<std::string> row;
  row.emplace_back("replicate");
  for (int r = 1; r <= p.s; ++r) row.push_back("M_" + std::to_string(r));
  row.emplace_back("S_n");
  write_csv_row(target.stream(), row);
  for (std::uint64_t rep = 0; rep < p.reps; ++rep) {
    row.clear();
    row.push_back(std::to_string(rep));
    for (std::size_t r = 0; r <= su; ++r)
      row.push_back(std::to_string(counts[rep * (su + 1) + r]));
    write_csv_row(target.stream(), row);
  }
  target.finish();
  return 0;
}

struct CltParams {
  std::int64_t n = 0;
  int s = 1;
  std::uint64_t reps = 0;
  std::uint64_t seed = 0;
  std::string mode = "tree";
  std::string out_path = "-";
  int workers = 0;
};

int run_clt(const CltParams& p, std::ostream& out, std::ostream& err) {
  ExperimentConfig config;
  config.n = p.n;
  config.s = p.s;
  config.replicates = p.reps;
  config.master_seed = p.seed;
  config.mode = parse_mode(p.mode);
  config.workers = resolve_workers(p.workers);
  const CltSummary summary = run_clt_experiment(config);

  ordered_json doc;
  doc["n"] = summary.n;
  doc["s"] = summary.s;
  doc["replicates"] = summary.replicates;
  doc["mean"] = summary.mean;
  doc["mean_se"] = summary.mean_se;
  ordered_json cov = ordered_json::array();
  for (int i = 0; i < summary.s; ++i) {
    const auto su = static_cast<std::size_t>(summary.s);
    cov.push_back(std::vector<double>(
        summary.covariance.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * su),
        summary.covariance.begin() +
            static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i + 1) * su)));
  }
  doc["covariance"] = std::move(cov);
  doc["ks_distance"] = summary.ks_distance;
  doc["insufficient_sample"] = summary.insufficient_sample;

  OutputTarget target(p.out_path, out);
  target.stream() << doc.dump(2) << '\n';
  target.finish();
  err << "wall_seconds: " << format_significant(summary.wall_seconds) << '\n';
  return 0;
}

}  // namespace

int coalsim_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Order-r branch lengths of the Kingman coalescent: simulation, exact moments, "
               "coupled chains, and the mutation spectrum"};
  app.name("coalsim");
  app.require_subcommand(1);

  SimulateParams sim;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Sample raw and smoothed length vectors");
  sim_cmd->add_option("--n", sim.n, "Number of leaves")->required();
  sim_cmd->add_option("--s", sim.s, "Number of tracked orders (1..8)")->required();
  sim_cmd->add_option("--reps", sim.reps, "Number of replicates")->required();
  sim_cmd->add_option("--seed", sim.seed, "Master seed (required for reproducibility)")
      ->required();
  sim_cmd->add_option("--mode", sim.mode, "Generator: tree or chain")
      ->default_str("tree");
  sim_cmd->add_option("--out", sim.out_path, "Output path ('-' = stdout)")->default_str("-");
  sim_cmd->add_option("--format", sim.format, "csv or json")->default_str("csv");
  sim_cmd->add_option("--workers", sim.workers,
                      "Worker threads (default: COALESCENT_WORKERS or 1)");

  Figure2Params fig2;
  CLI::App* fig2_cmd =
      app.add_subcommand("figure2", "Scatter of (L1, L2) with a companion mean row");
  fig2_cmd->add_option("--n", fig2.n, "Number of leaves")->default_str("100");
  fig2_cmd->add_option("--reps", fig2.reps, "Number of replicates")->default_str("1000");
  fig2_cmd->add_option("--seed", fig2.seed, "Master seed")->required();
  fig2_cmd->add_option("--out", fig2.out_path, "Output path ('-' = stdout)")->default_str("-");
  fig2_cmd->add_option("--workers", fig2.workers,
                       "Worker threads (default: COALESCENT_WORKERS or 1)");

  Figure3Params fig3;
  CLI::App* fig3_cmd =
      app.add_subcommand("figure3", "One trajectory of the counts with their exact means");
  fig3_cmd->add_option("--n", fig3.n, "Number of leaves")->default_str("100");
  fig3_cmd->add_option("--orders", fig3.orders, "Comma list of orders")->default_str("1,2");
  fig3_cmd->add_option("--seed", fig3.seed, "Master seed")->required();
  fig3_cmd->add_option("--out", fig3.out_path, "Output path ('-' = stdout)")->default_str("-");

  MomentsParams mom;
  CLI::App* mom_cmd = app.add_subcommand("moments", "Exact count moments at one (n, k, r)");
  mom_cmd->add_option("--n", mom.n, "Number of leaves")->required();
  mom_cmd->add_option("--k", mom.k, "Level")->required();
  mom_cmd->add_option("--r", mom.r, "Order")->required();
  mom_cmd->add_option("--out", mom.out_path, "Output path ('-' = stdout)")->default_str("-");

  CoupleParams cpl;
  CLI::App* cpl_cmd =
      app.add_subcommand("couple", "Coupled-window diagnostics per level and order");
  cpl_cmd->add_option("--n", cpl.n, "Number of leaves")->required();
  cpl_cmd->add_option("--s", cpl.s, "Number of tracked orders (1..8)")->required();
  cpl_cmd->add_option("--reps", cpl.reps, "Number of replicates")->required();
  cpl_cmd->add_option("--seed", cpl.seed, "Master seed")->required();
  cpl_cmd->add_option("--out", cpl.out_path, "Output path ('-' = stdout)")->default_str("-");
  cpl_cmd->add_option("--workers", cpl.workers,
                      "Worker threads (default: COALESCENT_WORKERS or 1)");

  SfsParams sfs;
  CLI::App* sfs_cmd =
      app.add_subcommand("sfs", "Mutation counts by order plus segregating sites");
  sfs_cmd->add_option("--rate", sfs.rate, "Mutations per unit branch length (nu)")
      ->required()
      ->check(CLI::NonNegativeNumber);
  sfs_cmd->add_option("--n", sfs.n, "Number of leaves")->required();
  sfs_cmd->add_option("--s", sfs.s, "Number of reported orders (1..8)")->required();
  sfs_cmd->add_option("--reps", sfs.reps, "Number of replicates")->required();
  sfs_cmd->add_option("--seed", sfs.seed, "Master seed")->required();
  sfs_cmd->add_option("--out", sfs.out_path, "Output path ('-' = stdout)")->default_str("-");
  sfs_cmd->add_option("--workers", sfs.workers,
                      "Worker threads (default: COALESCENT_WORKERS or 1)");

  CltParams clt;
  CLI::App* clt_cmd =
      app.add_subcommand("clt", "Rescaled-length normality summary as JSON");
  clt_cmd->add_option("--n", clt.n, "Number of leaves")->required();
  clt_cmd->add_option("--s", clt.s, "Number of tracked orders (1..8)")->required();
  clt_cmd->add_option("--reps", clt.reps, "Number of replicates")->required();
  clt_cmd->add_option("--seed", clt.seed, "Master seed")->required();
  clt_cmd->add_option("--mode", clt.mode, "Generator: tree or chain")->default_str("tree");
  clt_cmd->add_option("--out", clt.out_path, "Output path ('-' = stdout)")->default_str("-");
  clt_cmd->add_option("--workers", clt.workers,
                      "Worker threads (default: COALESCENT_WORKERS or 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim_cmd->parsed()) return run_simulate(sim, out, err);
    if (fig2_cmd->parsed()) return run_figure2(fig2, out);
    if (fig3_cmd->parsed()) return run_figure3(fig3, out);
    if (mom_cmd->parsed()) return run_moments(mom, out, err);
    if (cpl_cmd->parsed()) return run_couple(cpl, out, err);
    if (sfs_cmd->parsed()) return run_sfs(sfs, out, err);
    if (clt_cmd->parsed()) return run_clt(clt, out, err);
    err << "no subcommand chosen\n";
    return 2;
  } catch (const UnsupportedRegimeError& e) {
    err << "unsupported regime: " << e.what() << '\n';
    return 3;
  } catch (const ResourceLimitError& e) {
    err << "resource limit: " << e.what() << '\n';
    return 3;
  } catch (const IoFailure& e) {
    err << "io failure: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "invalid arguments: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace coalsim
