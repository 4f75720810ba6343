#include "coalsim/coalescent.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "coalsim/errors.hpp"
#include "coalsim/rational.hpp"

namespace coalsim {
namespace {

// Pair index t at a level with k blocks names (i, j), i < j, in the order
// (0,1),(0,2),(1,2),(0,3),...: j is the triangular root, i the remainder.
std::pair<std::int32_t, std::int32_t> decode_pair(std::int64_t t) {
  auto j = static_cast<std::int64_t>((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(t))) / 2.0);
  while (j * (j - 1) / 2 > t) --j;
  while ((j + 1) * j / 2 <= t) ++j;
  return {static_cast<std::int32_t>(t - j * (j - 1) / 2), static_cast<std::int32_t>(j)};
}

void validate_n(std::int64_t n) {
  if (n < 2) throw std::invalid_argument("sample size must be at least 2");
}

void validate_s(int s) {
  if (s < 1) throw std::invalid_argument("maximal tracked order must be at least 1");
}

// Every finite nonnegative double is m * 2^(e-53) with m a 53-bit integer
// and e >= -1073, so shifting by e - 53 + 1126 never goes negative.
constexpr int kScaleBits = 1126;

BigInt exact_scaled(double x) {
  if (x == 0.0) return BigInt(0);
  int e = 0;
  const double f = std::frexp(x, &e);
  const auto m = static_cast<std::int64_t>(std::ldexp(f, 53));
  return BigInt(m) << (e - 53 + kScaleBits);
}

}  // namespace

MergeHistory MergeHistory::from_merges(std::int64_t n,
                                       std::vector<std::pair<std::int32_t, std::int32_t>> merges) {
  validate_n(n);
  if (std::ssize(merges) != n - 1)
    throw std::invalid_argument("a history over " + std::to_string(n) + " leaves needs " +
                                std::to_string(n - 1) + " merges");
  for (std::int64_t k = n; k >= 2; --k) {
    const auto [i, j] = merges[static_cast<std::size_t>(n - k)];
    if (i < 0 || i >= j || j >= k)
      throw std::invalid_argument("merge at level " + std::to_string(k) +
                                  " names positions outside the live array");
  }
  return MergeHistory{n, std::move(merges)};
}

MergeHistory sample_merge_history(std::int64_t n, Rng& rng) {
  validate_n(n);
  MergeHistory history;
  history.n = n;
  history.merges.reserve(static_cast<std::size_t>(n - 1));
  for (std::int64_t k = n; k >= 2; --k) {
    const auto t = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(pairs2(k))));
    history.merges.push_back(decode_pair(t));
  }
  return history;
}

CoalescentTimes sample_times(std::int64_t n, Rng& rng) {
  validate_n(n);
  CoalescentTimes times;
  times.n = n;
  times.x.assign(static_cast<std::size_t>(n + 1), 0.0);
  for (std::int64_t k = n; k >= 2; --k)
    times.x[static_cast<std::size_t>(k)] = rng.exponential(static_cast<double>(pairs2(k)));
  return times;
}

BranchCountPath order_counts(const MergeHistory& history, int s) {
  validate_s(s);
  const std::int64_t n = history.n;
  validate_n(n);
  BranchCountPath path;
  path.n = n;
  path.s = s;
  path.counts.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(s), 0);
  std::vector<std::int32_t> size(static_cast<std::size_t>(n), 1);
  CountVector w(static_cast<std::size_t>(s), 0);
  w[0] = static_cast<std::int32_t>(n);
  std::size_t row = 0;
  for (std::int64_t k = n; k >= 1; --k) {
    for (int r = 0; r < s; ++r) path.counts[row++] = w[static_cast<std::size_t>(r)];
    if (k == 1) break;
    const auto [i, j] = history.merges[static_cast<std::size_t>(n - k)];
    const std::int32_t a = size[static_cast<std::size_t>(i)];
    const std::int32_t b = size[static_cast<std::size_t>(j)];
    if (a <= s) --w[static_cast<std::size_t>(a - 1)];
    if (b <= s) --w[static_cast<std::size_t>(b - 1)];
    if (a + b <= s) ++w[static_cast<std::size_t>(a + b - 1)];
    size[static_cast<std::size_t>(i)] = a + b;
    size[static_cast<std::size_t>(j)] = size[static_cast<std::size_t>(k - 1)];
  }
  return path;
}

std::vector<BranchRecord> branch_records(const MergeHistory& history) {
  const std::int64_t n = history.n;
  validate_n(n);
  std::vector<BranchRecord> records;
  records.reserve(static_cast<std::size_t>(2 * (n - 1)));
  std::vector<std::int32_t> size(static_cast<std::size_t>(n), 1);
  std::vector<std::int32_t> formed(static_cast<std::size_t>(n), static_cast<std::int32_t>(n));
  for (std::int64_t k = n; k >= 2; --k) {
    const auto [i, j] = history.merges[static_cast<std::size_t>(n - k)];
    const auto level = static_cast<std::int32_t>(k - 1);
    records.push_back({size[static_cast<std::size_t>(i)], formed[static_cast<std::size_t>(i)], level});
    records.push_back({size[static_cast<std::size_t>(j)], formed[static_cast<std::size_t>(j)], level});
    size[static_cast<std::size_t>(i)] += size[static_cast<std::size_t>(j)];
    formed[static_cast<std::size_t>(i)] = level;
    size[static_cast<std::size_t>(j)] = size[static_cast<std::size_t>(k - 1)];
    formed[static_cast<std::size_t>(j)] = formed[static_cast<std::size_t>(k - 1)];
  }
  return records;
}

OrderLengths lengths_from_tree(const MergeHistory& history, const CoalescentTimes& times,
                               int s, LengthValidation validation) {
  validate_s(s);
  const std::int64_t n = history.n;
  validate_n(n);
  if (times.n != n) throw std::invalid_argument("times and history disagree on the sample size");

  OrderLengths out;
  out.n = n;
  out.s = s;
  out.raw.assign(static_cast<std::size_t>(s), 0.0);
  out.smoothed.assign(static_cast<std::size_t>(s), 0.0);

  const bool exact = validation == LengthValidation::exact_dual_route;
  std::vector<BigInt> level_sums(exact ? static_cast<std::size_t>(s) : 0);
  std::vector<BigInt> scaled(exact ? static_cast<std::size_t>(n + 2) : 0);

  std::vector<std::int32_t> size(static_cast<std::size_t>(n), 1);
  CountVector w(static_cast<std::size_t>(s), 0);
  w[0] = static_cast<std::int32_t>(n);
  for (std::int64_t k = n; k >= 2; --k) {
    const double xk = times.at(k);
    const double mean = 2.0 / (static_cast<double>(k) * static_cast<double>(k - 1));
    if (exact) scaled[static_cast<std::size_t>(k)] = exact_scaled(xk);
    for (int r = 0; r < s; ++r) {
      const std::int32_t count = w[static_cast<std::size_t>(r)];
      if (count == 0) continue;
      out.raw[static_cast<std::size_t>(r)] += count * xk;
      out.smoothed[static_cast<std::size_t>(r)] += count * mean;
      if (exact)
        level_sums[static_cast<std::size_t>(r)] += BigInt(count) * scaled[static_cast<std::size_t>(k)];
    }
    const auto [i, j] = history.merges[static_cast<std::size_t>(n - k)];
    const std::int32_t a = size[static_cast<std::size_t>(i)];
    const std::int32_t b = size[static_cast<std::size_t>(j)];
    if (a <= s) --w[static_cast<std::size_t>(a - 1)];
    if (b <= s) --w[static_cast<std::size_t>(b - 1)];
    if (a + b <= s) ++w[static_cast<std::size_t>(a + b - 1)];
    size[static_cast<std::size_t>(i)] = a + b;
    size[static_cast<std::size_t>(j)] = size[static_cast<std::size_t>(k - 1)];
  }

  if (exact) {
    // suffix[k] = exact sum of X_k + X_{k+1} + ... + X_n
    std::vector<BigInt> suffix(static_cast<std::size_t>(n + 2));
    for (std::int64_t k = n; k >= 2; --k)
      suffix[static_cast<std::size_t>(k)] =
          suffix[static_cast<std::size_t>(k + 1)] + scaled[static_cast<std::size_t>(k)];
    std::vector<BigInt> branch_sums(static_cast<std::size_t>(s));
    for (const auto& rec : branch_records(history)) {
      if (rec.order > s) continue;
      branch_sums[static_cast<std::size_t>(rec.order - 1)] +=
          suffix[static_cast<std::size_t>(rec.ends_at + 1)] -
          suffix[static_cast<std::size_t>(rec.formed_at + 1)];
    }
    for (int r = 0; r < s; ++r) {
      if (branch_sums[static_cast<std::size_t>(r)] != level_sums[static_cast<std::size_t>(r)])
        throw std::logic_error("per-branch and per-level length sums disagree at order " +
                               std::to_string(r + 1));
      const double reference =
          to_double(Rational(level_sums[static_cast<std::size_t>(r)], BigInt(1) << kScaleBits));
      const double fast = out.raw[static_cast<std::size_t>(r)];
      if (std::abs(fast - reference) > 1e-9 * std::max(std::abs(reference), 1.0))
        throw std::logic_error("floating accumulation drifted from the exact length at order " +
                               std::to_string(r + 1));
    }
  }
  return out;
}

OrderLengths simulate_order_lengths(std::int64_t n, int s, Rng& rng) {
  validate_s(s);
  validate_n(n);
  OrderLengths out;
  out.n = n;
  out.s = s;
  out.raw.assign(static_cast<std::size_t>(s), 0.0);
  out.smoothed.assign(static_cast<std::size_t>(s), 0.0);
  std::vector<std::int32_t> size(static_cast<std::size_t>(n), 1);
  CountVector w(static_cast<std::size_t>(s), 0);
  w[0] = static_cast<std::int32_t>(n);
  for (std::int64_t k = n; k >= 2; --k) {
    const double xk = rng.exponential(static_cast<double>(pairs2(k)));
    const double mean = 2.0 / (static_cast<double>(k) * static_cast<double>(k - 1));
    for (int r = 0; r < s; ++r) {
      const std::int32_t count = w[static_cast<std::size_t>(r)];
      if (count == 0) continue;
      out.raw[static_cast<std::size_t>(r)] += count * xk;
      out.smoothed[static_cast<std::size_t>(r)] += count * mean;
    }
    const auto t = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(pairs2(k))));
    const auto [i, j] = decode_pair(t);
    const std::int32_t a = size[static_cast<std::size_t>(i)];
    const std::int32_t b = size[static_cast<std::size_t>(j)];
    if (a <= s) --w[static_cast<std::size_t>(a - 1)];
    if (b <= s) --w[static_cast<std::size_t>(b - 1)];
    if (a + b <= s) ++w[static_cast<std::size_t>(a + b - 1)];
    size[static_cast<std::size_t>(i)] = a + b;
    size[static_cast<std::size_t>(j)] = size[static_cast<std::size_t>(k - 1)];
  }
  return out;
}

FormationLevelLaw formation_level_law_check(std::int64_t n, std::int64_t k,
                                            std::uint64_t replicates, Rng& rng) {
  if (n < 3) throw std::invalid_argument("the pair-branch law needs at least three leaves");
  if (k < 2 || k > n - 1)
    throw std::invalid_argument("the observation level must satisfy 2 <= k <= n - 1");
  FormationLevelLaw law;
  law.n = n;
  law.k = k;
  law.replicates = replicates;
  law.counts.assign(static_cast<std::size_t>(n - k), 0);

  // While the two tagged leaves are separate they are still singletons: any
  // merge touching exactly one of them makes the exact pair unreachable, and
  // a merge touching both is the pair forming.
  for (std::uint64_t rep = 0; rep < replicates; ++rep) {
    std::int64_t pos1 = 0;
    std::int64_t pos2 = 1;
    std::int64_t pair_pos = -1;
    std::int64_t sigma = 0;
    bool formed = false;
    for (std::int64_t level = n; level >= 2; --level) {
      const auto t =
          static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(pairs2(level))));
      const auto [i, j] = decode_pair(t);
      const std::int64_t last = level - 1;
      if (!formed) {
        const bool hit1 = (pos1 == i || pos1 == j);
        const bool hit2 = (pos2 == i || pos2 == j);
        if (hit1 && hit2) {
          if (level - 1 < k) break;  // forms below the observation level
          sigma = level - 1;
          pair_pos = i;
          formed = true;
        } else if (hit1 || hit2) {
          break;
        } else {
          if (pos1 == last) pos1 = j;
          if (pos2 == last) pos2 = j;
        }
      } else {
        if (pair_pos == i || pair_pos == j) {
          if (level - 1 < k) {  // alive at level k: formed at sigma >= k, gone below k
            ++law.conditioned;
            ++law.counts[static_cast<std::size_t>(sigma - k)];
          }
          break;
        }
        if (pair_pos == last) pair_pos = j;
      }
    }
  }
  return law;
}

}  // namespace coalsim
