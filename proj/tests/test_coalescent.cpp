#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <vector>

#include "coalsim/coalescent.hpp"
#include "coalsim/moments.hpp"
#include "coalsim/rng.hpp"
#include "oracle_labelled.hpp"

using namespace coalsim;

TEST_CASE("merge history sampling and validation") {
  Rng rng(3);
  const MergeHistory two = sample_merge_history(2, rng);
  CHECK(two.merges.size() == 1);
  CHECK(two.merges[0] == std::pair<std::int32_t, std::int32_t>{0, 1});

  std::map<std::pair<std::int32_t, std::int32_t>, int> first;
  const int reps = 90000;
  for (int i = 0; i < reps; ++i) ++first[sample_merge_history(3, rng).merges[0]];
  CHECK(first.size() == 3);
  for (const auto& [pair, count] : first) {
    (void)pair;
    CHECK(std::abs(count - reps / 3) < 600);  // sd ~ 141
  }

  CHECK_THROWS_AS(sample_merge_history(1, rng), std::invalid_argument);
  CHECK_THROWS_AS(MergeHistory::from_merges(3, {{0, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(MergeHistory::from_merges(3, {{1, 1}, {0, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(MergeHistory::from_merges(3, {{0, 3}, {0, 1}}), std::invalid_argument);
  CHECK_NOTHROW(MergeHistory::from_merges(3, {{0, 2}, {0, 1}}));
}

TEST_CASE("holding times have the coalescent rates") {
  Rng rng(8);
  const std::int64_t n = 10;
  double sum2 = 0.0, sum4 = 0.0, sum10 = 0.0;
  const int reps = 200000;
  for (int i = 0; i < reps; ++i) {
    const CoalescentTimes times = sample_times(n, rng);
    sum2 += times.at(2);
    sum4 += times.at(4);
    sum10 += times.at(10);
  }
  const double root_r = std::sqrt(static_cast<double>(reps));
  CHECK(std::abs(sum2 / reps - 1.0) < 4.0 / root_r);
  CHECK(std::abs(sum4 / reps - 1.0 / 6) < 4.0 / (6 * root_r));
  CHECK(std::abs(sum10 / reps - 1.0 / 45) < 4.0 / (45 * root_r));
}

TEST_CASE("order counting on a hand-traced history") {
  // Leaves 0..3: merge (0,1), then (2,3), then the two pairs. With the
  // swap-remove convention the second merge names positions (1, 2).
  const MergeHistory history = MergeHistory::from_merges(4, {{0, 1}, {1, 2}, {0, 1}});
  const BranchCountPath path = order_counts(history, 4);
  CHECK(path.w(4, 1) == 4);
  CHECK(path.w(4, 2) == 0);
  CHECK(path.w(3, 1) == 2);
  CHECK(path.w(3, 2) == 1);
  CHECK(path.w(3, 3) == 0);
  CHECK(path.w(2, 1) == 0);
  CHECK(path.w(2, 2) == 2);
  CHECK(path.w(2, 3) == 0);
  CHECK(path.w(1, 4) == 1);
  for (int r = 1; r <= 3; ++r) CHECK(path.w(1, r) == 0);
}

TEST_CASE("order counting on the two-leaf tree") {
  const MergeHistory history = MergeHistory::from_merges(2, {{0, 1}});
  const BranchCountPath path = order_counts(history, 2);
  CHECK(path.w(2, 1) == 2);
  CHECK(path.w(1, 1) == 0);
  CHECK(path.w(1, 2) == 1);
}

TEST_CASE("order counting identities on random histories") {
  Rng rng(21);
  for (int rep = 0; rep < 30; ++rep) {
    const std::int64_t n = 2 + static_cast<std::int64_t>(rng.below(29));
    const MergeHistory history = sample_merge_history(n, rng);
    const int s = static_cast<int>(std::min<std::int64_t>(n, 8));
    const BranchCountPath path = order_counts(history, s);
    for (std::int64_t k = n; k >= 1; --k) {
      std::int64_t blocks = 0, mass = 0;
      for (int r = 1; r <= s; ++r) {
        CHECK(path.w(k, r) >= 0);
        blocks += path.w(k, r);
        mass += r * path.w(k, r);
      }
      CHECK(blocks <= k);
      CHECK(mass <= n);
      if (n <= 8) {
        CHECK(blocks == k);  // every block tracked when s covers all orders
      }
    }
  }
}

TEST_CASE("order counting matches the labelled recount on every history") {
  for (std::int64_t n = 2; n <= 5; ++n) {
    testing::for_each_history(n, [&](const testing::LabelledHistory& hist) {
      const MergeHistory history = MergeHistory::from_merges(n, hist.merges);
      const int s = static_cast<int>(n);
      const BranchCountPath path = order_counts(history, s);
      for (std::size_t t = 0; t < hist.levels.size(); ++t) {
        const std::int64_t level = n - static_cast<std::int64_t>(t);
        const auto expected = testing::order_histogram(hist.levels[t], n);
        for (int r = 1; r <= s; ++r)
          CHECK(path.w(level, r) == expected[static_cast<std::size_t>(r)]);
      }
    });
  }
}

TEST_CASE("branch records match bitmask lifetimes on every history") {
  for (std::int64_t n = 2; n <= 5; ++n) {
    testing::for_each_history(n, [&](const testing::LabelledHistory& hist) {
      const MergeHistory history = MergeHistory::from_merges(n, hist.merges);
      const std::vector<BranchRecord> records = branch_records(history);
      CHECK(records.size() == static_cast<std::size_t>(2 * (n - 1)));
      std::vector<testing::LabelledRecord> got;
      for (const BranchRecord& rec : records) {
        CHECK(rec.formed_at <= n);
        CHECK(rec.formed_at > rec.ends_at);
        CHECK(rec.ends_at >= 1);
        got.push_back({rec.order, rec.formed_at, rec.ends_at});
      }
      std::sort(got.begin(), got.end());
      CHECK(got == testing::records_of(hist));
    });
  }
}

TEST_CASE("length accounting on the two-leaf tree") {
  Rng rng(4);
  const MergeHistory history = sample_merge_history(2, rng);
  const CoalescentTimes times = sample_times(2, rng);
  const OrderLengths lengths = lengths_from_tree(history, times, 2);
  CHECK(lengths.raw[0] == doctest::Approx(2.0 * times.at(2)).epsilon(1e-14));
  CHECK(lengths.smoothed[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(lengths.raw[1] == 0.0);
  CHECK(lengths.smoothed[1] == 0.0);
}

TEST_CASE("order lengths sum to the total tree length") {
  Rng rng(33);
  for (int rep = 0; rep < 100; ++rep) {
    const std::int64_t n = 2 + static_cast<std::int64_t>(rng.below(7));
    const MergeHistory history = sample_merge_history(n, rng);
    const CoalescentTimes times = sample_times(n, rng);
    const int s = static_cast<int>(n) - 1;
    const OrderLengths lengths = lengths_from_tree(history, times, s);

    double raw_total = 0.0, smooth_total = 0.0;
    for (int r = 0; r < s; ++r) {
      raw_total += lengths.raw[static_cast<std::size_t>(r)];
      smooth_total += lengths.smoothed[static_cast<std::size_t>(r)];
    }
    double expected_raw = 0.0, expected_smooth = 0.0;
    for (std::int64_t k = 2; k <= n; ++k) {
      expected_raw += static_cast<double>(k) * times.at(k);
      expected_smooth += 2.0 / static_cast<double>(k - 1);
    }
    CHECK(raw_total == doctest::Approx(expected_raw).epsilon(1e-12));
    CHECK(smooth_total == doctest::Approx(expected_smooth).epsilon(1e-12));
  }
}

TEST_CASE("length accounting rejects mismatched inputs") {
  Rng rng(6);
  const MergeHistory history = sample_merge_history(5, rng);
  const CoalescentTimes times = sample_times(4, rng);
  CHECK_THROWS_AS(lengths_from_tree(history, times, 2), std::invalid_argument);
}

TEST_CASE("streaming simulation is deterministic with sane means") {
  Rng a(91), b(91);
  for (int rep = 0; rep < 5; ++rep) {
    const OrderLengths x = simulate_order_lengths(30, 3, a);
    const OrderLengths y = simulate_order_lengths(30, 3, b);
    CHECK(x.raw == y.raw);
    CHECK(x.smoothed == y.smoothed);
  }

  Rng rng(14);
  const int reps = 5000;
  double sum1 = 0.0, sum2 = 0.0;
  for (int i = 0; i < reps; ++i) {
    const OrderLengths lengths = simulate_order_lengths(50, 2, rng);
    sum1 += lengths.raw[0];
    sum2 += lengths.raw[1];
  }
  // E = 2/r; sd per draw is about 0.56 and 0.5 at n = 50.
  CHECK(std::abs(sum1 / reps - 2.0) < 0.04);
  CHECK(std::abs(sum2 / reps - 1.0) < 0.04);
}

TEST_CASE("pair branch formation level is uniform") {
  Rng rng(10);
  const FormationLevelLaw all = formation_level_law_check(3, 2, 2000, rng);
  CHECK(all.replicates == 2000);
  CHECK(all.counts[0] == all.conditioned);  // only level 2 can form the pair

  const FormationLevelLaw law = formation_level_law_check(5, 2, 100000, rng);
  CHECK(law.counts.size() == 3);  // formation levels 2, 3, 4
  std::uint64_t total = 0;
  for (const std::uint64_t c : law.counts) total += c;
  CHECK(total == law.conditioned);
  for (const std::uint64_t c : law.counts) {
    const double diff = static_cast<double>(c) - static_cast<double>(law.conditioned) / 3;
    CHECK(std::abs(diff) < 4.0 * std::sqrt(static_cast<double>(law.conditioned) * 2.0 / 9));
  }

  // Chi-square uniformity at the 0.01 level, 2 degrees of freedom.
  const FormationLevelLaw six = formation_level_law_check(6, 3, 100000, rng);
  const double expected = static_cast<double>(six.conditioned) / 3;
  double chi2 = 0.0;
  for (const std::uint64_t c : six.counts) {
    const double d = static_cast<double>(c) - expected;
    chi2 += d * d / expected;
  }
  CHECK(chi2 < 9.21);

  CHECK_THROWS_AS(formation_level_law_check(5, 1, 10, rng), std::invalid_argument);
  CHECK_THROWS_AS(formation_level_law_check(5, 5, 10, rng), std::invalid_argument);
}

TEST_CASE("formation level law is exactly uniform under enumeration") {
  // The branch subtending exactly the leaf pair {0, 1} (bitmask 3),
  // conditioned on being alive at level k, formed at a level uniform on
  // {k, ..., n-1}: exact equality of enumeration counts, independent of the
  // library. A block merely containing the pair obeys a different law.
  for (std::int64_t n = 4; n <= 6; ++n) {
    for (std::int64_t k = 2; k <= n - 1; ++k) {
      std::map<std::int64_t, std::int64_t> formed_counts;
      testing::for_each_history(n, [&](const testing::LabelledHistory& hist) {
        std::int64_t formed = 0, ends = 0;
        for (std::size_t t = 0; t < hist.levels.size(); ++t) {
          bool present = false;
          for (const std::uint64_t b : hist.levels[t])
            if (b == 3u) present = true;
          if (present) {
            if (formed == 0) formed = n - static_cast<std::int64_t>(t);
            ends = n - static_cast<std::int64_t>(t) - 1;
          }
        }
        if (formed >= k && k > ends) ++formed_counts[formed];
      });
      const std::int64_t reference = formed_counts[k];
      CHECK(reference > 0);
      for (std::int64_t level = k; level <= n - 1; ++level)
        CHECK(formed_counts[level] == reference);
    }
  }
}
