#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "coalsim/rational.hpp"
#include "coalsim/rng.hpp"

using namespace coalsim;

TEST_CASE("splitmix64 matches the reference sequence") {
  // First outputs from state 0 of the reference implementation.
  std::uint64_t state = 0;
  CHECK(splitmix64(state) == 0xe220a8397b1dcdafULL);
  CHECK(splitmix64(state) == 0x6e789e6aa1b965f4ULL);
  CHECK(splitmix64(state) == 0x06c45d188009454fULL);
}

TEST_CASE("streams are reproducible and seed-sensitive") {
  Rng a(42), b(42), c(43);
  bool all_equal = true;
  bool any_diff_c = false;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t x = a.u64();
    all_equal = all_equal && (x == b.u64());
    any_diff_c = any_diff_c || (x != c.u64());
  }
  CHECK(all_equal);
  CHECK(any_diff_c);
}

TEST_CASE("below is in range and uniform on a small bound") {
  Rng rng(7);
  CHECK(rng.below(1) == 0);
  CHECK_THROWS_AS(rng.below(0), std::invalid_argument);

  const std::uint64_t bound = 6;
  const int reps = 120000;
  std::vector<int> hits(bound, 0);
  for (int i = 0; i < reps; ++i) ++hits[rng.below(bound)];
  // Each cell is Binomial(reps, 1/6): sd ~ sqrt(reps * 5/36) ~ 129.
  for (std::uint64_t v = 0; v < bound; ++v)
    CHECK(std::abs(hits[v] - reps / 6) < 700);

  // Huge bounds stay in range.
  const std::uint64_t big = (std::uint64_t{1} << 63) + 12345;
  for (int i = 0; i < 100; ++i) CHECK(rng.below(big) < big);
}

TEST_CASE("below_big matches below for small bounds and covers big ones") {
  Rng a(99), b(99);
  for (int i = 0; i < 200; ++i) {
    const BigInt x = a.below_big(BigInt(1000));
    CHECK(x == BigInt(b.below(1000)));
  }

  const BigInt bound = BigInt(1) << 200;
  Rng rng(5);
  double mean_frac = 0.0;
  const int reps = 4000;
  for (int i = 0; i < reps; ++i) {
    const BigInt v = rng.below_big(bound);
    CHECK(v >= 0);
    CHECK(v < bound);
    mean_frac += to_double(Rational(v, bound));
  }
  mean_frac /= reps;
  // Uniform(0,1) mean 1/2, sd/sqrt(reps) ~ 0.0046.
  CHECK(std::abs(mean_frac - 0.5) < 0.02);

  CHECK_THROWS_AS(rng.below_big(BigInt(0)), std::invalid_argument);
}

TEST_CASE("unit_pos is in (0, 1] with mean 1/2") {
  Rng rng(11);
  double sum = 0.0;
  const int reps = 200000;
  for (int i = 0; i < reps; ++i) {
    const double u = rng.unit_pos();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / reps - 0.5) < 0.005);
}

TEST_CASE("exponential has the requested mean") {
  Rng rng(13);
  const double rate = 45.0;  // the level-10 holding rate C(10,2)
  double sum = 0.0, sumsq = 0.0;
  const int reps = 200000;
  for (int i = 0; i < reps; ++i) {
    const double x = rng.exponential(rate);
    CHECK(x > 0.0);
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / reps;
  const double var = sumsq / reps - mean * mean;
  // mean 1/45 with sd (1/45)/sqrt(reps).
  CHECK(std::abs(mean - 1.0 / rate) < 4.0 / (rate * std::sqrt(double(reps))));
  CHECK(var == doctest::Approx(1.0 / (rate * rate)).epsilon(0.05));
}

TEST_CASE("poisson handles zero, small and chunked means") {
  Rng rng(17);
  for (int i = 0; i < 50; ++i) CHECK(rng.poisson(0.0) == 0);

  for (const double mean : {0.8, 300.0}) {
    double sum = 0.0, sumsq = 0.0;
    const int reps = 100000;
    for (int i = 0; i < reps; ++i) {
      const auto x = static_cast<double>(rng.poisson(mean));
      CHECK(x >= 0);
      sum += x;
      sumsq += x * x;
    }
    const double m = sum / reps;
    const double v = sumsq / reps - m * m;
    CHECK(std::abs(m - mean) < 4.0 * std::sqrt(mean / reps));
    CHECK(v == doctest::Approx(mean).epsilon(0.05));
  }
}

TEST_CASE("replicate streams are pure and decorrelated") {
  Rng a = replicate_rng(1234, 7);
  Rng b = replicate_rng(1234, 7);
  Rng c = replicate_rng(1234, 8);
  bool same = true, differs = false;
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t x = a.u64();
    same = same && (x == b.u64());
    differs = differs || (x != c.u64());
  }
  CHECK(same);
  CHECK(differs);
}
