#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "coalsim/coupling.hpp"
#include "coalsim/rational.hpp"
#include "coalsim/rng.hpp"

using namespace coalsim;

namespace {

BigInt law_num(const JumpLaw& law, const Jump& z) {
  for (const auto& [jump, num] : law.entries)
    if (jump == z) return num;
  return BigInt(0);
}

Jump make_jump(std::initializer_list<int> deltas) {
  Jump z;
  int i = 0;
  for (const int d : deltas) z.d[static_cast<std::size_t>(i++)] = static_cast<std::int8_t>(d);
  return z;
}

void for_each_state(int s, int cap, CountVector& v,
                    const std::function<void(const CountVector&)>& visit, int pos = 0) {
  if (pos == s) {
    visit(v);
    return;
  }
  int used = 0;
  for (int i = 0; i < pos; ++i) used += v[static_cast<std::size_t>(i)];
  for (int w = 0; w + used <= cap; ++w) {
    v[static_cast<std::size_t>(pos)] = w;
    for_each_state(s, cap, v, visit, pos + 1);
  }
  v[static_cast<std::size_t>(pos)] = 0;
}

// All vectors of length s with each component in [0, cap] (no sum bound;
// external chains are only bounded individually).
void for_each_box(int s, int cap, CountVector& v,
                  const std::function<void(const CountVector&)>& visit, int pos = 0) {
  if (pos == s) {
    visit(v);
    return;
  }
  for (int w = 0; w <= cap; ++w) {
    v[static_cast<std::size_t>(pos)] = w;
    for_each_box(s, cap, v, visit, pos + 1);
  }
  v[static_cast<std::size_t>(pos)] = 0;
}

void check_decomposition(std::int64_t k, const CountVector& v, const CountVector& vt) {
  const CouplingDecomposition coupling = optimal_coupling(k, v, vt);
  const int s = static_cast<int>(v.size());
  const JumpLaw q = transition_law(k, v);
  const JumpLaw qt = product_external_law(k, vt);

  const BigInt pair_count = q.denom;  // C(k,2)
  BigInt denom = 1;
  for (int i = 0; i < s; ++i) denom *= pair_count;
  const BigInt scale = denom / pair_count;

  REQUIRE(coupling.denom == denom);
  REQUIRE(coupling.same_num >= 0);
  REQUIRE(coupling.same_num <= denom);
  CHECK(coupling.p() + coupling.mismatch_probability() == Rational(1));

  const BigInt rest = denom - coupling.same_num;
  CHECK(coupling.gamma_I.denom == coupling.same_num);
  CHECK(coupling.gamma_II.denom == rest);
  CHECK(coupling.gamma_III.denom == rest);

  // Each split law is a law: positive masses summing to its denominator.
  for (const JumpLaw* law : {&coupling.gamma_I, &coupling.gamma_II, &coupling.gamma_III}) {
    BigInt sum = 0;
    for (const auto& [z, num] : law->entries) {
      (void)z;
      CHECK(num > 0);
      CHECK(num <= law->denom);
      sum += num;
    }
    CHECK(sum == law->denom);
    if (law->denom == 0) CHECK(law->entries.empty());
  }

  // gamma_II and gamma_III never share a jump.
  for (const auto& [z, num] : coupling.gamma_II.entries) {
    (void)num;
    CHECK(law_num(coupling.gamma_III, z) == 0);
  }

  // Reconstruction of both marginals, mass for mass over denom.
  std::map<Jump, BigInt> support;
  for (const auto& [z, num] : q.entries) support[z] = num * scale;
  for (const auto& [z, num] : qt.entries) support.emplace(z, 0), (void)num;
  for (const auto& [z, target] : support) {
    CHECK(law_num(coupling.gamma_I, z) + law_num(coupling.gamma_II, z) == target);
    CHECK(law_num(coupling.gamma_I, z) + law_num(coupling.gamma_III, z) == law_num(qt, z));
  }

  // Mismatch probability is exactly the total variation distance.
  CHECK(coupling.mismatch_probability() == tv_distance(q, qt));
}

}  // namespace

TEST_CASE("product law pinned examples and consistency with s = 1") {
  for (std::int64_t k = 2; k <= 20; ++k) {
    for (std::int64_t w = 0; w <= std::min<std::int64_t>(k, 6); ++w) {
      const JumpLaw prod = product_external_law(k, {static_cast<std::int32_t>(w)});
      const JumpLaw ext = external_transition_law(k, w);
      CHECK(prod.denom == ext.denom);
      for (const auto& [z, num] : ext.entries) CHECK(law_num(prod, z) == num);
    }
  }

  const JumpLaw law = product_external_law(4, {2, 2});
  CHECK(law.denom == 36);
  CHECK(law.entries.size() == 9);
  CHECK(law.probability(make_jump({0, 0})) == Rational(1, 36));
  CHECK(law.probability(make_jump({-1, -1})) == Rational(16, 36));
  CHECK(law.probability(make_jump({-2, -2})) == Rational(1, 36));
  CHECK(law.entries.front().first == make_jump({0, 0}));   // lexicographic order
  CHECK(law.entries.back().first == make_jump({-2, -2}));
  CHECK(law.total() == Rational(1));

  // A zero component only ever holds still.
  const JumpLaw frozen = product_external_law(5, {0, 3});
  for (const auto& [z, num] : frozen.entries) {
    (void)num;
    CHECK(z.d[0] == 0);
  }
}

TEST_CASE("total variation distance, both formulas") {
  const JumpLaw a = external_transition_law(10, 3);
  const JumpLaw b = external_transition_law(10, 5);
  CHECK(tv_distance(a, a) == Rational(0));
  CHECK(tv_distance(a, b) == tv_distance(b, a));

  // Half L1 must equal the positive-part mass.
  Rational positive_part = 0;
  for (const auto& [z, num] : a.entries) {
    const Rational diff = Rational(num, a.denom) - b.probability(z);
    if (diff > 0) positive_part += diff;
  }
  CHECK(tv_distance(a, b) == positive_part);

  // Disjoint laws are at distance one.
  const JumpLaw everyone = external_transition_law(6, 6);  // forces -2
  const JumpLaw nobody = external_transition_law(6, 0);    // forces 0
  CHECK(tv_distance(everyone, nobody) == Rational(1));
}

TEST_CASE("coupling split identities over an exhaustive grid") {
  for (const std::int64_t k : {2, 3, 5, 8, 12}) {
    for (int s = 1; s <= 2; ++s) {
      std::vector<CountVector> joints, externals;
      CountVector buffer(static_cast<std::size_t>(s), 0);
      for_each_state(s, static_cast<int>(std::min<std::int64_t>(k, 4)), buffer,
                     [&](const CountVector& state) { joints.push_back(state); });
      for_each_box(s, static_cast<int>(std::min<std::int64_t>(k, 4)), buffer,
                   [&](const CountVector& state) { externals.push_back(state); });
      for (const CountVector& v : joints)
        for (const CountVector& vt : externals) check_decomposition(k, v, vt);
    }
  }
  // A taste of s = 3.
  check_decomposition(4, {1, 1, 0}, {2, 0, 3});
  check_decomposition(3, {3, 0, 0}, {1, 1, 1});
}

TEST_CASE("coupling validation") {
  CHECK_THROWS_AS(optimal_coupling(1, {1}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(optimal_coupling(4, {5}, {1}), std::invalid_argument);   // sum > k
  CHECK_THROWS_AS(optimal_coupling(4, {2}, {5}), std::invalid_argument);   // vt > k
  CHECK_THROWS_AS(optimal_coupling(4, {2}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(optimal_coupling(4, {-1}, {1}), std::invalid_argument);
}

TEST_CASE("decode enumeration reproduces both marginals exactly") {
  struct Case {
    std::int64_t k;
    CountVector v, vt;
  };
  const std::vector<Case> cases = {
      {2, {2}, {2}},           // p = 1: identical forced laws
      {3, {3}, {0}},           // p = 0: disjoint forced laws
      {3, {1}, {2}},
      {4, {2, 1}, {1, 2}},
      {4, {2, 0}, {2, 2}},
      {3, {1, 1}, {1, 1}},
      {3, {1, 0, 1}, {1, 1, 1}},
  };
  for (const Case& c : cases) {
    const CouplingDecomposition coupling = optimal_coupling(c.k, c.v, c.vt);
    const JumpLaw q = transition_law(c.k, c.v);
    const JumpLaw qt = product_external_law(c.k, c.vt);
    const BigInt scale = coupling.denom / q.denom;

    const BigInt rest = coupling.denom - coupling.same_num;
    const BigInt u2_range = rest > 0 ? rest : BigInt(1);
    std::map<Jump, BigInt> dv_hits, dvt_hits;
    BigInt matched_hits = 0;
    for (BigInt u = 0; u < coupling.denom; ++u) {
      if (u < coupling.same_num) {
        // u2 is ignored on the matched branch; weight the tally instead.
        const CoupledJumps jumps = coupled_jumps_for_uniforms(coupling, u, BigInt(0));
        CHECK(jumps.matched);
        CHECK(jumps.dv == jumps.dv_tilde);
        dv_hits[jumps.dv] += u2_range;
        dvt_hits[jumps.dv_tilde] += u2_range;
        matched_hits += u2_range;
      } else {
        for (BigInt u2 = 0; u2 < u2_range; ++u2) {
          const CoupledJumps jumps = coupled_jumps_for_uniforms(coupling, u, u2);
          CHECK(!jumps.matched);
          dv_hits[jumps.dv] += 1;
          dvt_hits[jumps.dv_tilde] += 1;
        }
      }
    }
    for (const auto& [z, num] : q.entries) CHECK(dv_hits[z] == num * scale * u2_range);
    for (const auto& [z, num] : qt.entries) CHECK(dvt_hits[z] == num * u2_range);
    CHECK(matched_hits == coupling.same_num * u2_range);
    BigInt dv_total = 0;
    for (const auto& [z, hits] : dv_hits) {
      (void)z;
      dv_total += hits;
    }
    CHECK(dv_total == coupling.denom * u2_range);

    CHECK_THROWS_AS(coupled_jumps_for_uniforms(coupling, coupling.denom, BigInt(0)),
                    std::invalid_argument);
  }
}

TEST_CASE("sampling a step agrees with the decomposition decode draw for draw") {
  // coupled_step must behave as if it drew below_big(denom), then on the
  // mismatched branch below_big(denom - same), and decoded both against the
  // decomposition. Forking the engine and doing exactly that by hand pins
  // the internal sampling lanes to one stream contract, at small levels,
  // at levels whose denominators exceed 64 bits, and at s = 4 (beyond the
  // stack-law cap). Equal uniforms must also yield equal jumps.
  const struct {
    std::int64_t k;
    CountVector v, vt;
  } states[] = {
      {2, {1}, {2}},
      {9, {3, 2}, {4, 1}},
      {40, {5, 1, 2}, {5, 1, 2}},
      {70000, {30000, 200}, {29000, 500}},
      {2500, {100, 3, 0, 7}, {90, 5, 2, 2}},
  };
  for (const auto& st : states) {
    Rng rng(4242);
    Rng fork = rng;
    const CouplingDecomposition coupling = optimal_coupling(st.k, st.v, st.vt);
    for (int step = 0; step < 200; ++step) {
      const BigInt u = fork.below_big(coupling.denom);
      BigInt u2(0);
      if (u >= coupling.same_num) u2 = fork.below_big(coupling.denom - coupling.same_num);
      const CoupledJumps expected = coupled_jumps_for_uniforms(coupling, u, u2);
      CoupledJumps got;
      coupled_step({st.k, st.v, st.vt}, rng, &got);
      REQUIRE(got.matched == expected.matched);
      REQUIRE(got.dv == expected.dv);
      REQUIRE(got.dv_tilde == expected.dv_tilde);
    }
  }
}

TEST_CASE("a matched pair of external chains never separates") {
  // With s = 1 the joint chain is itself an external chain, so equal states
  // give identical laws, zero mismatch and a shared jump forever.
  Rng rng(37);
  CoupledState state{40, {5}, {5}};
  while (state.level > 1) {
    const CouplingDecomposition coupling =
        optimal_coupling(state.level, state.v, state.v_tilde);
    CHECK(coupling.mismatch_probability() == Rational(0));
    CoupledJumps jumps;
    state = coupled_step(state, rng, &jumps);
    CHECK(jumps.matched);
    CHECK(state.v == state.v_tilde);
  }
}

TEST_CASE("coupled steps preserve both marginals statistically") {
  Rng rng(101);
  const std::int64_t k = 12;
  const CountVector v = {5, 2}, vt = {4, 3};
  const CouplingDecomposition coupling = optimal_coupling(k, v, vt);
  const JumpLaw q = transition_law(k, v);
  const JumpLaw qt = product_external_law(k, vt);

  const int reps = 200000;
  int matched = 0;
  std::map<Jump, int> dv_hits, dvt_hits;
  for (int i = 0; i < reps; ++i) {
    CoupledJumps jumps;
    const CoupledState next = coupled_step({k, v, vt}, rng, &jumps);
    (void)next;
    matched += jumps.matched ? 1 : 0;
    ++dv_hits[jumps.dv];
    ++dvt_hits[jumps.dv_tilde];
  }
  auto close = [&](double frequency, const Rational& prob) {
    const double p = to_double(prob);
    return std::abs(frequency - p) < 4.0 * std::sqrt(p * (1 - p) / reps) + 1e-9;
  };
  CHECK(close(static_cast<double>(matched) / reps, coupling.p()));
  for (const auto& [z, num] : q.entries)
    CHECK(close(static_cast<double>(dv_hits[z]) / reps, Rational(num, q.denom)));
  for (const auto& [z, num] : qt.entries)
    CHECK(close(static_cast<double>(dvt_hits[z]) / reps, Rational(num, qt.denom)));
}

TEST_CASE("coupled step validates the joint state") {
  Rng rng(1);
  CHECK_THROWS_AS(coupled_step({3, {1}, {4}}, rng), std::invalid_argument);
  CHECK_THROWS_AS(coupled_step({1, {1}, {1}}, rng), std::invalid_argument);
}

TEST_CASE("big denominators take the exact path") {
  // C(k,2)^s beyond 63 bits: the split must still satisfy every identity.
  check_decomposition(200000, {3, 1}, {2, 2});
  check_decomposition(3000, {1, 2, 0, 1}, {4, 0, 2, 1});
}

TEST_CASE("default coupling window") {
  const RegionConfig r3 = default_region(1000);
  CHECK(r3.a_n == 33);
  CHECK(r3.b_n == 32);
  const RegionConfig r4 = default_region(10000);
  CHECK(r4.a_n == 117);
  CHECK(r4.b_n == 100);
  const RegionConfig r5 = default_region(100000);
  CHECK(r5.a_n == 754);
  CHECK(r5.b_n == 317);
  for (std::int64_t n = 3; n <= 4000; ++n) {
    const RegionConfig region = default_region(n);
    CHECK(region.b_n >= 1);
    CHECK(region.b_n < region.a_n);
    CHECK(region.a_n <= n);
    CHECK(region.b_n * region.b_n >= n);
    CHECK((region.b_n - 1) * (region.b_n - 1) < n);
  }
  CHECK_THROWS_AS(default_region(2), std::invalid_argument);
}

TEST_CASE("bound shapes are the advertised arithmetic") {
  CHECK(mismatch_rate_bound_shape(100, 10, 5) ==
        doctest::Approx(5.0 / 100 + 50.0 / 10000 + 1.0 / 5));
  CHECK(mean_abs_diff_bound_shape(100, 10, 5) ==
        doctest::Approx(25.0 / 100 + 250.0 / 10000 + 1.0));
  CHECK(variance_diff_bound_shape(100, 10, 5) ==
        doctest::Approx(25.0 / 100 + 250.0 / 10000 + 1.0 + 125.0 / 1000));
}

TEST_CASE("one-step window from a deterministic start") {
  // Region {12, 11} couples a single transition out of the fully known
  // level-12 state: the joint chain must merge two externals into a pair
  // while every external chain drops by two.
  const CoupledRegionResult result = simulate_coupled_region(12, {12, 11}, 2, 400, 99);
  const CouplingDiagnostics& diag = result.diagnostics;
  CHECK(diag.rows() == 1);
  CHECK(diag.level_of_row(0) == 11);
  CHECK(diag.mismatch_counts[0] == 0);    // both sides move order 1 by -2
  CHECK(diag.mismatch_counts[1] == 400);  // +1 against -2 on order 2
  CHECK(diag.mismatch_rate(0, 1) == 0.0);
  CHECK(diag.mismatch_rate(0, 2) == 1.0);

  // Arrival counts are deterministic too: (10, 1) against (10, 10).
  CHECK(diag.abs_diff_sums[0] == 0);
  CHECK(diag.diff_sums[1] == -9 * 400);
  CHECK(diag.abs_diff_sums[1] == 9 * 400);
  CHECK(diag.sq_diff_sums[1] == 81 * 400);
  CHECK(diag.mean_abs_diff(0, 2) == doctest::Approx(9.0));
  CHECK(diag.var_diff(0, 2) == doctest::Approx(0.0));

  // Windowed smoothed lengths collect only level 12.
  for (std::uint64_t rep = 0; rep < 400; ++rep) {
    CHECK(result.lengths[rep * 2 + 0] == doctest::Approx(2.0 / 11).epsilon(1e-14));
    CHECK(result.lengths[rep * 2 + 1] == 0.0);
    CHECK(result.lengths_tilde[rep * 2 + 0] == doctest::Approx(2.0 / 11).epsilon(1e-14));
    CHECK(result.lengths_tilde[rep * 2 + 1] == doctest::Approx(2.0 / 11).epsilon(1e-14));
  }
}

TEST_CASE("window experiment is invariant to the worker count") {
  const CoupledRegionResult one = simulate_coupled_region(300, default_region(300), 2, 200, 7, 1);
  const CoupledRegionResult three = simulate_coupled_region(300, default_region(300), 2, 200, 7, 3);
  CHECK(one.diagnostics.mismatch_counts == three.diagnostics.mismatch_counts);
  CHECK(one.diagnostics.abs_diff_sums == three.diagnostics.abs_diff_sums);
  CHECK(one.diagnostics.diff_sums == three.diagnostics.diff_sums);
  CHECK(one.diagnostics.sq_diff_sums == three.diagnostics.sq_diff_sums);
  CHECK(one.lengths == three.lengths);
  CHECK(one.lengths_tilde == three.lengths_tilde);
}

TEST_CASE("window experiment validates its inputs") {
  CHECK_THROWS_AS(simulate_coupled_region(10, {11, 5}, 1, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(simulate_coupled_region(10, {5, 5}, 1, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(simulate_coupled_region(10, {5, 2}, 0, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(simulate_coupled_region(10, {5, 2}, 1, 0, 0), std::invalid_argument);
}

TEST_CASE("whole-tree gap summary") {
  const LengthGapSummary one = coupled_length_gap(120, 2, 300, 11, 1);
  const LengthGapSummary four = coupled_length_gap(120, 2, 300, 11, 4);
  CHECK(one.median_abs_gap == four.median_abs_gap);
  CHECK(one.sd_gap == four.sd_gap);
  CHECK(one.median_abs_gap.size() == 2);
  for (const double m : one.median_abs_gap) {
    CHECK(m >= 0.0);
    CHECK(std::isfinite(m));
  }
  for (const double sd : one.sd_gap) {
    CHECK(sd >= 0.0);
    CHECK(std::isfinite(sd));
  }
  CHECK_THROWS_AS(coupled_length_gap(99, 2, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(coupled_length_gap(120, 2, 1, 1), std::invalid_argument);
}
