#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "coalsim/counts.hpp"
#include "coalsim/rng.hpp"

namespace coalsim {

// One realization of the merge sequence. Merge t (t = 0..n-2) happens while
// n - t blocks are alive and names positions (i, j), i < j, in the live-block
// array; the merged block replaces position i and the last block moves into
// position j (swap-remove), which every replay below follows.
struct MergeHistory {
  std::int64_t n = 0;
  std::vector<std::pair<std::int32_t, std::int32_t>> merges;

  // Validates the position pairs against the shrinking array.
  static MergeHistory from_merges(std::int64_t n,
                                  std::vector<std::pair<std::int32_t, std::int32_t>> merges);
};

// Uniform pair choice at every level: one below(C(k,2)) draw per level,
// k = n down to 2.
MergeHistory sample_merge_history(std::int64_t n, Rng& rng);

// Time spent with k blocks alive, for 2 <= k <= n: independent exponentials
// with rate C(k, 2).
struct CoalescentTimes {
  std::int64_t n = 0;
  std::vector<double> x;  // indexed by level; x[0] and x[1] unused (zero)

  double at(std::int64_t k) const { return x[static_cast<std::size_t>(k)]; }
};

// Draw order: one exponential per level, k = n down to 2.
CoalescentTimes sample_times(std::int64_t n, Rng& rng);

// Replays the merges and counts order-r blocks at every level for r <= s.
// Any s >= 1 is accepted; orders above n never occur and count zero.
BranchCountPath order_counts(const MergeHistory& history, int s);

// One branch of the tree: a block of `order` leaves that exists at levels
// formed_at >= k > ends_at, so its length is the sum of X_l over that
// window. The root block is not a branch and is not reported; a history
// yields exactly 2(n - 1) records.
struct BranchRecord {
  std::int32_t order = 0;
  std::int32_t formed_at = 0;
  std::int32_t ends_at = 0;
};

std::vector<BranchRecord> branch_records(const MergeHistory& history);

// Total branch length carrying each order r <= s:
//   raw[r-1]      = sum_k W_k(r) X_k        (the sampled times),
//   smoothed[r-1] = sum_k W_k(r) 2/(k(k-1)) (times replaced by their means).
struct OrderLengths {
  std::int64_t n = 0;
  int s = 0;
  std::vector<double> raw;
  std::vector<double> smoothed;
};

// exact_dual_route (the default) recomputes raw two independent ways, per
// branch record and per level, with the sampled doubles embedded exactly
// into scaled integers, and demands exact agreement (plus 1e-9 relative
// agreement of the double fast path). Throws std::logic_error on mismatch.
// `none` skips the cross-check for hot loops that only need the fast path.
enum class LengthValidation { none, exact_dual_route };

OrderLengths lengths_from_tree(const MergeHistory& history, const CoalescentTimes& times,
                               int s,
                               LengthValidation validation = LengthValidation::exact_dual_route);

// Streaming tree simulation: per level k = n..2 draws X_k, accumulates the
// length contributions of the current counts, then draws the merge pair.
// Distribution equals the sample+replay pipeline without materializing it.
OrderLengths simulate_order_lengths(std::int64_t n, int s, Rng& rng);

// Empirical law of the formation level of the branch supporting one fixed
// leaf pair, conditioned on that branch being alive at level k: replicate
// leaf-labelled simulations; counts[j] is how often the pair block formed at
// level k + j (levels k..n-1). Requires 2 <= k <= n - 1.
struct FormationLevelLaw {
  std::int64_t n = 0;
  std::int64_t k = 0;
  std::uint64_t replicates = 0;
  std::uint64_t conditioned = 0;  // replicates where the pair branch is alive at k
  std::vector<std::uint64_t> counts;
};

FormationLevelLaw formation_level_law_check(std::int64_t n, std::int64_t k,
                                            std::uint64_t replicates, Rng& rng);

}  // namespace coalsim
