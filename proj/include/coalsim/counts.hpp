#pragma once

#include <cstdint>
#include <vector>

namespace coalsim {

// Tracked block counts (w_1, ..., w_s): w_r blocks of order r.
using CountVector = std::vector<std::int32_t>;

// Per-level tracked counts of one realization, level n down to level 1.
// W_k(r) is the number of order-r blocks while k blocks are alive.
struct BranchCountPath {
  std::int64_t n = 0;
  int s = 0;
  std::vector<std::int32_t> counts;  // level-major, level n first

  std::int32_t w(std::int64_t level, int order) const {
    return counts[static_cast<std::size_t>(n - level) * s + (order - 1)];
  }
};

}  // namespace coalsim
