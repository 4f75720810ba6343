#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace coalsim {

// Runs fn(first, last, worker) over a partition of [0, total) on `workers`
// threads; inline on the calling thread when workers <= 1. The first
// exception thrown by a worker is rethrown after all join. Callers must
// derive per-item randomness and output slots from the item index alone,
// so that results do not depend on the partition.
inline void run_partitioned(std::uint64_t total, int workers,
                            const std::function<void(std::uint64_t, std::uint64_t, int)>& fn) {
  if (workers <= 1 || total <= 1) {
    fn(0, total, 0);
    return;
  }
  const int used = static_cast<std::uint64_t>(workers) > total ? static_cast<int>(total) : workers;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(used));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(used));
  const std::uint64_t base = total / static_cast<std::uint64_t>(used);
  const std::uint64_t extra = total % static_cast<std::uint64_t>(used);
  std::uint64_t begin = 0;
  for (int i = 0; i < used; ++i) {
    const std::uint64_t end = begin + base + (static_cast<std::uint64_t>(i) < extra ? 1 : 0);
    threads.emplace_back([&fn, &errors, begin, end, i] {
      try {
        fn(begin, end, i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    });
    begin = end;
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace coalsim
