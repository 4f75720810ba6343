#pragma once

#include <cstdint>
#include <random>

#include "coalsim/rational.hpp"

namespace coalsim {

// One splitmix64 step; used to whiten seed material.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic random stream.
//
// The engine is std::mt19937_64, whose output sequence is pinned by the
// standard, and every draw below decodes raw 64-bit words in-house, so a
// given seed yields the same stream on every platform and standard library.
// std::*_distribution is deliberately avoided (implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t u64() { return engine_(); }

  // Uniform on {0, 1, ..., bound - 1}; bound >= 1. Lemire multiply-shift
  // with rejection, exactly uniform.
  std::uint64_t below(std::uint64_t bound);

  // Uniform on {0, ..., bound - 1} for big bounds; bound >= 1. Falls back
  // to below() when bound fits in 63 bits.
  BigInt below_big(const BigInt& bound);

  // Uniform on (0, 1]; 53-bit resolution. Never returns 0, so logs are safe.
  double unit_pos();

  // Exponential with the given rate (mean 1/rate), by inverse CDF.
  double exponential(double rate) { return -std::log(unit_pos()) / rate; }

  // Poisson with the given mean (>= 0), exact. Means above 20 are split by
  // additivity into chunks so the Knuth product never underflows.
  std::int64_t poisson(double mean);

 private:
  std::int64_t poisson_small(double mean);

  std::mt19937_64 engine_;
};

// Stream for one replicate of a Monte Carlo run. Streams for distinct
// (master_seed, replicate) pairs are decorrelated by splitmix64 whitening,
// and the mapping is pure, so any scheduling of replicates across workers
// reproduces identical per-replicate results.
Rng replicate_rng(std::uint64_t master_seed, std::uint64_t replicate);

}  // namespace coalsim
