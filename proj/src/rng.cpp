#include "coalsim/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace coalsim {

Rng::Rng(std::uint64_t seed) {
  std::uint64_t s = seed;
  std::uint32_t words[8];
  for (int i = 0; i < 4; ++i) {
    std::uint64_t w = splitmix64(s);
    words[2 * i] = static_cast<std::uint32_t>(w);
    words[2 * i + 1] = static_cast<std::uint32_t>(w >> 32);
  }
  std::seed_seq seq(words, words + 8);
  engine_.seed(seq);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Rng::below: bound must be >= 1");
  unsigned __int128 m = static_cast<unsigned __int128>(u64()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(u64()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

BigInt Rng::below_big(const BigInt& bound) {
  if (bound <= 0) throw std::invalid_argument("Rng::below_big: bound must be >= 1");
  if (bound <= BigInt(std::int64_t{1} << 62)) {
    return BigInt(below(bound.convert_to<std::uint64_t>()));
  }
  const unsigned bits = msb(bound) + 1;  // bound >= 2^(bits-1)
  const unsigned words = (bits + 63) / 64;
  const BigInt mask = (BigInt(1) << bits) - 1;
  for (;;) {
    BigInt v = 0;
    for (unsigned i = 0; i < words; ++i) v = (v << 64) | u64();
    v &= mask;
    if (v < bound) return v;
  }
}

double Rng::unit_pos() {
  return static_cast<double>((u64() >> 11) + 1) * 0x1.0p-53;
}

std::int64_t Rng::poisson_small(double mean) {
  const double limit = std::exp(-mean);
  double product = 1.0;
  std::int64_t count = -1;
  do {
    ++count;
    product *= unit_pos();
  } while (product > limit);
  return count;
}

std::int64_t Rng::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean))
    throw std::invalid_argument("Rng::poisson: mean must be finite and >= 0");
  std::int64_t total = 0;
  while (mean > 20.0) {
    total += poisson_small(20.0);
    mean -= 20.0;
  }
  return total + poisson_small(mean);
}

Rng replicate_rng(std::uint64_t master_seed, std::uint64_t replicate) {
  std::uint64_t s = master_seed ^ (0x9e3779b97f4a7c15ULL * (replicate + 1));
  return Rng(splitmix64(s) ^ master_seed);
}

}  // namespace coalsim
