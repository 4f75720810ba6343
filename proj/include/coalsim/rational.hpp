#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>

namespace coalsim {

// Exact integer/rational arithmetic used by all closed-form moment code,
// jump laws and oracles. Floating point enters only at sampling time.
using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// Number of unordered pairs among n items, C(n, 2). Zero for n < 2.
inline std::int64_t pairs2(std::int64_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

}  // namespace coalsim
