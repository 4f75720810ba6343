#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace coalsim {

// Decimal rendering with 12 significant digits, trailing zeros trimmed by
// the shortest %g form. Integral values print without a decimal point.
std::string format_significant(double value);

// RFC-4180-style quoting: fields containing commas, quotes, CR or LF are
// wrapped in double quotes with embedded quotes doubled.
std::string csv_escape(const std::string& field);

// One CSV record, LF-terminated.
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace coalsim
