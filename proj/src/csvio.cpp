#include "coalsim/csvio.hpp"

#include <cstdio>

namespace coalsim {

std::string format_significant(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

std::string csv_escape(const std::string& field) {
  const bool needs_quotes = field.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs_quotes) return field;
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (const char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out.put(',');
    out << csv_escape(fields[i]);
  }
  out.put('\n');
}

}  // namespace coalsim
