#pragma once

#include <ostream>

namespace coalsim {

// Command-line front end. Parses argv, runs the chosen subcommand and
// writes its table (CSV) or summary (JSON) to --out ("-" = the out stream).
// Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 unsupported
// regime (an exact formula was asked outside its domain).
int coalsim_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace coalsim
