#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace defocus::cli {

/// Exit codes: 0 success, 1 processing error, 2 argument error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace defocus::cli
