#pragma once

#include <iosfwd>

namespace cwms::cli {

/// Parses argv and runs one subcommand. Returns 0 on success, 2 on a usage
/// error (unknown subcommand or flag) and 1 on any other failure, which is
/// reported as a single "error: ..." line on `err`.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace cwms::cli
