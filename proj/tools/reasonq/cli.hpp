#pragma once

#include <iosfwd>

namespace reasonq::cli {

/// Runs the command line. Exit codes: 0 ok, 1 runtime failure, 2 usage or
/// configuration error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace reasonq::cli
