#pragma once

#include <iosfwd>

namespace immtsf {

/// Entry point of the `immtsf` tool. Returns 0 on success, 1 on input errors, 2 on internal errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace immtsf
