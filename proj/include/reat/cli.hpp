#pragma once

#include <iosfwd>

namespace reat {

/// Command-line entry point. Exit codes: 0 success, 1 usage error, 2 data
/// error (unreadable or malformed input, corrupt model, empty eligible set).
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace reat
