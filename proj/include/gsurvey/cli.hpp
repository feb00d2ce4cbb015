#pragma once

#include <iosfwd>

namespace gsurvey {

// Runs the gsurvey command line. Returns the process exit code:
// 0 success, 1 usage error, 2 data error, 3 numeric or degenerate result.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gsurvey
