#pragma once

#include <iosfwd>

namespace sds::cli {

// Entry point behind the `sds` binary.  Streams are injected so tests can
// capture reports without a process boundary.  Exit codes: 0 the checked
// claim holds, 1 it fails, 2 the run was inconclusive (a numeric zero where
// the command needs a symbolic one), 3 usage or parse trouble.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace sds::cli
