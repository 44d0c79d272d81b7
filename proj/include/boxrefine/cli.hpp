#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace boxrefine {

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns the process exit code: 0 iff all outputs were
/// written, 1 on runtime errors, 2 on usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace boxrefine
