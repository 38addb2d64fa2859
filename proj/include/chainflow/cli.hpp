#pragma once

#include <string>
#include <vector>

namespace chainflow {

// Entry point shared by the binary and the CLI tests.  args excludes the
// program name.  Exit codes: 0 success, 2 config error, 3 numerical failure,
// 4 assertion failure in `compare --assert`.
int run_cli(const std::vector<std::string>& args);

}  // namespace chainflow
