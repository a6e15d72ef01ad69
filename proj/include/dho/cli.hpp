#pragma once

#include <string>
#include <vector>

namespace dho {

// Single entry point behind the `dho` binary. Exit codes: 0 success, 2 usage
// error, 3 data/config error, 4 numerical failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace dho
