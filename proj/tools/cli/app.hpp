#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tcilab::cli {

constexpr int kExitOk = 0;
constexpr int kExitMismatch = 1;  // rerun produced different artifacts
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

// Entry point shared by the executable and the tests; args excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tcilab::cli
