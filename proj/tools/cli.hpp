#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rwre::cli {

inline constexpr const char* kVersion = "1.0.0";

/// Runs one command line (without the program name).
/// Exit codes: 0 success, 1 failed checks (verify-all, replay), 2 validation
/// or usage error, 3 numerical non-convergence.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

}  // namespace rwre::cli
