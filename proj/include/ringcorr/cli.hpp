#pragma once

#include <string>
#include <vector>

namespace ringcorr::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes: 0 success, 1 domain error, 2 usage error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args); // args[0] is the program name

} // namespace ringcorr::cli
