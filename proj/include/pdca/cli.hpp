#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pdca::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one command line (without the program name). Returns 0 on success,
/// 1 on domain errors and 2 on usage or parse errors. Errors are reported
/// as a single JSON line on `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pdca::cli
