#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dvae::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2, kVerifyFailed = 3 };

/// Parses argv and runs one of convert-data | train | eval | grid | verify.
/// Command-line flags override keys read from --config.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace dvae::cli
