#pragma once

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace hfw {

// Exit statuses of the command layer.
enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,
  kExitConfig = 2,
  kExitGuard = 3,
  kExitCertificate = 4,
};

struct CommandOptions {
  std::string config_path;  // empty: defaults only
  std::optional<std::string> out_dir;
  std::optional<std::string> epsilon;  // comma separated list
  std::optional<int> order;
  std::optional<long long> seed;
  bool force = false;  // run past an unstable verdict
  std::vector<std::pair<std::string, std::string>> overrides;  // key = value, applied last
  std::string command_line;
  std::ostream* log = &std::cout;
  std::ostream* err = &std::cerr;
};

const std::vector<std::string>& command_names();

// Runs one subcommand end to end and returns its exit status.
int run_command(const std::string& name, const CommandOptions& opt);

}  // namespace hfw
