#ifndef ALTPROJ_CLI_HPP
#define ALTPROJ_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace altproj {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitOptimization = 3,
  kExitInvariant = 4,
};

/// Subcommands: train, label, eval, synth, oracle-check. `args` excludes the
/// program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace altproj

#endif  // ALTPROJ_CLI_HPP
