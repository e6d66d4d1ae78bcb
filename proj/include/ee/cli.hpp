#ifndef EE_CLI_HPP
#define EE_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace ee {

/// Process exit codes of the command-line driver.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,     ///< bad config, bad arguments, out-of-domain state
  kExitStability = 3,  ///< feeder ring mass fell below theta under the abort policy
  kExitNumerical = 4,  ///< singular or ill-conditioned exact solve
  kExitFailed = 5,     ///< verification, rate or bias check did not pass
};

/// `ee <run|rate-study|bias-study|verify> --config FILE --out DIR [...]`.
/// args[0] is the program name. Messages go to `out` / `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ee

#endif  // EE_CLI_HPP
