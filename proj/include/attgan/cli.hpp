#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace attgan {

/// Exit codes of the `attgan` command.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,  // runtime failure (I/O, corrupt checkpoint, non-finite loss, ...)
    kExitUsage = 2,    // bad subcommand, flags, config file or request values
};

/// Entry point of the `attgan` tool; `args` excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace attgan
