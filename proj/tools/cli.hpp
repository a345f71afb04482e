#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace flowinfer::cli {

enum ExitCode : int { kOk = 0, kDomainError = 1, kUsageError = 2 };

/// Entry point behind the `flowinfer` binary. `out` receives command output
/// when no --out file is given; `err` receives diagnostics.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flowinfer::cli
