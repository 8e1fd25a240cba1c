#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace phqens::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

/// Runs one subcommand (synth, train, predict, evaluate, report, mel).
/// `args` excludes the program name. Failures print one line to `err`:
///   error kind=<usage|data|internal> message="..."
/// and remove any output files the command had created.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace phqens::cli
