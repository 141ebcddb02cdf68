#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace planlens::cli {

/// Exit codes of run().
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kInputError = 2;
inline constexpr int kNumericalError = 3;

/// Entry point of the planlens tool; args excludes the program name.
/// Subcommands: ingest, predict, topics, factors, report, expand-lexicon.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace planlens::cli
