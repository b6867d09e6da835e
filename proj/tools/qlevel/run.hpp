#pragma once

#include "qlevel/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace qlevel {

/// Process exit status of a run.
enum ExitCode : int {
    kOk = 0,
    kFailure = 1,        ///< numerical failure or internal error
    kValidation = 2,     ///< config or command line rejected
    kSingularControl = 3,
    kNoBracket = 4,
    kIoError = 5,
};

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;  ///< overrides output_dir in the config
    std::filesystem::path base_dir = ".";          ///< relative paths in the config resolve here
    unsigned threads = 1;
};

/// Runs one validated config. Artifacts and manifest.json go to the output
/// directory; failures print one JSON error record to `err`.
int run(const RunConfig& cfg, const RunOptions& opts, std::ostream& err);

/// Loads `config`, checks it holds a `command` block and runs it.
int run_file(const std::string& command, const std::filesystem::path& config, const RunOptions& opts,
             std::ostream& err);

std::string sha256_hex(const std::string& bytes);

}  // namespace qlevel
