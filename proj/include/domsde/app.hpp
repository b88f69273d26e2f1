#pragma once

#include "domsde/config.hpp"

#include <json.hpp>

#include <ostream>
#include <string>
#include <vector>

namespace domsde
{
    /// Exit statuses of the command-line tool.
    inline constexpr int kExitOk = 0;
    inline constexpr int kExitError = 1;        // configuration or runtime error
    inline constexpr int kExitInvalidReport = 3; // report written with valid = false

    std::vector<std::string> subcommands();

    struct CommandResult
    {
        nlohmann::json report;
        std::string paths_csv; // simulate only, when output.paths is set
        bool valid = true;
    };

    /// Runs one subcommand in memory. The report depends only on the command and the
    /// config digest view, never on the worker count or the output directory.
    CommandResult execute(const std::string &command, const RunConfig &config);

    /// Canonical report text (two-space indented JSON plus a trailing newline).
    std::string report_text(const nlohmann::json &report);

    /// Executes and writes report.json (always) and paths.csv (if produced) into
    /// config.output.dir. Returns kExitOk or kExitInvalidReport; throws on errors.
    int run(const std::string &command, const RunConfig &config, std::ostream &log);
}
