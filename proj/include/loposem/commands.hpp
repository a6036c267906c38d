#pragma once

// The `run`, `verify` and `phantom` subcommands. Each returns a process exit
// code and never throws for configuration or numerical problems.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

namespace loposem::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_config = 2,
    exit_assumption = 3,
    exit_numerical = 4,
};

struct Overrides {
    std::optional<std::filesystem::path> output_dir;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

int run(const std::filesystem::path& config, const Overrides& overrides, std::ostream& out,
        std::ostream& err);

int verify(const std::filesystem::path& config, const Overrides& overrides, std::ostream& out,
           std::ostream& err);

int phantom(const std::filesystem::path& config, const Overrides& overrides, std::ostream& out,
            std::ostream& err);

} // namespace loposem::cli
