#pragma once

// Flat `key = value` run configuration. `#` starts a comment; `disc` may be
// repeated; every other key appears at most once.

#include "loposem/experiment.hpp"
#include "loposem/solvers.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace loposem {

enum class RunMode { em, osem, loping_osem, compare };

const char* to_string(RunMode mode);

struct RunConfig {
    RunMode mode = RunMode::loping_osem;

    // Discretization.
    int n_t = 0;
    int n_r = 0;
    int n_angles = 0;
    std::vector<int> n_blocks;
    int kernel_halfwidth = 1;
    double epsilon = 0.0; // always 2K / n_r after parsing
    double lambda = 0.01;
    int oversample = 4;
    std::size_t max_sim_nodes = 16'000'000;

    // Solver.
    double tau = 1.5;
    bool tau_schedule = false;
    double tau_schedule_slope = 0.0;
    GammaMode gamma_mode = GammaMode::computed;
    std::optional<double> gamma;
    /// Explicit noise bounds in raw data space; otherwise the realized ones.
    std::vector<double> delta;
    int max_cycles = 200;
    /// Cycles for plain EM / OS-EM and the oracle-stopped comparison runs.
    int cycles = 25;

    // Data.
    double noise_level = 0.0; // 0 = exact data
    std::optional<double> counts_scale;
    std::uint64_t seed = 1;
    PhantomSpec phantom;

    std::filesystem::path output_dir = "out";
    bool record_timing = false;

    SolverConfig solver_config(int n_blocks) const;
};

/// Parses and validates. Relative `phantom` paths resolve against `base_dir`.
/// Throws ConfigError (with a line number where one applies).
RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

} // namespace loposem
