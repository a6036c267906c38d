#pragma once

// Synthetic experiments: disc phantoms, oversampled data simulation, Poisson
// noise with a prescribed relative L1 level, and ground-truth bookkeeping.

#include "loposem/operators.hpp"
#include "loposem/solvers.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace loposem {

struct Disc {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;
    double amplitude = 1.0;
};

/// Parses "cx, cy, radius, amplitude". `line` is used in error messages.
Disc parse_disc(const std::string& value, int line = 0);

struct PhantomSpec {
    std::vector<Disc> discs;

    /// Reads `disc = cx, cy, radius, amplitude` lines; `#` starts a comment,
    /// other keys are rejected.
    static PhantomSpec parse(std::istream& in);
    static PhantomSpec load(const std::filesystem::path& path);
};

/// Sum of disc amplitudes at every Omega node, normalized to unit mass.
/// Throws DomainError for an empty spec or a disc reaching outside Omega.
DensityGrid render_phantom(const PhantomSpec& spec, std::shared_ptr<const PixelGrid> grid);

struct SimulationOptions {
    int oversample = 4;
    /// Refuse fine grids with more nodes than this.
    std::size_t max_nodes = 16'000'000;
};

/// Clean data I_Phi M_j x* per block, computed on a grid refined by
/// `oversample` and renormalized to unit block mass.
std::vector<SinogramBlock> simulate_data(const PhantomSpec& phantom, const PixelGrid& pixels,
                                         std::shared_ptr<const SinogramGrid> sinogram,
                                         int smoothing_halfwidth,
                                         const SimulationOptions& options = {});

struct NoiseSpec {
    /// Target relative quadrature-weighted L1 error.
    double level = 0.05;
    /// Expected counts per unit data value; searched for when empty.
    std::optional<double> counts_scale;
    std::uint64_t seed = 0;
};

struct NoisyData {
    std::vector<SinogramBlock> blocks;
    /// Realized ||y_j - y_j^delta||_L1 per block.
    std::vector<double> delta;
    /// Realized ||y_j - y_j^delta||_L2 per block.
    std::vector<double> delta_l2;
    double counts_scale = 0.0;
    double realized_level = 0.0;
    std::string rng;
};

/// Stream identifier recorded in metadata.
inline constexpr const char* kNoiseRngName = "mt19937_64/splitmix64-per-angle/boost-poisson";

/// Poisson counts at scale c, rescaled by 1/c and renormalized per block.
/// Each angular row draws from its own substream derived from the seed, so
/// the realization does not depend on how angles are grouped into blocks.
NoisyData add_poisson_noise(std::span<const SinogramBlock> clean, const NoiseSpec& spec);

/// Regroups data to another block count over the same angles and radii and
/// renormalizes each new block.
std::vector<SinogramBlock> reblock(std::span<const SinogramBlock> blocks,
                                   std::shared_ptr<const SinogramGrid> target);

/// Raw values of each block, for the solver interfaces.
std::vector<std::vector<double>> block_values(std::span<const SinogramBlock> blocks);

/// Lambda-shifted copy of each block.
std::vector<std::vector<double>> shifted_values(const LambdaShiftedSystem& system,
                                                std::span<const SinogramBlock> blocks);

/// delta_j (1 + lambda) / (1 + lambda |Sigma_j|).
std::vector<double> shifted_noise_bounds(const LambdaShiftedSystem& system,
                                         std::span<const double> delta);

struct OracleStopResult {
    std::vector<double> best;
    int best_cycle = 0;
    double best_error = 0.0;
    /// d(x*, x_{cN}) for c = 0..max_cycles.
    std::vector<double> cycle_errors;
    RunResult run;
};

/// Plain OS-EM for max_cycles; returns the iterate at the cycle (>= 1) with
/// the smallest d(x*, x).
OracleStopResult oracle_stopped_osem(const BlockOperatorSystem& system,
                                     std::span<const std::vector<double>> data,
                                     std::span<const double> x0, std::span<const double> x_star,
                                     int max_cycles);

} // namespace loposem
