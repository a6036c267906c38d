#pragma once

#include "loposem/kl_core.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace loposem::io {

/// Shortest round-trip decimal form of a double ("%.17g").
std::string format_double(double v);

/// Headerless row-major CSV matrix.
void write_csv_matrix(const std::filesystem::path& path, std::span<const double> values,
                      std::size_t rows, std::size_t cols);

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
};

Matrix read_csv_matrix(const std::filesystem::path& path);

/// Binary 16-bit PGM (P5, maxval 65535, big-endian samples), linearly scaled
/// from [min, max] of `values`. Writes `<path>.scale` with `min=<v> max=<v>`.
void write_pgm(const std::filesystem::path& path, std::span<const double> values,
               std::size_t rows, std::size_t cols);

struct PgmImage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<unsigned> pixels;
    double min = 0.0;
    double max = 0.0;

    /// Pixel mapped back through the recorded scale.
    double value(std::size_t i) const;
};

PgmImage read_pgm(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path, const DensityGrid& x);
void write_pgm(const std::filesystem::path& path, const DensityGrid& x);

/// Blocks stacked in order into one (N n_phi) x (n_r + 1) image.
void write_csv(const std::filesystem::path& path, std::span<const SinogramBlock> blocks);
void write_pgm(const std::filesystem::path& path, std::span<const SinogramBlock> blocks);

} // namespace loposem::io
