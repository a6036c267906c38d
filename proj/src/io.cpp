#include "loposem/io.hpp"

#include "loposem/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace loposem::io {

namespace {

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = {}) {
    std::ofstream out(path, std::ios::out | std::ios::trunc | mode);
    if (!out)
        throw Error("cannot open " + path.string() + " for writing");
    return out;
}

std::vector<double> stack_blocks(std::span<const SinogramBlock> blocks, std::size_t& rows,
                                 std::size_t& cols) {
    if (blocks.empty())
        throw ShapeError("no sinogram blocks to write");
    const auto& g = blocks.front().grid();
    cols = static_cast<std::size_t>(g.radii_per_angle());
    rows = 0;
    std::vector<double> all;
    for (const auto& b : blocks) {
        if (b.values().size() % cols != 0)
            throw ShapeError("sinogram blocks have inconsistent radial size");
        all.insert(all.end(), b.values().begin(), b.values().end());
        rows += b.values().size() / cols;
    }
    return all;
}

} // namespace

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv_matrix(const std::filesystem::path& path, std::span<const double> values,
                      std::size_t rows, std::size_t cols) {
    if (rows * cols != values.size())
        throw ShapeError("write_csv_matrix: rows*cols does not match value count");
    auto out = open_out(path);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (c)
                out << ',';
            out << format_double(values[r * cols + c]);
        }
        out << '\n';
    }
}

Matrix read_csv_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open " + path.string());
    Matrix m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t cols = 0;
        while (std::getline(ss, cell, ',')) {
            m.values.push_back(std::stod(cell));
            ++cols;
        }
        if (m.rows == 0)
            m.cols = cols;
        else if (cols != m.cols)
            throw ShapeError(path.string() + ": ragged CSV row " + std::to_string(m.rows + 1));
        ++m.rows;
    }
    return m;
}

void write_pgm(const std::filesystem::path& path, std::span<const double> values,
               std::size_t rows, std::size_t cols) {
    if (rows * cols != values.size() || values.empty())
        throw ShapeError("write_pgm: rows*cols does not match value count");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    const double span = hi - lo;

    auto out = open_out(path, std::ios::binary);
    out << "P5\n" << cols << ' ' << rows << "\n65535\n";
    for (double v : values) {
        const double t = span > 0.0 ? (v - lo) / span : 0.0;
        const auto p = static_cast<unsigned>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
        const char bytes[2] = {static_cast<char>((p >> 8) & 0xff), static_cast<char>(p & 0xff)};
        out.write(bytes, 2);
    }

    auto scale = open_out(path.string() + ".scale");
    scale << "min=" << format_double(lo) << " max=" << format_double(hi) << '\n';
}

double PgmImage::value(std::size_t i) const { return min + (max - min) * pixels.at(i) / 65535.0; }

PgmImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    std::string magic;
    unsigned maxval = 0;
    PgmImage img;
    in >> magic >> img.cols >> img.rows >> maxval;
    if (magic != "P5" || maxval != 65535)
        throw Error(path.string() + ": not a 16-bit P5 image");
    in.get();
    img.pixels.resize(img.rows * img.cols);
    for (auto& p : img.pixels) {
        unsigned char b[2];
        in.read(reinterpret_cast<char*>(b), 2);
        p = (static_cast<unsigned>(b[0]) << 8) | b[1];
    }
    if (!in)
        throw Error(path.string() + ": truncated image data");

    std::ifstream sc(path.string() + ".scale");
    std::string lo, hi;
    if (!(sc >> lo >> hi) || lo.rfind("min=", 0) != 0 || hi.rfind("max=", 0) != 0)
        throw Error(path.string() + ".scale: malformed");
    img.min = std::stod(lo.substr(4));
    img.max = std::stod(hi.substr(4));
    return img;
}

void write_csv(const std::filesystem::path& path, const DensityGrid& x) {
    const auto n = static_cast<std::size_t>(x.grid().nodes_per_axis());
    write_csv_matrix(path, x.values(), n, n);
}

void write_pgm(const std::filesystem::path& path, const DensityGrid& x) {
    const auto n = static_cast<std::size_t>(x.grid().nodes_per_axis());
    write_pgm(path, x.values(), n, n);
}

void write_csv(const std::filesystem::path& path, std::span<const SinogramBlock> blocks) {
    std::size_t rows = 0, cols = 0;
    const auto all = stack_blocks(blocks, rows, cols);
    write_csv_matrix(path, all, rows, cols);
}

void write_pgm(const std::filesystem::path& path, std::span<const SinogramBlock> blocks) {
    std::size_t rows = 0, cols = 0;
    const auto all = stack_blocks(blocks, rows, cols);
    write_pgm(path, all, rows, cols);
}

} // namespace loposem::io
