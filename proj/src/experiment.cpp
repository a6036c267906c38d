#include "loposem/experiment.hpp"

#include "loposem/error.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/poisson_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace loposem {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct Realization {
    std::vector<SinogramBlock> blocks;
    std::vector<double> delta;
    std::vector<double> delta_l2;
    double level = 0.0;
};

Realization draw(std::span<const SinogramBlock> clean, double scale, std::uint64_t seed) {
    Realization r;
    double total_mass = 0.0;
    for (const auto& b : clean) {
        const auto& g = b.grid();
        const auto cols = static_cast<std::size_t>(g.radii_per_angle());
        std::vector<double> noisy(b.values().size());
        for (int ip = 0; ip < g.n_phi(); ++ip) {
            const auto global = static_cast<std::uint64_t>(b.block()) * g.n_phi() + ip;
            boost::random::mt19937_64 engine(splitmix64(seed ^ splitmix64(global)));
            for (std::size_t ir = 0; ir < cols; ++ir) {
                const std::size_t i = static_cast<std::size_t>(ip) * cols + ir;
                const double mean = scale * b.values()[i];
                long long count = 0;
                if (mean > 0.0) {
                    boost::random::poisson_distribution<long long, double> poisson(mean);
                    count = poisson(engine);
                }
                noisy[i] = static_cast<double>(count) / scale;
            }
        }
        SinogramBlock raw(b.grid_ptr(), b.block(), std::move(noisy));
        if (!(raw.mass() > 0.0))
            throw DomainError("add_poisson_noise: block " + std::to_string(b.block()) +
                              " received no counts; increase the counts scale");
        r.blocks.push_back(raw.normalized_copy());
        const auto w = g.block_weights();
        r.delta.push_back(l1_distance(b.values(), r.blocks.back().values(), w));
        r.delta_l2.push_back(l2_distance(b.values(), r.blocks.back().values(), w));
        total_mass += b.mass();
    }
    double sum = 0.0;
    for (double d : r.delta)
        sum += d;
    r.level = sum / total_mass;
    return r;
}

} // namespace

Disc parse_disc(const std::string& value, int line) {
    std::stringstream ss(value);
    std::string cell;
    std::vector<double> nums;
    while (std::getline(ss, cell, ',')) {
        const auto t = trim(cell);
        try {
            std::size_t used = 0;
            nums.push_back(std::stod(t, &used));
            if (used != t.size())
                throw std::invalid_argument(t);
        } catch (const std::exception&) {
            throw ConfigError("disc: '" + t + "' is not a number", line);
        }
    }
    if (nums.size() != 4)
        throw ConfigError("disc needs 4 values: cx, cy, radius, amplitude", line);
    Disc d{nums[0], nums[1], nums[2], nums[3]};
    if (!(d.radius > 0.0))
        throw ConfigError("disc radius must be > 0", line);
    if (!(d.amplitude >= 0.0))
        throw ConfigError("disc amplitude must be >= 0", line);
    return d;
}

PhantomSpec PhantomSpec::parse(std::istream& in) {
    PhantomSpec spec;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto text = trim(raw.substr(0, raw.find('#')));
        if (text.empty())
            continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected 'disc = cx, cy, radius, amplitude'", line);
        const auto key = trim(text.substr(0, eq));
        if (key != "disc")
            throw ConfigError("unknown phantom key '" + key + "'", line);
        spec.discs.push_back(parse_disc(text.substr(eq + 1), line));
    }
    return spec;
}

PhantomSpec PhantomSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open phantom file " + path.string());
    return parse(in);
}

DensityGrid render_phantom(const PhantomSpec& spec, std::shared_ptr<const PixelGrid> grid) {
    if (spec.discs.empty())
        throw DomainError("render_phantom: phantom has no discs");
    for (const auto& d : spec.discs)
        if (std::hypot(d.cx, d.cy) + d.radius > grid->omega_radius())
            throw DomainError("render_phantom: disc reaches outside Omega");
    const int n = grid->nodes_per_axis();
    std::vector<double> values(grid->size(), 0.0);
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const std::size_t idx = grid->index(ix, iy);
            if (!grid->inside(idx))
                continue;
            const double tx = grid->coord(ix);
            const double ty = grid->coord(iy);
            for (const auto& d : spec.discs) {
                const double dx = tx - d.cx;
                const double dy = ty - d.cy;
                if (dx * dx + dy * dy < d.radius * d.radius)
                    values[idx] += d.amplitude;
            }
        }
    }
    return DensityGrid::normalized(std::move(grid), std::move(values));
}

std::vector<SinogramBlock> simulate_data(const PhantomSpec& phantom, const PixelGrid& pixels,
                                         std::shared_ptr<const SinogramGrid> sinogram,
                                         int smoothing_halfwidth,
                                         const SimulationOptions& options) {
    if (options.oversample < 1)
        throw ConfigError("simulate_data: oversample must be >= 1");
    const long long n_fine = static_cast<long long>(pixels.n_t()) * options.oversample;
    const auto nodes = static_cast<std::size_t>((n_fine + 1) * (n_fine + 1));
    if (nodes > options.max_nodes)
        throw ConfigError("simulate_data: oversampled grid has " + std::to_string(nodes) +
                          " nodes, above the cap of " + std::to_string(options.max_nodes));
    auto fine = std::make_shared<const PixelGrid>(static_cast<int>(n_fine), pixels.epsilon());
    const auto x_star = render_phantom(phantom, fine);
    const RadonBlockSystem system(fine, sinogram,
                                  SmoothingKernel(smoothing_halfwidth, sinogram->n_r()));
    std::vector<SinogramBlock> blocks;
    blocks.reserve(static_cast<std::size_t>(sinogram->n_blocks()));
    for (int j = 0; j < sinogram->n_blocks(); ++j) {
        SinogramBlock b(sinogram, j, system.forward(j, x_star.values()));
        blocks.push_back(b.normalized_copy());
    }
    return blocks;
}

NoisyData add_poisson_noise(std::span<const SinogramBlock> clean, const NoiseSpec& spec) {
    if (clean.empty())
        throw ShapeError("add_poisson_noise: no data");
    if (!(spec.level > 0.0 && spec.level < 1.0))
        throw ConfigError("add_poisson_noise: level must lie in (0,1)");

    NoisyData out;
    out.rng = kNoiseRngName;
    auto finish = [&](Realization&& r, double scale) {
        out.blocks = std::move(r.blocks);
        out.delta = std::move(r.delta);
        out.delta_l2 = std::move(r.delta_l2);
        out.realized_level = r.level;
        out.counts_scale = scale;
        return out;
    };

    if (spec.counts_scale) {
        if (!(*spec.counts_scale > 0.0))
            throw ConfigError("add_poisson_noise: counts scale must be > 0");
        return finish(draw(clean, *spec.counts_scale, spec.seed), *spec.counts_scale);
    }

    // For Poisson counts E|Y - cy| ~ sqrt(2 c y / pi), so the relative L1
    // error scales like c^{-1/2}; start from that estimate and bisect in log c.
    double spread = 0.0, total = 0.0;
    for (const auto& b : clean) {
        double s = 0.0;
        for (double v : b.values())
            s += std::sqrt(2.0 * v / std::numbers::pi);
        spread += s * b.grid().sample_weight();
        total += b.mass();
    }
    const double guess = std::pow(spread / (spec.level * total), 2.0);

    double lo = std::log(guess / 64.0);
    double hi = std::log(guess * 64.0);
    double best_scale = guess;
    Realization best = draw(clean, guess, spec.seed);
    auto off = [&](double level) { return std::abs(level - spec.level) / spec.level; };
    for (int it = 0; it < 60 && off(best.level) > 0.01; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double scale = std::exp(mid);
        auto r = draw(clean, scale, spec.seed);
        if (r.level > spec.level)
            lo = mid; // too noisy: more counts
        else
            hi = mid;
        if (off(r.level) < off(best.level)) {
            best = std::move(r);
            best_scale = scale;
        }
    }
    if (off(best.level) > 0.1)
        throw NumericalError("add_poisson_noise: could not reach noise level " +
                             std::to_string(spec.level) + " (closest " +
                             std::to_string(best.level) + " at counts scale " +
                             std::to_string(best_scale) + ")");
    return finish(std::move(best), best_scale);
}

std::vector<SinogramBlock> reblock(std::span<const SinogramBlock> blocks,
                                   std::shared_ptr<const SinogramGrid> target) {
    if (blocks.empty())
        throw ShapeError("reblock: no data");
    const auto& src = blocks.front().grid();
    if (src.n_angles() != target->n_angles() || src.n_r() != target->n_r())
        throw ShapeError("reblock: grids differ in angles or radii");
    if (blocks.size() != static_cast<std::size_t>(src.n_blocks()))
        throw ShapeError("reblock: incomplete block set");
    std::vector<double> all;
    for (const auto& b : blocks)
        all.insert(all.end(), b.values().begin(), b.values().end());
    const std::size_t per = target->samples_per_block();
    std::vector<SinogramBlock> out;
    for (int j = 0; j < target->n_blocks(); ++j) {
        std::vector<double> v(all.begin() + static_cast<std::ptrdiff_t>(j * per),
                              all.begin() + static_cast<std::ptrdiff_t>((j + 1) * per));
        out.push_back(SinogramBlock(target, j, std::move(v)).normalized_copy());
    }
    return out;
}

std::vector<std::vector<double>> block_values(std::span<const SinogramBlock> blocks) {
    std::vector<std::vector<double>> out;
    out.reserve(blocks.size());
    for (const auto& b : blocks)
        out.emplace_back(b.values().begin(), b.values().end());
    return out;
}

std::vector<std::vector<double>> shifted_values(const LambdaShiftedSystem& system,
                                                std::span<const SinogramBlock> blocks) {
    std::vector<std::vector<double>> out;
    out.reserve(blocks.size());
    for (const auto& b : blocks)
        out.push_back(system.shift_data(b.block(), b.values()));
    return out;
}

std::vector<double> shifted_noise_bounds(const LambdaShiftedSystem& system,
                                         std::span<const double> delta) {
    std::vector<double> out(delta.size());
    for (std::size_t j = 0; j < delta.size(); ++j)
        out[j] = delta[j] * (1.0 + system.lambda()) * system.shift_factor(static_cast<int>(j));
    return out;
}

OracleStopResult oracle_stopped_osem(const BlockOperatorSystem& system,
                                     std::span<const std::vector<double>> data,
                                     std::span<const double> x0, std::span<const double> x_star,
                                     int max_cycles) {
    if (max_cycles < 1)
        throw ConfigError("oracle_stopped_osem: max_cycles must be >= 1");
    RunOptions opts;
    opts.x_star = x_star;
    OracleStopResult out;
    out.run = osem_run(system, data, x0, max_cycles, opts);
    out.cycle_errors.resize(static_cast<std::size_t>(max_cycles) + 1);
    for (int c = 0; c <= max_cycles; ++c)
        out.cycle_errors[static_cast<std::size_t>(c)] = out.run.trace.error_after_cycle(c);
    const auto it = std::min_element(out.cycle_errors.begin() + 1, out.cycle_errors.end());
    out.best_cycle = static_cast<int>(it - out.cycle_errors.begin());
    out.best_error = *it;
    // Deterministic, so a shorter rerun reproduces the iterate at best_cycle.
    out.best = out.best_cycle == max_cycles
                   ? out.run.x
                   : osem_run(system, data, x0, out.best_cycle).x;
    return out;
}

} // namespace loposem
