#include "loposem/kl_core.hpp"

#include "loposem/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace loposem {

namespace {

// Neumaier variant of Kahan summation.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw ShapeError(std::string(what) + ": size mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
}

double kl_term(double v, double u) {
    if (v < 0.0 || u < 0.0 || std::isnan(v) || std::isnan(u))
        throw DomainError("kl_distance: negative or NaN entry");
    if (v == 0.0)
        return u;
    if (u == 0.0)
        return std::numeric_limits<double>::infinity();
    return v * std::log(v / u) - v + u;
}

} // namespace

double weighted_sum(std::span<const double> values, std::span<const double> weights) {
    require_same_size(values.size(), weights.size(), "weighted_sum");
    CompensatedSum s;
    for (std::size_t i = 0; i < values.size(); ++i)
        s.add(values[i] * weights[i]);
    return s.value();
}

double weighted_sum(std::span<const double> values, double weight) {
    CompensatedSum s;
    for (double v : values)
        s.add(v);
    return s.value() * weight;
}

double kl_distance(std::span<const double> v, std::span<const double> u,
                   std::span<const double> weights) {
    require_same_size(v.size(), u.size(), "kl_distance");
    require_same_size(v.size(), weights.size(), "kl_distance weights");
    CompensatedSum s;
    bool infinite = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (weights[i] == 0.0)
            continue;
        const double t = kl_term(v[i], u[i]);
        if (std::isinf(t))
            infinite = true;
        else
            s.add(weights[i] * t);
    }
    if (infinite)
        return std::numeric_limits<double>::infinity();
    return std::max(0.0, s.value());
}

double kl_distance(std::span<const double> v, std::span<const double> u, double weight) {
    require_same_size(v.size(), u.size(), "kl_distance");
    CompensatedSum s;
    bool infinite = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double t = kl_term(v[i], u[i]);
        if (std::isinf(t))
            infinite = true;
        else
            s.add(t);
    }
    if (infinite)
        return std::numeric_limits<double>::infinity();
    return std::max(0.0, s.value() * weight);
}

bool kl_l1_bound_check(std::span<const double> v, std::span<const double> u,
                       std::span<const double> weights) {
    const double d = kl_distance(v, u, weights);
    const double diff = l1_distance(v, u, weights);
    const double nv = weighted_sum(v, weights);
    const double nu = weighted_sum(u, weights);
    return diff * diff <= (2.0 / 3.0 * nv + 4.0 / 3.0 * nu) * d + 1e-12;
}

std::vector<double> normalize_to_simplex(std::span<const double> values,
                                         std::span<const double> weights) {
    require_same_size(values.size(), weights.size(), "normalize_to_simplex");
    for (double v : values)
        if (v < 0.0 || std::isnan(v))
            throw DomainError("normalize_to_simplex: negative or NaN entry");
    const double mass = weighted_sum(values, weights);
    if (!(mass > 0.0) || !std::isfinite(mass))
        throw DomainError("normalize_to_simplex: weighted sum is not positive");
    std::vector<double> out(values.begin(), values.end());
    for (double& v : out)
        v /= mass;
    return out;
}

std::vector<double> normalize_to_simplex(std::span<const double> values, double weight) {
    const std::vector<double> w(values.size(), weight);
    return normalize_to_simplex(values, w);
}

double l1_distance(std::span<const double> a, std::span<const double> b,
                   std::span<const double> weights) {
    require_same_size(a.size(), b.size(), "l1_distance");
    require_same_size(a.size(), weights.size(), "l1_distance weights");
    CompensatedSum s;
    for (std::size_t i = 0; i < a.size(); ++i)
        s.add(weights[i] * std::abs(a[i] - b[i]));
    return s.value();
}

double l2_distance(std::span<const double> a, std::span<const double> b,
                   std::span<const double> weights) {
    require_same_size(a.size(), b.size(), "l2_distance");
    require_same_size(a.size(), weights.size(), "l2_distance weights");
    CompensatedSum s;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s.add(weights[i] * d * d);
    }
    return std::sqrt(s.value());
}

// ---------------------------------------------------------------------------

PixelGrid::PixelGrid(int n_t, double epsilon) : n_t_(n_t), epsilon_(epsilon) {
    if (n_t < 2)
        throw ConfigError("PixelGrid: n_t must be >= 2");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ConfigError("PixelGrid: epsilon must lie in (0,1)");
    const double h = 2.0 / n_t;
    cell_measure_ = h * h;
    const int n = n_t + 1;
    mask_.assign(static_cast<std::size_t>(n) * n, 0);
    weights_.assign(mask_.size(), 0.0);
    const double r2 = omega_radius() * omega_radius();
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            // Integer form of |t|^2 < r^2, exact under index reflection.
            const double dx = 2 * ix - n_t;
            const double dy = 2 * iy - n_t;
            if ((dx * dx + dy * dy) / (static_cast<double>(n_t) * n_t) < r2) {
                mask_[index(ix, iy)] = 1;
                weights_[index(ix, iy)] = cell_measure_;
                ++inside_count_;
            }
        }
    }
}

DensityGrid::DensityGrid(std::shared_ptr<const PixelGrid> grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_)
        throw ShapeError("DensityGrid: null grid");
    require_same_size(values_.size(), grid_->size(), "DensityGrid");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (values_[i] < 0.0 || std::isnan(values_[i]))
            throw DomainError("DensityGrid: negative or NaN value");
        if (!grid_->inside(i) && values_[i] != 0.0)
            throw DomainError("DensityGrid: nonzero value outside Omega");
    }
    if (std::abs(mass() - 1.0) > 1e-9)
        throw DomainError("DensityGrid: mass " + std::to_string(mass()) + " differs from 1");
}

DensityGrid DensityGrid::normalized(std::shared_ptr<const PixelGrid> grid,
                                    std::vector<double> values) {
    if (!grid)
        throw ShapeError("DensityGrid: null grid");
    require_same_size(values.size(), grid->size(), "DensityGrid");
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!grid->inside(i))
            values[i] = 0.0;
    auto unit = normalize_to_simplex(values, grid->weights());
    return DensityGrid(std::move(grid), std::move(unit));
}

DensityGrid DensityGrid::uniform(std::shared_ptr<const PixelGrid> grid) {
    std::vector<double> ones(grid->size(), 1.0);
    return normalized(std::move(grid), std::move(ones));
}

double DensityGrid::mass() const { return weighted_sum(values_, grid_->weights()); }

double kl_distance(const DensityGrid& v, const DensityGrid& u) {
    if (&v.grid() != &u.grid() &&
        (v.grid().n_t() != u.grid().n_t() || v.grid().epsilon() != u.grid().epsilon()))
        throw ShapeError("kl_distance: densities live on different grids");
    return kl_distance(v.values(), u.values(), v.grid().weights());
}

// ---------------------------------------------------------------------------

SinogramGrid::SinogramGrid(int n_blocks, int n_phi, int n_r)
    : n_blocks_(n_blocks), n_phi_(n_phi), n_r_(n_r) {
    if (n_blocks < 1)
        throw ConfigError("SinogramGrid: number of blocks must be >= 1");
    if (n_phi < 1)
        throw ConfigError("SinogramGrid: n_phi must be >= 1");
    if (n_r < 2)
        throw ConfigError("SinogramGrid: n_r must be >= 2");
    weights_.assign(samples_per_block(), sample_weight());
}

double SinogramGrid::angle(int g) const noexcept {
    return 2.0 * std::numbers::pi * g / (static_cast<double>(n_blocks_) * n_phi_);
}

double SinogramGrid::block_measure() const noexcept {
    return 4.0 * std::numbers::pi / n_blocks_;
}

double SinogramGrid::sample_weight() const noexcept {
    return block_measure() / (static_cast<double>(n_phi_) * (n_r_ + 1));
}

SinogramBlock::SinogramBlock(std::shared_ptr<const SinogramGrid> grid, int block,
                             std::vector<double> values)
    : grid_(std::move(grid)), block_(block), values_(std::move(values)) {
    if (!grid_)
        throw ShapeError("SinogramBlock: null grid");
    if (block < 0 || block >= grid_->n_blocks())
        throw ShapeError("SinogramBlock: block index out of range");
    require_same_size(values_.size(), grid_->samples_per_block(), "SinogramBlock");
    for (double v : values_)
        if (v < 0.0 || std::isnan(v))
            throw DomainError("SinogramBlock: negative or NaN value");
}

double SinogramBlock::mass() const { return weighted_sum(values_, grid_->sample_weight()); }

bool SinogramBlock::normalized(double tol) const { return std::abs(mass() - 1.0) <= tol; }

SinogramBlock SinogramBlock::normalized_copy() const {
    return SinogramBlock(grid_, block_, normalize_to_simplex(values_, grid_->block_weights()));
}

double kl_distance(const SinogramBlock& v, std::span<const double> u) {
    return kl_distance(v.values(), u, v.grid().block_weights());
}

} // namespace loposem
