#include "loposem/operators.hpp"

#include "loposem/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace loposem {

namespace {

void require_size(std::size_t got, std::size_t want, const char* what) {
    if (got != want)
        throw ShapeError(std::string(what) + ": expected " + std::to_string(want) +
                         " entries, got " + std::to_string(got));
}

} // namespace

// ---------------------------------------------------------------------------

std::vector<double> BlockOperatorSystem::forward(int block, std::span<const double> x) const {
    std::vector<double> out(range_size(block));
    forward(block, x, out);
    return out;
}

std::vector<double> BlockOperatorSystem::adjoint(int block, std::span<const double> y) const {
    std::vector<double> out(domain_size());
    adjoint(block, y, out);
    return out;
}

double BlockOperatorSystem::range_measure(int block) const {
    const auto w = range_weights(block);
    const std::vector<double> ones(w.size(), 1.0);
    return weighted_sum(ones, w);
}

// ---------------------------------------------------------------------------

SmoothingKernel::SmoothingKernel(int halfwidth, int n_r) : halfwidth_(halfwidth), n_r_(n_r) {
    if (n_r < 2)
        throw ConfigError("SmoothingKernel: n_r must be >= 2");
    if (halfwidth < 1 || 2 * halfwidth > n_r)
        throw ConfigError("SmoothingKernel: half-width K must satisfy 1 <= K <= n_r/2");
    weights_.resize(2 * static_cast<std::size_t>(halfwidth) + 1);
    const double dr = 2.0 / n_r;
    for (int d = -halfwidth; d <= halfwidth; ++d) {
        const double w = dr * profile(d * dr);
        weights_[static_cast<std::size_t>(d + halfwidth)] = w;
        raw_sum_ += w;
    }
    for (double& w : weights_)
        w /= raw_sum_;
}

double SmoothingKernel::profile(double s) const noexcept {
    const double eps = epsilon();
    return std::max(0.0, eps - std::abs(s)) / (eps * eps);
}

std::vector<double> smooth_radial(std::span<const double> values, const SmoothingKernel& kernel) {
    const auto cols = static_cast<std::size_t>(kernel.n_r() + 1);
    if (values.size() % cols != 0)
        throw ShapeError("smooth_radial: data size is not a multiple of n_r + 1");
    const auto rows = values.size() / cols;
    const int K = kernel.halfwidth();
    const int n_r = kernel.n_r();
    const auto w = kernel.weights();

    std::vector<double> out(values.size(), 0.0);
    for (std::size_t row = 0; row < rows; ++row) {
        const double* in = values.data() + row * cols;
        double* o = out.data() + row * cols;
        for (int i = 0; i <= n_r; ++i) {
            double acc = 0.0;
            const int lo = std::max(0, i - K);
            const int hi = std::min(n_r, i + K);
            for (int ip = lo; ip <= hi; ++ip)
                acc += w[static_cast<std::size_t>(ip - i + K)] * in[ip];
            o[i] = acc;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

CircularRadon::CircularRadon(std::shared_ptr<const PixelGrid> pixels,
                             std::shared_ptr<const SinogramGrid> sinogram)
    : pixels_(std::move(pixels)), sinogram_(std::move(sinogram)) {
    if (!pixels_ || !sinogram_)
        throw ShapeError("CircularRadon: null grid");
    const int n_r = sinogram_->n_r();
    circle_cos_.resize(static_cast<std::size_t>(n_r + 1));
    circle_sin_.resize(static_cast<std::size_t>(n_r + 1));
    for (int ir = 1; ir <= n_r; ++ir) {
        const int n = circle_points(sinogram_->radius(ir));
        auto& c = circle_cos_[static_cast<std::size_t>(ir)];
        auto& s = circle_sin_[static_cast<std::size_t>(ir)];
        c.resize(static_cast<std::size_t>(n));
        s.resize(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            const double a = 2.0 * std::numbers::pi * k / n;
            c[static_cast<std::size_t>(k)] = std::cos(a);
            s[static_cast<std::size_t>(k)] = std::sin(a);
        }
    }
}

int CircularRadon::circle_points(double r) const noexcept {
    return std::max(8, static_cast<int>(std::ceil(3.0 * r * pixels_->n_t() - 1e-9)));
}

double CircularRadon::interpolate(std::span<const double> x, double px, double py) const noexcept {
    const int n_t = pixels_->n_t();
    const double u = (px + 1.0) * 0.5 * n_t;
    const double v = (py + 1.0) * 0.5 * n_t;
    if (!(u >= 0.0 && v >= 0.0 && u <= n_t && v <= n_t))
        return 0.0;
    const int i = std::min(static_cast<int>(u), n_t - 1);
    const int j = std::min(static_cast<int>(v), n_t - 1);
    const double fx = u - i;
    const double fy = v - j;
    const std::size_t k = pixels_->index(i, j);
    const std::size_t stride = static_cast<std::size_t>(n_t + 1);
    return (1.0 - fy) * ((1.0 - fx) * x[k] + fx * x[k + 1]) +
           fy * ((1.0 - fx) * x[k + stride] + fx * x[k + stride + 1]);
}

void CircularRadon::forward_project(std::span<const double> x, int block,
                                    std::span<double> out) const {
    require_size(x.size(), pixels_->size(), "forward_project");
    require_size(out.size(), sinogram_->samples_per_block(), "forward_project output");
    const int n_phi = sinogram_->n_phi();
    const int n_r = sinogram_->n_r();
    const double N = sinogram_->n_blocks();
    for (int ip = 0; ip < n_phi; ++ip) {
        const double phi = sinogram_->angle(block, ip);
        const double cx = std::cos(phi);
        const double cy = std::sin(phi);
        double* row = out.data() + static_cast<std::size_t>(ip) * (n_r + 1);
        row[0] = 0.0;
        for (int ir = 1; ir <= n_r; ++ir) {
            const double r = sinogram_->radius(ir);
            const auto& c = circle_cos_[static_cast<std::size_t>(ir)];
            const auto& s = circle_sin_[static_cast<std::size_t>(ir)];
            double acc = 0.0;
            for (std::size_t k = 0; k < c.size(); ++k)
                acc += interpolate(x, cx + r * c[k], cy + r * s[k]);
            row[ir] = r * N / static_cast<double>(c.size()) * acc;
        }
    }
}

std::vector<double> CircularRadon::forward_project(std::span<const double> x, int block) const {
    std::vector<double> out(sinogram_->samples_per_block());
    forward_project(x, block, out);
    return out;
}

void CircularRadon::backproject(std::span<const double> y, int block,
                                std::span<double> out) const {
    require_size(y.size(), sinogram_->samples_per_block(), "backproject");
    require_size(out.size(), pixels_->size(), "backproject output");
    const int n_phi = sinogram_->n_phi();
    const int n_r = sinogram_->n_r();
    const int n = pixels_->nodes_per_axis();
    const double inv_dr = n_r / 2.0;

    std::vector<double> sx(static_cast<std::size_t>(n_phi)), sy(static_cast<std::size_t>(n_phi));
    for (int ip = 0; ip < n_phi; ++ip) {
        const double phi = sinogram_->angle(block, ip);
        sx[static_cast<std::size_t>(ip)] = std::cos(phi);
        sy[static_cast<std::size_t>(ip)] = std::sin(phi);
    }

    for (int iy = 0; iy < n; ++iy) {
        const double ty = pixels_->coord(iy);
        for (int ix = 0; ix < n; ++ix) {
            const std::size_t idx = pixels_->index(ix, iy);
            if (!pixels_->inside(idx)) {
                out[idx] = 0.0;
                continue;
            }
            const double tx = pixels_->coord(ix);
            double acc = 0.0;
            for (int ip = 0; ip < n_phi; ++ip) {
                const double dx = tx - sx[static_cast<std::size_t>(ip)];
                const double dy = ty - sy[static_cast<std::size_t>(ip)];
                const double u = std::sqrt(dx * dx + dy * dy) * inv_dr;
                const int i = static_cast<int>(u);
                const double* row = y.data() + static_cast<std::size_t>(ip) * (n_r + 1);
                if (i >= n_r) {
                    if (u == n_r)
                        acc += row[n_r];
                    continue;
                }
                const double f = u - i;
                acc += (1.0 - f) * row[i] + f * row[i + 1];
            }
            out[idx] = acc / n_phi;
        }
    }
}

std::vector<double> CircularRadon::backproject(std::span<const double> y, int block) const {
    std::vector<double> out(pixels_->size());
    backproject(y, block, out);
    return out;
}

double CircularRadon::kernel_max() const {
    std::call_once(kernel_max_once_, [this] {
        // Scatter the bilinear weights of every quadrature point onto the
        // nodes; the accumulated value at node t for sample s is a(s,t).
        const int n_t = pixels_->n_t();
        const std::size_t stride = static_cast<std::size_t>(n_t + 1);
        const double h = pixels_->cell_measure();
        const double N = sinogram_->n_blocks();
        std::vector<double> acc(pixels_->size(), 0.0);
        std::vector<std::size_t> touched;
        double best = 0.0;

        auto deposit = [&](std::size_t k, double w) {
            if (w <= 0.0 || !pixels_->inside(k))
                return;
            if (acc[k] == 0.0)
                touched.push_back(k);
            acc[k] += w;
        };

        for (int g = 0; g < sinogram_->n_angles(); ++g) {
            const double cx = std::cos(sinogram_->angle(g));
            const double cy = std::sin(sinogram_->angle(g));
            for (int ir = 1; ir <= sinogram_->n_r(); ++ir) {
                const double r = sinogram_->radius(ir);
                const auto& c = circle_cos_[static_cast<std::size_t>(ir)];
                const auto& s = circle_sin_[static_cast<std::size_t>(ir)];
                const double scale = r * N / static_cast<double>(c.size()) / h;
                for (std::size_t k = 0; k < c.size(); ++k) {
                    const double u = (cx + r * c[k] + 1.0) * 0.5 * n_t;
                    const double v = (cy + r * s[k] + 1.0) * 0.5 * n_t;
                    if (!(u >= 0.0 && v >= 0.0 && u <= n_t && v <= n_t))
                        continue;
                    const int i = std::min(static_cast<int>(u), n_t - 1);
                    const int j = std::min(static_cast<int>(v), n_t - 1);
                    const double fx = u - i;
                    const double fy = v - j;
                    const std::size_t base = pixels_->index(i, j);
                    deposit(base, scale * (1.0 - fx) * (1.0 - fy));
                    deposit(base + 1, scale * fx * (1.0 - fy));
                    deposit(base + stride, scale * (1.0 - fx) * fy);
                    deposit(base + stride + 1, scale * fx * fy);
                }
                for (std::size_t k : touched) {
                    best = std::max(best, acc[k]);
                    acc[k] = 0.0;
                }
                touched.clear();
            }
        }
        kernel_max_ = best;
    });
    return kernel_max_;
}

// ---------------------------------------------------------------------------

RadonBlockSystem::RadonBlockSystem(std::shared_ptr<const PixelGrid> pixels,
                                   std::shared_ptr<const SinogramGrid> sinogram,
                                   SmoothingKernel kernel)
    : radon_(std::move(pixels), std::move(sinogram)), kernel_(std::move(kernel)) {
    if (kernel_.n_r() != radon_.sinogram().n_r())
        throw ConfigError("RadonBlockSystem: smoothing kernel and sinogram disagree on n_r");
}

int RadonBlockSystem::num_blocks() const { return sinogram().n_blocks(); }

std::size_t RadonBlockSystem::domain_size() const { return pixels().size(); }

std::span<const double> RadonBlockSystem::domain_weights() const { return pixels().weights(); }

std::size_t RadonBlockSystem::range_size(int) const { return sinogram().samples_per_block(); }

std::span<const double> RadonBlockSystem::range_weights(int) const {
    return sinogram().block_weights();
}

void RadonBlockSystem::forward(int block, std::span<const double> x, std::span<double> out) const {
    const auto raw = radon_.forward_project(x, block);
    const auto smooth = smooth_radial(raw, kernel_);
    require_size(out.size(), smooth.size(), "RadonBlockSystem::forward output");
    std::copy(smooth.begin(), smooth.end(), out.begin());
}

void RadonBlockSystem::adjoint(int block, std::span<const double> y, std::span<double> out) const {
    require_size(y.size(), sinogram().samples_per_block(), "RadonBlockSystem::adjoint");
    radon_.backproject(smooth_radial(y, kernel_), block, out);
}

// ---------------------------------------------------------------------------

LambdaShiftedSystem::LambdaShiftedSystem(std::shared_ptr<const BlockOperatorSystem> base,
                                         double lambda)
    : base_(std::move(base)), lambda_(lambda) {
    if (!base_)
        throw ConfigError("LambdaShiftedSystem: null base system");
    if (!(lambda > 0.0))
        throw ConfigError("LambdaShiftedSystem: lambda must be > 0");
}

double LambdaShiftedSystem::shift_factor(int block) const {
    return 1.0 / (1.0 + lambda_ * base_->range_measure(block));
}

std::vector<double> LambdaShiftedSystem::shift_data(int block, std::span<const double> y) const {
    require_size(y.size(), base_->range_size(block), "shift_data");
    const double floor = lambda_ * weighted_sum(y, base_->range_weights(block));
    const double c = shift_factor(block);
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        out[i] = c * (y[i] + floor);
    return out;
}

void LambdaShiftedSystem::forward(int block, std::span<const double> x,
                                  std::span<double> out) const {
    base_->forward(block, x, out);
    const double floor = lambda_ * weighted_sum(x, base_->domain_weights());
    const double c = shift_factor(block);
    for (double& v : out)
        v = c * (v + floor);
}

void LambdaShiftedSystem::adjoint(int block, std::span<const double> y,
                                  std::span<double> out) const {
    base_->adjoint(block, y, out);
    const double floor = lambda_ * weighted_sum(y, base_->range_weights(block));
    const double c = shift_factor(block);
    const auto w = base_->domain_weights();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = w[i] > 0.0 ? c * (out[i] + floor) : 0.0;
}

double LambdaShiftedSystem::kernel_lower_bound() const {
    double m = std::numeric_limits<double>::infinity();
    for (int j = 0; j < num_blocks(); ++j)
        m = std::min(m, (base_->kernel_lower_bound() + lambda_) * shift_factor(j));
    return m;
}

double LambdaShiftedSystem::kernel_upper_bound() const {
    double M = 0.0;
    for (int j = 0; j < num_blocks(); ++j)
        M = std::max(M, (base_->kernel_upper_bound() + lambda_) * shift_factor(j));
    return M;
}

// ---------------------------------------------------------------------------

DenseBlockSystem::DenseBlockSystem(std::vector<double> domain_weights, std::vector<Block> blocks)
    : domain_weights_(std::move(domain_weights)), blocks_(std::move(blocks)) {
    if (blocks_.empty())
        throw ConfigError("DenseBlockSystem: no blocks");
    for (const auto& b : blocks_)
        require_size(b.kernel.size(), b.weights.size() * domain_weights_.size(),
                     "DenseBlockSystem kernel");
}

DenseBlockSystem DenseBlockSystem::identity(std::size_t n, double weight) {
    Block b;
    b.weights.assign(n, weight);
    b.kernel.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        b.kernel[i * n + i] = 1.0 / weight;
    return DenseBlockSystem(std::vector<double>(n, weight), {std::move(b)});
}

std::size_t DenseBlockSystem::range_size(int block) const {
    return blocks_.at(static_cast<std::size_t>(block)).weights.size();
}

std::span<const double> DenseBlockSystem::range_weights(int block) const {
    return blocks_.at(static_cast<std::size_t>(block)).weights;
}

void DenseBlockSystem::forward(int block, std::span<const double> x, std::span<double> out) const {
    const auto& b = blocks_.at(static_cast<std::size_t>(block));
    const std::size_t n = domain_weights_.size();
    require_size(x.size(), n, "DenseBlockSystem::forward");
    require_size(out.size(), b.weights.size(), "DenseBlockSystem::forward output");
    for (std::size_t s = 0; s < b.weights.size(); ++s) {
        double acc = 0.0;
        for (std::size_t t = 0; t < n; ++t)
            acc += domain_weights_[t] * b.kernel[s * n + t] * x[t];
        out[s] = acc;
    }
}

void DenseBlockSystem::adjoint(int block, std::span<const double> y, std::span<double> out) const {
    const auto& b = blocks_.at(static_cast<std::size_t>(block));
    const std::size_t n = domain_weights_.size();
    require_size(y.size(), b.weights.size(), "DenseBlockSystem::adjoint");
    require_size(out.size(), n, "DenseBlockSystem::adjoint output");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t s = 0; s < b.weights.size(); ++s)
        for (std::size_t t = 0; t < n; ++t)
            out[t] += b.weights[s] * b.kernel[s * n + t] * y[s];
}

double DenseBlockSystem::kernel_lower_bound() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : blocks_)
        m = std::min(m, *std::min_element(b.kernel.begin(), b.kernel.end()));
    return m;
}

double DenseBlockSystem::kernel_upper_bound() const {
    double M = 0.0;
    for (const auto& b : blocks_)
        M = std::max(M, *std::max_element(b.kernel.begin(), b.kernel.end()));
    return M;
}

// ---------------------------------------------------------------------------

double gamma_from_bounds(double m, double M, double m1, double M1) {
    if (!(m > 0.0 && M > 0.0 && m1 > 0.0 && M1 > 0.0))
        throw DomainError("gamma requires positive m, M, m1, M1");
    return std::max(std::abs(std::log(m1 / M)), std::abs(std::log(M1 / m)));
}

double EffectiveBounds::gamma() const { return gamma_from_bounds(m, M, m1, M1); }

EffectiveBounds effective_bounds(const BlockOperatorSystem& system,
                                 std::span<const std::vector<double>> data) {
    if (data.size() != static_cast<std::size_t>(system.num_blocks()))
        throw ShapeError("effective_bounds: one data block per operator block required");
    EffectiveBounds b;
    b.m = system.kernel_lower_bound();
    b.M = system.kernel_upper_bound();
    b.m1 = std::numeric_limits<double>::infinity();
    b.M1 = 0.0;
    for (const auto& y : data) {
        if (y.empty())
            throw ShapeError("effective_bounds: empty data block");
        const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
        b.m1 = std::min(b.m1, *lo);
        b.M1 = std::max(b.M1, *hi);
    }
    if (!(b.m1 > 0.0))
        throw DomainError("effective_bounds: data vanish somewhere (m1 = 0), gamma undefined");
    return b;
}

} // namespace loposem
