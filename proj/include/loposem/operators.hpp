#pragma once

// Block operators A_j : densities on Omega -> data on Sigma_j, their
// quadrature-weighted adjoints, and the concrete instance used throughout:
// the discretized circular Radon transform with radial smoothing and the
// lambda-shift that bounds the kernel away from zero.

#include "loposem/kl_core.hpp"

#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace loposem {

/// Contract shared by every solver input.
///
/// The domain carries quadrature weights w_t and block j's range carries
/// weights w_s. For a kernel a_j(s,t) the forward map is
/// (A_j x)_s = sum_t w_t a_j(s,t) x_t and the adjoint is
/// (A_j^* y)_t = sum_s w_s a_j(s,t) y_s; implementations may approximate the
/// latter, but adjoint(1) must equal 1 on the support of the domain weights.
class BlockOperatorSystem {
public:
    virtual ~BlockOperatorSystem() = default;

    virtual int num_blocks() const = 0;
    virtual std::size_t domain_size() const = 0;
    virtual std::span<const double> domain_weights() const = 0;
    virtual std::size_t range_size(int block) const = 0;
    virtual std::span<const double> range_weights(int block) const = 0;

    virtual void forward(int block, std::span<const double> x, std::span<double> out) const = 0;
    virtual void adjoint(int block, std::span<const double> y, std::span<double> out) const = 0;

    /// Bounds m <= a_j(s,t) <= M of the effective kernel.
    virtual double kernel_lower_bound() const = 0;
    virtual double kernel_upper_bound() const = 0;

    std::vector<double> forward(int block, std::span<const double> x) const;
    std::vector<double> adjoint(int block, std::span<const double> y) const;
    /// sum_s w_s over block j.
    double range_measure(int block) const;
};

/// Triangular hat Phi(s) = max(0, eps - |s|) / eps^2 with eps = 2K/n_r,
/// sampled at the radial spacing and renormalized to a partition of unity.
class SmoothingKernel {
public:
    SmoothingKernel(int halfwidth, int n_r);

    int halfwidth() const noexcept { return halfwidth_; }
    int n_r() const noexcept { return n_r_; }
    double epsilon() const noexcept { return 2.0 * halfwidth_ / n_r_; }
    double profile(double s) const noexcept;
    /// Sum of (2/n_r) Phi(2d/n_r) before renormalization.
    double raw_weight_sum() const noexcept { return raw_sum_; }
    /// Weights for offsets d = -K..K, stored at index d + K.
    std::span<const double> weights() const noexcept { return weights_; }

private:
    int halfwidth_;
    int n_r_;
    double raw_sum_ = 0.0;
    std::vector<double> weights_;
};

/// Convolves each row (fixed angle) of a rows x (n_r + 1) array with the
/// kernel, treating radii outside {0..n_r} as zero.
std::vector<double> smooth_radial(std::span<const double> values, const SmoothingKernel& kernel);

/// Discretized circular means over circles centred on the unit circle.
class CircularRadon {
public:
    CircularRadon(std::shared_ptr<const PixelGrid> pixels,
                  std::shared_ptr<const SinogramGrid> sinogram);

    const PixelGrid& pixels() const noexcept { return *pixels_; }
    const SinogramGrid& sinogram() const noexcept { return *sinogram_; }
    const std::shared_ptr<const PixelGrid>& pixels_ptr() const noexcept { return pixels_; }
    const std::shared_ptr<const SinogramGrid>& sinogram_ptr() const noexcept { return sinogram_; }

    /// Quadrature points on the circle of radius r: max(8, ceil(3 r n_t)).
    int circle_points(double r) const noexcept;

    /// Bilinear interpolant of node values at p, zero outside the square.
    double interpolate(std::span<const double> x, double px, double py) const noexcept;

    /// (r N / n) sum_k T(x)(sigma(phi) + r omega_k) at every sample of the block.
    void forward_project(std::span<const double> x, int block, std::span<double> out) const;
    std::vector<double> forward_project(std::span<const double> x, int block) const;

    /// Block average of the radially interpolated data along |t - sigma(phi)|;
    /// zero off Omega.
    void backproject(std::span<const double> y, int block, std::span<double> out) const;
    std::vector<double> backproject(std::span<const double> y, int block) const;

    /// Largest entry of the discrete kernel over all samples and Omega nodes,
    /// i.e. the largest forward value of a single-node unit-mass density.
    /// Computed once on first use.
    double kernel_max() const;

private:
    std::shared_ptr<const PixelGrid> pixels_;
    std::shared_ptr<const SinogramGrid> sinogram_;
    // Unit circle tables indexed by radial sample.
    std::vector<std::vector<double>> circle_cos_;
    std::vector<std::vector<double>> circle_sin_;

    mutable std::once_flag kernel_max_once_;
    mutable double kernel_max_ = 0.0;
};

/// A_j = I_Phi M_j and A_j^* = B_j I_Phi on the circular Radon discretization.
class RadonBlockSystem final : public BlockOperatorSystem {
public:
    RadonBlockSystem(std::shared_ptr<const PixelGrid> pixels,
                     std::shared_ptr<const SinogramGrid> sinogram, SmoothingKernel kernel);

    const CircularRadon& radon() const noexcept { return radon_; }
    const SmoothingKernel& kernel() const noexcept { return kernel_; }
    const PixelGrid& pixels() const noexcept { return radon_.pixels(); }
    const SinogramGrid& sinogram() const noexcept { return radon_.sinogram(); }
    const std::shared_ptr<const PixelGrid>& pixels_ptr() const noexcept { return radon_.pixels_ptr(); }
    const std::shared_ptr<const SinogramGrid>& sinogram_ptr() const noexcept {
        return radon_.sinogram_ptr();
    }

    int num_blocks() const override;
    std::size_t domain_size() const override;
    std::span<const double> domain_weights() const override;
    std::size_t range_size(int block) const override;
    std::span<const double> range_weights(int block) const override;
    void forward(int block, std::span<const double> x, std::span<double> out) const override;
    void adjoint(int block, std::span<const double> y, std::span<double> out) const override;
    double kernel_lower_bound() const override { return 0.0; }
    double kernel_upper_bound() const override { return radon_.kernel_max(); }

    using BlockOperatorSystem::adjoint;
    using BlockOperatorSystem::forward;

private:
    CircularRadon radon_;
    SmoothingKernel kernel_;
};

/// A_j^(lambda) x = (A_j x + lambda int x) / (1 + lambda |Sigma_j|) and the
/// matching adjoint and data shift.
class LambdaShiftedSystem final : public BlockOperatorSystem {
public:
    LambdaShiftedSystem(std::shared_ptr<const BlockOperatorSystem> base, double lambda);

    const BlockOperatorSystem& base() const noexcept { return *base_; }
    double lambda() const noexcept { return lambda_; }
    /// 1 / (1 + lambda |Sigma_j|).
    double shift_factor(int block) const;

    /// y_j^(lambda) = (y_j + lambda int y_j) / (1 + lambda |Sigma_j|).
    std::vector<double> shift_data(int block, std::span<const double> y) const;

    int num_blocks() const override { return base_->num_blocks(); }
    std::size_t domain_size() const override { return base_->domain_size(); }
    std::span<const double> domain_weights() const override { return base_->domain_weights(); }
    std::size_t range_size(int block) const override { return base_->range_size(block); }
    std::span<const double> range_weights(int block) const override {
        return base_->range_weights(block);
    }
    void forward(int block, std::span<const double> x, std::span<double> out) const override;
    void adjoint(int block, std::span<const double> y, std::span<double> out) const override;
    /// lambda / (1 + lambda |Sigma_j|) on top of the base lower bound (minimum over blocks).
    double kernel_lower_bound() const override;
    /// (M_raw + lambda) / (1 + lambda |Sigma_j|) (maximum over blocks).
    double kernel_upper_bound() const override;

    using BlockOperatorSystem::adjoint;
    using BlockOperatorSystem::forward;

private:
    std::shared_ptr<const BlockOperatorSystem> base_;
    double lambda_;
};

/// Explicit kernel matrices; for small problems and tests.
class DenseBlockSystem final : public BlockOperatorSystem {
public:
    struct Block {
        std::vector<double> weights; // range quadrature
        std::vector<double> kernel;  // a(s,t), row-major [s][t]
    };

    DenseBlockSystem(std::vector<double> domain_weights, std::vector<Block> blocks);

    /// One block, A = identity on n cells of the given weight.
    static DenseBlockSystem identity(std::size_t n, double weight = 1.0);

    int num_blocks() const override { return static_cast<int>(blocks_.size()); }
    std::size_t domain_size() const override { return domain_weights_.size(); }
    std::span<const double> domain_weights() const override { return domain_weights_; }
    std::size_t range_size(int block) const override;
    std::span<const double> range_weights(int block) const override;
    void forward(int block, std::span<const double> x, std::span<double> out) const override;
    void adjoint(int block, std::span<const double> y, std::span<double> out) const override;
    double kernel_lower_bound() const override;
    double kernel_upper_bound() const override;

    using BlockOperatorSystem::adjoint;
    using BlockOperatorSystem::forward;

private:
    std::vector<double> domain_weights_;
    std::vector<Block> blocks_;
};

/// Constants of the kernel bound m <= a <= M and the data bound m1 <= y <= M1.
struct EffectiveBounds {
    double m = 0.0;
    double M = 0.0;
    double m1 = 0.0;
    double M1 = 0.0;

    double gamma() const;
};

/// gamma = max{|ln(m1/M)|, |ln(M1/m)|}. Throws DomainError unless all four are positive.
double gamma_from_bounds(double m, double M, double m1, double M1);

/// Kernel bounds of `system` and min/max over every block of `data`
/// (already expressed in the system's data space, e.g. shifted).
/// Throws DomainError if m1 == 0.
EffectiveBounds effective_bounds(const BlockOperatorSystem& system,
                                 std::span<const std::vector<double>> data);

} // namespace loposem
