#pragma once

// Grids, densities and Kullback-Leibler functionals.
//
// Every array in the library is paired with a quadrature: a weight per entry
// such that sum(w_i * v_i) approximates the integral of v. Densities live on
// the node grid of the square [-1,1]^2 restricted to the disc Omega of radius
// 1 - epsilon; sinogram data live on angular-sector x radius blocks.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace loposem {

/// Neumaier-compensated sum of w_i * v_i. Fixed summation order, so results
/// are reproducible for a given input.
double weighted_sum(std::span<const double> values, std::span<const double> weights);
double weighted_sum(std::span<const double> values, double weight);

/// d(v,u) = sum_i w_i [v_i ln(v_i/u_i) - v_i + u_i] with 0 ln 0 = 0.
///
/// Returns +infinity when some v_i > 0 sits over u_i = 0. Throws ShapeError on
/// size mismatch and DomainError on a negative entry.
double kl_distance(std::span<const double> v, std::span<const double> u,
                   std::span<const double> weights);
double kl_distance(std::span<const double> v, std::span<const double> u, double weight);

/// Checks ||v-u||_1^2 <= (2/3 ||v||_1 + 4/3 ||u||_1) d(v,u) + 1e-12.
bool kl_l1_bound_check(std::span<const double> v, std::span<const double> u,
                       std::span<const double> weights);

/// Rescales `values` to unit weighted mass. Throws DomainError if the mass is
/// not positive or an entry is negative.
std::vector<double> normalize_to_simplex(std::span<const double> values,
                                         std::span<const double> weights);
std::vector<double> normalize_to_simplex(std::span<const double> values, double weight);

/// Quadrature-weighted L1 and L2 distances.
double l1_distance(std::span<const double> a, std::span<const double> b,
                   std::span<const double> weights);
double l2_distance(std::span<const double> a, std::span<const double> b,
                   std::span<const double> weights);

/// Node grid t[i] = -(1,1) + 2 i / n_t, i in {0..n_t}^2, with the mask of
/// nodes strictly inside Omega = B_{1-epsilon}(0). Storage is row-major with
/// the x index fastest.
class PixelGrid {
public:
    PixelGrid(int n_t, double epsilon);

    int n_t() const noexcept { return n_t_; }
    int nodes_per_axis() const noexcept { return n_t_ + 1; }
    std::size_t size() const noexcept { return mask_.size(); }
    double epsilon() const noexcept { return epsilon_; }
    double omega_radius() const noexcept { return 1.0 - epsilon_; }
    double cell_measure() const noexcept { return cell_measure_; }
    double spacing() const noexcept { return 2.0 / n_t_; }
    double coord(int i) const noexcept { return -1.0 + 2.0 * i / n_t_; }
    std::size_t index(int ix, int iy) const noexcept {
        return static_cast<std::size_t>(iy) * static_cast<std::size_t>(n_t_ + 1) +
               static_cast<std::size_t>(ix);
    }
    bool inside(std::size_t idx) const noexcept { return mask_[idx] != 0; }
    std::size_t inside_count() const noexcept { return inside_count_; }

    /// Cell measure on Omega nodes, 0 elsewhere.
    std::span<const double> weights() const noexcept { return weights_; }

private:
    int n_t_;
    double epsilon_;
    double cell_measure_;
    std::vector<unsigned char> mask_;
    std::vector<double> weights_;
    std::size_t inside_count_ = 0;
};

/// A nonnegative function on a PixelGrid with unit mass, vanishing off Omega.
class DensityGrid {
public:
    /// Validates the invariants (|mass - 1| <= 1e-9).
    DensityGrid(std::shared_ptr<const PixelGrid> grid, std::vector<double> values);

    /// Zeroes nodes outside Omega and rescales to unit mass.
    static DensityGrid normalized(std::shared_ptr<const PixelGrid> grid,
                                  std::vector<double> values);
    /// Constant density 1/|Omega| in the discrete quadrature.
    static DensityGrid uniform(std::shared_ptr<const PixelGrid> grid);

    const PixelGrid& grid() const noexcept { return *grid_; }
    const std::shared_ptr<const PixelGrid>& grid_ptr() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    double mass() const;

private:
    std::shared_ptr<const PixelGrid> grid_;
    std::vector<double> values_;
};

double kl_distance(const DensityGrid& v, const DensityGrid& u);

/// Sampling of the data domain: N blocks Sigma_j = (2 pi j/N, 2 pi (j+1)/N) x (0,2),
/// each with n_phi angles and n_r + 1 radii. Angles tile [0, 2 pi) uniformly.
class SinogramGrid {
public:
    SinogramGrid(int n_blocks, int n_phi, int n_r);

    int n_blocks() const noexcept { return n_blocks_; }
    int n_phi() const noexcept { return n_phi_; }
    int n_r() const noexcept { return n_r_; }
    int n_angles() const noexcept { return n_blocks_ * n_phi_; }
    int radii_per_angle() const noexcept { return n_r_ + 1; }
    std::size_t samples_per_block() const noexcept {
        return static_cast<std::size_t>(n_phi_) * static_cast<std::size_t>(n_r_ + 1);
    }

    /// Global angle index g in [0, N n_phi).
    double angle(int g) const noexcept;
    double angle(int block, int i_phi) const noexcept { return angle(block * n_phi_ + i_phi); }
    double radius(int i_r) const noexcept { return 2.0 * i_r / n_r_; }

    /// |Sigma_j| = 4 pi / N.
    double block_measure() const noexcept;
    /// |Sigma_j| / (n_phi (n_r + 1)), identical for every sample.
    double sample_weight() const noexcept;
    /// sample_weight() repeated samples_per_block() times.
    std::span<const double> block_weights() const noexcept { return weights_; }

private:
    int n_blocks_;
    int n_phi_;
    int n_r_;
    std::vector<double> weights_;
};

/// Nonnegative data on one block, stored [i_phi][i_r] row-major.
class SinogramBlock {
public:
    SinogramBlock(std::shared_ptr<const SinogramGrid> grid, int block, std::vector<double> values);

    const SinogramGrid& grid() const noexcept { return *grid_; }
    const std::shared_ptr<const SinogramGrid>& grid_ptr() const noexcept { return grid_; }
    int block() const noexcept { return block_; }
    std::span<const double> values() const noexcept { return values_; }
    double mass() const;
    bool normalized(double tol = 1e-9) const;

    /// Copy rescaled to unit mass.
    SinogramBlock normalized_copy() const;

private:
    std::shared_ptr<const SinogramGrid> grid_;
    int block_;
    std::vector<double> values_;
};

double kl_distance(const SinogramBlock& v, std::span<const double> u);

} // namespace loposem
