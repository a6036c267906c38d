#pragma once

// EM, OS-EM and loping OS-EM on a BlockOperatorSystem.
//
// Iterates are plain arrays over the system's domain, kept on the simplex
// {x >= 0, sum_t w_t x_t = 1}. Each step k works on block [k] = k mod N.

#include "loposem/operators.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace loposem {

enum class GammaMode {
    explicit_value, ///< use SolverConfig::gamma
    computed,       ///< from effective_bounds of the system and data
    l2_adaptive,    ///< L2 loping test, no gamma needed
};

const char* to_string(GammaMode mode);
GammaMode gamma_mode_from_string(const std::string& s);

struct SolverConfig {
    double tau = 1.5;
    /// Replace tau by tau_schedule(noise level, tau).
    bool use_tau_schedule = false;
    /// Slope of the schedule; 0 selects 25 / tau.
    double tau_schedule_slope = 0.0;
    /// Relative noise level fed to the schedule; defaults to mean(delta_j / ||y_j||_1).
    std::optional<double> schedule_noise_level;
    GammaMode gamma_mode = GammaMode::computed;
    std::optional<double> gamma;
    /// Noise bounds delta_j in the system's data space (L1, or L2 in l2_adaptive mode).
    std::vector<double> delta;
    int max_cycles = 200;
    bool loping = true;
};

struct StepRecord {
    long step = 0;
    int cycle = 0;
    int block = 0;
    bool performed = false;
    /// f_[k](x_k) = d(y_[k], A_[k] x_k).
    double residual = 0.0;
    /// d(x_{k+1}, x_k).
    double step_kl = 0.0;
    /// d(x*, x_k), NaN without ground truth.
    double error_kl = std::numeric_limits<double>::quiet_NaN();
    /// f_[k](x_{k+1}), NaN unless requested.
    double residual_after = std::numeric_limits<double>::quiet_NaN();
    /// Mass of the multiplicative update before renormalization (1 when loped).
    double mass_before_normalization = 1.0;
};

struct IterationTrace {
    int num_blocks = 1;
    std::vector<StepRecord> steps;
    /// d(x*, x_K) for the iterate after the last step, NaN without ground truth.
    double final_error = std::numeric_limits<double>::quiet_NaN();

    int cycles() const;
    std::vector<int> performed_per_cycle() const;
    /// d(x*, x_{cN}); c = 0 is the initial guess.
    double error_after_cycle(int c) const;

    /// CSV with header `step,cycle,block,performed,residual,step_kl,error_kl`.
    void write_csv(std::ostream& out) const;
    void write_csv(const std::string& path) const;
};

struct StopReport {
    /// Stopping index, a multiple of N; empty if max_cycles was reached first.
    std::optional<long> k_star;
    int cycles_run = 0;
    int max_cycles = 0;
    double tau = 0.0;
    std::optional<double> gamma;
    GammaMode gamma_mode = GammaMode::computed;
    std::vector<double> delta;
    /// Loping thresholds per block (tau gamma delta_j in L1 modes).
    std::vector<double> thresholds;
    /// d(y_j, A_j x_final) per block.
    std::vector<double> final_residuals;
    /// d(x*, x_0) and N d(x*, x_0) / ((tau - 1) gamma delta_min), when available.
    std::optional<double> initial_error;
    std::optional<double> step_bound;

    bool stopped() const noexcept { return k_star.has_value(); }
    /// Flat key=value lines.
    void write(std::ostream& out) const;
    void write(const std::string& path) const;
};

struct RunOptions {
    /// Ground truth for error tracking.
    std::optional<std::span<const double>> x_star;
    /// Also evaluate f_[k](x_{k+1}) (one extra forward projection per step).
    bool residual_after = false;
};

struct RunResult {
    std::vector<double> x;
    IterationTrace trace;
    StopReport report;
};

/// One EM step P_j(x) = x A_j^*(y_j / A_j x), renormalized to unit mass.
/// `mass_before` receives the pre-normalization mass when non-null.
std::vector<double> em_step(const BlockOperatorSystem& system, int block,
                            std::span<const double> x, std::span<const double> y,
                            double* mass_before = nullptr);

/// f_j(x) = d(y_j, A_j x).
double kl_residual(const BlockOperatorSystem& system, int block, std::span<const double> x,
                   std::span<const double> y);

/// cycles * N EM steps through the blocks in order. N = 1 is plain EM.
RunResult osem_run(const BlockOperatorSystem& system, std::span<const std::vector<double>> data,
                   std::span<const double> x0, int cycles, const RunOptions& options = {});

/// Loping OS-EM with the discrepancy-type stop: the first full cycle in which
/// every step is loped ends the run at k* = (start of that cycle).
RunResult loping_osem_run(const BlockOperatorSystem& system,
                          std::span<const std::vector<double>> data, std::span<const double> x0,
                          const SolverConfig& config, const RunOptions& options = {});

/// f_j(x) > tau delta_j ||ln(y_j / A_j x)||_L2.
bool loping_condition_l2(const BlockOperatorSystem& system, int block, std::span<const double> x,
                         std::span<const double> y, double delta, double tau);

/// tau(delta) = tau_inf / (1 + c delta), c = 25 / tau_inf unless given.
double tau_schedule(double delta_level, double tau_inf, double slope = 0.0);

/// Gamma according to config.gamma_mode (explicit > computed); empty in L2 mode.
std::optional<double> resolve_gamma(const SolverConfig& config, const BlockOperatorSystem& system,
                                    std::span<const std::vector<double>> data);

struct AuditReport {
    double tolerance = 0.0;
    /// Steps k with d(x*, x_{k+1}) > d(x*, x_k) + tolerance.
    std::vector<long> violations;
    double max_increase = 0.0;
    std::optional<bool> stop_bound_ok;

    bool clean() const noexcept {
        return violations.empty() && stop_bound_ok.value_or(true);
    }
};

/// Checks the error sequence recorded in `trace` for monotone decrease and,
/// given a stop report with a bound, k* <= bound.
AuditReport monotonicity_audit(const IterationTrace& trace, double tolerance,
                               const StopReport* report = nullptr);

} // namespace loposem
