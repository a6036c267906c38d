#include "loposem/solvers.hpp"

#include "loposem/error.hpp"
#include "loposem/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>

namespace loposem {

namespace {

void check_problem(const BlockOperatorSystem& system, std::span<const std::vector<double>> data,
                   std::span<const double> x0) {
    if (data.size() != static_cast<std::size_t>(system.num_blocks()))
        throw ShapeError("solver: expected " + std::to_string(system.num_blocks()) +
                         " data blocks, got " + std::to_string(data.size()));
    for (int j = 0; j < system.num_blocks(); ++j)
        if (data[static_cast<std::size_t>(j)].size() != system.range_size(j))
            throw ShapeError("solver: data block " + std::to_string(j) + " has wrong size");
    if (x0.size() != system.domain_size())
        throw ShapeError("solver: initial guess has wrong size");
}

// x * A^*(y / ax), renormalized. `ax` is A_j x, already evaluated.
std::vector<double> multiplicative_update(const BlockOperatorSystem& system, int block,
                                          std::span<const double> x, std::span<const double> y,
                                          std::span<const double> ax, double* mass_before) {
    std::vector<double> ratio(y.size());
    for (std::size_t s = 0; s < y.size(); ++s) {
        if (ax[s] > 0.0)
            ratio[s] = y[s] / ax[s];
        else if (y[s] == 0.0)
            ratio[s] = 0.0;
        else
            throw NumericalError("em_step: forward projection vanishes where data are positive "
                                 "(block " + std::to_string(block) + ")");
    }
    auto next = system.adjoint(block, ratio);
    for (std::size_t t = 0; t < next.size(); ++t)
        next[t] *= x[t];
    const double mass = weighted_sum(next, system.domain_weights());
    if (!std::isfinite(mass) || !(mass > 0.0))
        throw NumericalError("em_step: update has non-finite or zero mass");
    if (mass_before)
        *mass_before = mass;
    for (double& v : next)
        v /= mass;
    return next;
}

using StepPredicate =
    std::function<bool(int block, double residual, std::span<const double> x,
                       std::span<const double> ax)>;

RunResult run_cycles(const BlockOperatorSystem& system, std::span<const std::vector<double>> data,
                     std::span<const double> x0, int max_cycles, const StepPredicate& take_step,
                     bool stop_on_quiet_cycle, const RunOptions& options) {
    check_problem(system, data, x0);
    if (max_cycles < 0)
        throw ConfigError("solver: cycle count must be >= 0");
    const auto dw = system.domain_weights();
    if (options.x_star && options.x_star->size() != system.domain_size())
        throw ShapeError("solver: ground truth has wrong size");

    const int N = system.num_blocks();
    RunResult result;
    result.trace.num_blocks = N;
    result.report.max_cycles = max_cycles;
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> ax;

    long k = 0;
    for (int cycle = 0; cycle < max_cycles; ++cycle) {
        bool any_performed = false;
        for (int j = 0; j < N; ++j, ++k) {
            const auto& y = data[static_cast<std::size_t>(j)];
            const auto rw = system.range_weights(j);
            ax = system.forward(j, x);

            StepRecord rec;
            rec.step = k;
            rec.cycle = cycle;
            rec.block = j;
            rec.residual = kl_distance(y, ax, rw);
            if (options.x_star)
                rec.error_kl = kl_distance(*options.x_star, x, dw);
            rec.performed = take_step(j, rec.residual, x, ax);

            if (rec.performed) {
                auto next = multiplicative_update(system, j, x, y, ax, &rec.mass_before_normalization);
                rec.step_kl = kl_distance(next, x, dw);
                x = std::move(next);
                if (options.residual_after)
                    rec.residual_after = kl_distance(y, system.forward(j, x), rw);
                any_performed = true;
            } else {
                rec.step_kl = 0.0;
                rec.residual_after = rec.residual;
            }
            result.trace.steps.push_back(rec);
        }
        result.report.cycles_run = cycle + 1;
        if (stop_on_quiet_cycle && !any_performed) {
            result.report.k_star = static_cast<long>(cycle) * N;
            break;
        }
    }
    if (options.x_star)
        result.trace.final_error = kl_distance(*options.x_star, x, dw);

    result.report.final_residuals.resize(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j)
        result.report.final_residuals[static_cast<std::size_t>(j)] =
            kl_residual(system, j, x, data[static_cast<std::size_t>(j)]);
    result.x = std::move(x);
    return result;
}

double log_ratio_l2(std::span<const double> y, std::span<const double> ax,
                    std::span<const double> weights) {
    std::vector<double> logs(y.size());
    for (std::size_t s = 0; s < y.size(); ++s) {
        if (!(y[s] > 0.0 && ax[s] > 0.0))
            throw DomainError("L2 loping test: nonpositive value under the logarithm");
        logs[s] = std::log(y[s] / ax[s]);
    }
    const std::vector<double> zero(y.size(), 0.0);
    return l2_distance(logs, zero, weights);
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            s += ',';
        s += io::format_double(v[i]);
    }
    return s;
}

} // namespace

const char* to_string(GammaMode mode) {
    switch (mode) {
    case GammaMode::explicit_value: return "explicit";
    case GammaMode::computed: return "computed";
    case GammaMode::l2_adaptive: return "l2";
    }
    return "?";
}

GammaMode gamma_mode_from_string(const std::string& s) {
    if (s == "explicit")
        return GammaMode::explicit_value;
    if (s == "computed")
        return GammaMode::computed;
    if (s == "l2" || s == "l2-adaptive")
        return GammaMode::l2_adaptive;
    throw ConfigError("unknown gamma mode '" + s + "' (expected explicit, computed or l2)");
}

// ---------------------------------------------------------------------------

int IterationTrace::cycles() const {
    return steps.empty() ? 0 : steps.back().cycle + 1;
}

std::vector<int> IterationTrace::performed_per_cycle() const {
    std::vector<int> counts(static_cast<std::size_t>(cycles()), 0);
    for (const auto& s : steps)
        if (s.performed)
            ++counts[static_cast<std::size_t>(s.cycle)];
    return counts;
}

double IterationTrace::error_after_cycle(int c) const {
    const auto k = static_cast<std::size_t>(c) * static_cast<std::size_t>(num_blocks);
    if (c < 0 || k > steps.size())
        throw ShapeError("error_after_cycle: cycle out of range");
    return k == steps.size() ? final_error : steps[k].error_kl;
}

void IterationTrace::write_csv(std::ostream& out) const {
    out << "step,cycle,block,performed,residual,step_kl,error_kl\n";
    for (const auto& s : steps) {
        out << s.step << ',' << s.cycle << ',' << s.block << ',' << (s.performed ? 1 : 0) << ','
            << io::format_double(s.residual) << ',' << io::format_double(s.step_kl) << ','
            << io::format_double(s.error_kl) << '\n';
    }
}

void IterationTrace::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw Error("cannot open " + path + " for writing");
    write_csv(out);
}

void StopReport::write(std::ostream& out) const {
    out << "stopped=" << (stopped() ? "true" : "false") << '\n';
    out << "k_star=" << (k_star ? std::to_string(*k_star) : std::string("max_cycles_reached"))
        << '\n';
    out << "cycles_run=" << cycles_run << '\n';
    out << "max_cycles=" << max_cycles << '\n';
    out << "tau=" << io::format_double(tau) << '\n';
    out << "gamma_mode=" << to_string(gamma_mode) << '\n';
    out << "gamma=" << (gamma ? io::format_double(*gamma) : std::string("none")) << '\n';
    out << "delta=" << join(delta) << '\n';
    out << "thresholds=" << join(thresholds) << '\n';
    out << "final_residuals=" << join(final_residuals) << '\n';
    out << "initial_error=" << (initial_error ? io::format_double(*initial_error) : "none") << '\n';
    out << "step_bound=" << (step_bound ? io::format_double(*step_bound) : "none") << '\n';
}

void StopReport::write(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw Error("cannot open " + path + " for writing");
    write(out);
}

// ---------------------------------------------------------------------------

std::vector<double> em_step(const BlockOperatorSystem& system, int block,
                            std::span<const double> x, std::span<const double> y,
                            double* mass_before) {
    if (x.size() != system.domain_size() || y.size() != system.range_size(block))
        throw ShapeError("em_step: argument sizes do not match the system");
    const auto ax = system.forward(block, x);
    return multiplicative_update(system, block, x, y, ax, mass_before);
}

double kl_residual(const BlockOperatorSystem& system, int block, std::span<const double> x,
                   std::span<const double> y) {
    const auto ax = system.forward(block, x);
    return kl_distance(y, ax, system.range_weights(block));
}

RunResult osem_run(const BlockOperatorSystem& system, std::span<const std::vector<double>> data,
                   std::span<const double> x0, int cycles, const RunOptions& options) {
    auto always = [](int, double, std::span<const double>, std::span<const double>) {
        return true;
    };
    auto result = run_cycles(system, data, x0, cycles, always, false, options);
    result.report.tau = 0.0;
    if (options.x_star)
        result.report.initial_error = kl_distance(*options.x_star, x0, system.domain_weights());
    return result;
}

bool loping_condition_l2(const BlockOperatorSystem& system, int block, std::span<const double> x,
                         std::span<const double> y, double delta, double tau) {
    const auto ax = system.forward(block, x);
    const auto w = system.range_weights(block);
    const double lhs = kl_distance(y, ax, w);
    return lhs > tau * delta * log_ratio_l2(y, ax, w);
}

double tau_schedule(double delta_level, double tau_inf, double slope) {
    if (!(tau_inf > 1.0))
        throw ConfigError("tau_schedule: tau_inf must be > 1");
    if (!(delta_level >= 0.0))
        throw ConfigError("tau_schedule: noise level must be >= 0");
    if (slope < 0.0)
        throw ConfigError("tau_schedule: slope must be >= 0");
    const double c = slope > 0.0 ? slope : 25.0 / tau_inf;
    return tau_inf / (1.0 + c * delta_level);
}

std::optional<double> resolve_gamma(const SolverConfig& config, const BlockOperatorSystem& system,
                                    std::span<const std::vector<double>> data) {
    switch (config.gamma_mode) {
    case GammaMode::l2_adaptive:
        return std::nullopt;
    case GammaMode::explicit_value:
        if (!config.gamma || !(*config.gamma > 0.0))
            throw ConfigError("explicit gamma mode requires gamma > 0");
        return config.gamma;
    case GammaMode::computed:
        if (config.gamma)
            return config.gamma;
        return effective_bounds(system, data).gamma();
    }
    return std::nullopt;
}

RunResult loping_osem_run(const BlockOperatorSystem& system,
                          std::span<const std::vector<double>> data, std::span<const double> x0,
                          const SolverConfig& config, const RunOptions& options) {
    check_problem(system, data, x0);
    const int N = system.num_blocks();
    std::vector<double> delta = config.delta;
    if (delta.empty())
        delta.assign(static_cast<std::size_t>(N), 0.0);
    if (delta.size() != static_cast<std::size_t>(N))
        throw ConfigError("loping: expected one noise bound per block");
    for (double d : delta)
        if (!(d >= 0.0))
            throw ConfigError("loping: noise bounds must be >= 0");
    if (!(config.tau > 0.0))
        throw ConfigError("loping: tau must be > 0");

    double tau = config.tau;
    if (config.use_tau_schedule) {
        double level = 0.0;
        if (config.schedule_noise_level) {
            level = *config.schedule_noise_level;
        } else {
            for (int j = 0; j < N; ++j)
                level += delta[static_cast<std::size_t>(j)] /
                         weighted_sum(data[static_cast<std::size_t>(j)], system.range_weights(j));
            level /= N;
        }
        tau = tau_schedule(level, config.tau, config.tau_schedule_slope);
    }

    const bool noisy = std::any_of(delta.begin(), delta.end(), [](double d) { return d > 0.0; });
    const bool l2 = config.gamma_mode == GammaMode::l2_adaptive;
    std::optional<double> gamma;
    if (config.loping && noisy && !l2)
        gamma = resolve_gamma(config, system, data);

    std::vector<double> thresholds(static_cast<std::size_t>(N), 0.0);
    if (gamma)
        for (int j = 0; j < N; ++j)
            thresholds[static_cast<std::size_t>(j)] = tau * *gamma * delta[static_cast<std::size_t>(j)];

    StepPredicate take_step;
    if (!config.loping) {
        take_step = [](int, double, std::span<const double>, std::span<const double>) {
            return true;
        };
    } else if (l2) {
        take_step = [&](int j, double residual, std::span<const double>,
                        std::span<const double> ax) {
            const double d = delta[static_cast<std::size_t>(j)];
            if (d == 0.0)
                return residual > 0.0;
            return residual > tau * d * log_ratio_l2(data[static_cast<std::size_t>(j)], ax,
                                                     system.range_weights(j));
        };
    } else {
        take_step = [&](int j, double residual, std::span<const double>, std::span<const double>) {
            return residual > thresholds[static_cast<std::size_t>(j)];
        };
    }

    auto result = run_cycles(system, data, x0, config.max_cycles, take_step, config.loping, options);
    auto& rep = result.report;
    rep.tau = tau;
    rep.gamma = gamma;
    rep.gamma_mode = config.gamma_mode;
    rep.delta = delta;
    if (l2 && config.loping) {
        for (int j = 0; j < N; ++j) {
            const auto& y = data[static_cast<std::size_t>(j)];
            thresholds[static_cast<std::size_t>(j)] =
                tau * delta[static_cast<std::size_t>(j)] *
                log_ratio_l2(y, system.forward(j, result.x), system.range_weights(j));
        }
    }
    rep.thresholds = thresholds;
    if (options.x_star) {
        rep.initial_error = kl_distance(*options.x_star, x0, system.domain_weights());
        const double delta_min = *std::min_element(delta.begin(), delta.end());
        if (gamma && tau > 1.0 && delta_min > 0.0)
            rep.step_bound = N * *rep.initial_error / ((tau - 1.0) * *gamma * delta_min);
    }
    return result;
}

AuditReport monotonicity_audit(const IterationTrace& trace, double tolerance,
                               const StopReport* report) {
    AuditReport audit;
    audit.tolerance = tolerance;
    for (std::size_t k = 0; k < trace.steps.size(); ++k) {
        const double before = trace.steps[k].error_kl;
        const double after = k + 1 < trace.steps.size() ? trace.steps[k + 1].error_kl
                                                        : trace.final_error;
        if (std::isnan(before) || std::isnan(after))
            continue;
        const double increase = after - before;
        audit.max_increase = std::max(audit.max_increase, increase);
        if (increase > tolerance)
            audit.violations.push_back(trace.steps[k].step);
    }
    if (report && report->k_star && report->step_bound)
        audit.stop_bound_ok = static_cast<double>(*report->k_star) <= *report->step_bound;
    return audit;
}

} // namespace loposem
