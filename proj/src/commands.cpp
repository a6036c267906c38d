#include "loposem/commands.hpp"

#include "loposem/error.hpp"
#include "loposem/experiment.hpp"
#include "loposem/io.hpp"
#include "loposem/run_config.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace loposem::cli {

namespace fs = std::filesystem;
using io::format_double;

namespace {

// Thrown when an assumption of the method fails before or during a run.
struct AssumptionViolation : Error {
    using Error::Error;
};

std::string join(std::span<const double> v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            s += ',';
        s += format_double(v[i]);
    }
    return s;
}

RunConfig load(const fs::path& path, const Overrides& ov) {
    auto cfg = load_run_config(path);
    if (ov.output_dir)
        cfg.output_dir = *ov.output_dir;
    if (ov.seed)
        cfg.seed = *ov.seed;
    return cfg;
}

// Everything shared by the runs of one config: grid, ground truth and one
// noise realization on the full angular grid.
struct Problem {
    std::shared_ptr<const PixelGrid> pixels;
    std::vector<double> x_star;
    std::vector<SinogramBlock> clean;
    std::vector<SinogramBlock> data;
    std::optional<NoisyData> noise;
};

Problem make_problem(const RunConfig& cfg) {
    Problem p;
    p.pixels = std::make_shared<const PixelGrid>(cfg.n_t, cfg.epsilon);
    const auto truth = render_phantom(cfg.phantom, p.pixels);
    p.x_star.assign(truth.values().begin(), truth.values().end());
    const auto full = std::make_shared<const SinogramGrid>(1, cfg.n_angles, cfg.n_r);
    SimulationOptions sim;
    sim.oversample = cfg.oversample;
    sim.max_nodes = cfg.max_sim_nodes;
    p.clean = simulate_data(cfg.phantom, *p.pixels, full, cfg.kernel_halfwidth, sim);
    if (cfg.noise_level > 0.0) {
        NoiseSpec spec;
        spec.level = cfg.noise_level;
        spec.counts_scale = cfg.counts_scale;
        spec.seed = cfg.seed;
        p.noise = add_poisson_noise(p.clean, spec);
        p.data = p.noise->blocks;
    } else {
        p.data = p.clean;
    }
    return p;
}

// The system for one block count, with data and noise bounds in its space.
struct Setup {
    int n_blocks = 1;
    std::shared_ptr<const RadonBlockSystem> base;
    std::shared_ptr<const LambdaShiftedSystem> shifted;
    std::vector<SinogramBlock> raw;
    std::vector<std::vector<double>> data;
    std::vector<double> delta_raw;
    std::vector<double> delta_l1;
    std::vector<double> delta_l2;

    const BlockOperatorSystem& system() const {
        return shifted ? static_cast<const BlockOperatorSystem&>(*shifted) : *base;
    }
};

Setup make_setup(const RunConfig& cfg, const Problem& p, int N) {
    Setup s;
    s.n_blocks = N;
    const auto grid = std::make_shared<const SinogramGrid>(N, cfg.n_angles / N, cfg.n_r);
    s.base = std::make_shared<const RadonBlockSystem>(
        p.pixels, grid, SmoothingKernel(cfg.kernel_halfwidth, cfg.n_r));
    if (cfg.lambda > 0.0)
        s.shifted = std::make_shared<const LambdaShiftedSystem>(s.base, cfg.lambda);

    s.raw = reblock(p.data, grid);
    const auto clean = reblock(p.clean, grid);
    std::vector<double> raw_l2(static_cast<std::size_t>(N), 0.0);
    if (!cfg.delta.empty()) {
        s.delta_raw = cfg.delta;
    } else {
        s.delta_raw.assign(static_cast<std::size_t>(N), 0.0);
        if (p.noise) {
            for (int j = 0; j < N; ++j) {
                const auto w = grid->block_weights();
                const auto uj = static_cast<std::size_t>(j);
                s.delta_raw[uj] = l1_distance(clean[uj].values(), s.raw[uj].values(), w);
                raw_l2[uj] = l2_distance(clean[uj].values(), s.raw[uj].values(), w);
            }
        }
    }

    if (s.shifted) {
        s.data = shifted_values(*s.shifted, s.raw);
        s.delta_l1 = shifted_noise_bounds(*s.shifted, s.delta_raw);
        s.delta_l2.resize(raw_l2.size());
        for (int j = 0; j < N; ++j)
            s.delta_l2[static_cast<std::size_t>(j)] =
                raw_l2[static_cast<std::size_t>(j)] * s.shifted->shift_factor(j);
    } else {
        s.data = block_values(s.raw);
        s.delta_l1 = s.delta_raw;
        s.delta_l2 = raw_l2;
    }
    return s;
}

SolverConfig solver_config(const RunConfig& cfg, const Setup& s) {
    auto sc = cfg.solver_config(s.n_blocks);
    sc.delta = cfg.gamma_mode == GammaMode::l2_adaptive ? s.delta_l2 : s.delta_l1;
    return sc;
}

std::vector<double> uniform_start(const std::shared_ptr<const PixelGrid>& grid) {
    const auto u = DensityGrid::uniform(grid);
    return {u.values().begin(), u.values().end()};
}

void write_reconstruction(const fs::path& path, const Problem& p, std::span<const double> x) {
    DensityGrid g(p.pixels, {x.begin(), x.end()});
    io::write_pgm(path, g);
}

void write_data_csv(const fs::path& path, const Problem& p) {
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path.string());
    out << "angle_index,angle,radius,clean,data\n";
    const auto& grid = p.clean.front().grid();
    const auto clean = p.clean.front().values();
    const auto data = p.data.front().values();
    const int nr = grid.radii_per_angle();
    for (int g = 0; g < grid.n_angles(); ++g)
        for (int i = 0; i < nr; ++i) {
            const auto idx = static_cast<std::size_t>(g) * static_cast<std::size_t>(nr) +
                             static_cast<std::size_t>(i);
            out << g << ',' << format_double(grid.angle(g)) << ','
                << format_double(grid.radius(i)) << ',' << format_double(clean[idx]) << ','
                << format_double(data[idx]) << '\n';
        }
}

void write_noise_txt(const fs::path& path, const RunConfig& cfg, const Problem& p,
                     const std::vector<Setup>& setups) {
    std::ofstream out(path);
    out << "noise_level=" << format_double(cfg.noise_level) << '\n';
    out << "seed=" << cfg.seed << '\n';
    if (p.noise) {
        out << "rng=" << p.noise->rng << '\n';
        out << "counts_scale=" << format_double(p.noise->counts_scale) << '\n';
        out << "realized_level=" << format_double(p.noise->realized_level) << '\n';
    }
    for (const auto& s : setups) {
        out << "delta_N" << s.n_blocks << '=' << join(s.delta_raw) << '\n';
        out << "delta_shifted_N" << s.n_blocks << '=' << join(s.delta_l1) << '\n';
    }
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct TableRow {
    std::string method;
    int n_blocks = 1;
    long cycles = 0;
    double wall = 0.0;
    double error = 0.0;
};

void write_table(const fs::path& path, const std::vector<TableRow>& rows, bool timing) {
    std::ofstream out(path);
    out << "method,N,cycles,wall_seconds,final_kl_error\n";
    for (const auto& r : rows)
        out << r.method << ',' << r.n_blocks << ',' << r.cycles << ','
            << (timing ? format_double(r.wall) : std::string("nan")) << ','
            << format_double(r.error) << '\n';
}

void check_lambda(const RunConfig& cfg) {
    if (!(cfg.lambda > 0.0))
        throw AssumptionViolation(
            "kernel floor violated: lambda = 0 gives a zero kernel floor m; set lambda > 0");
}

class Log {
public:
    Log(std::ostream& out, bool quiet) : out_(out), quiet_(quiet) {}
    template <class T> Log& operator<<(const T& v) {
        if (!quiet_)
            out_ << v;
        return *this;
    }

private:
    std::ostream& out_;
    bool quiet_;
};

std::string method_name(int N, bool loping) {
    std::string base = N == 1 ? "EM" : "OS-EM";
    return loping ? "loping " + base : base;
}

std::string tag(int N, bool loping) {
    return std::string(loping ? "loping_" : "") + (N == 1 ? "em" : "osem") + "_N" +
           std::to_string(N);
}

int run_impl(const RunConfig& cfg, const fs::path& config_path, Log& log, std::ostream& err) {
    const auto t_start = std::chrono::steady_clock::now();
    const auto started = timestamp();
    const fs::path dir = cfg.output_dir;
    fs::remove(dir / "FAILED");

    std::ostringstream summary;
    summary << "started=" << started << '\n';
    summary << "config=" << config_path.string() << '\n';
    summary << "mode=" << to_string(cfg.mode) << '\n';
    summary << "seed=" << cfg.seed << '\n';

    try {
        log << "simulating data (" << cfg.n_t << "x" << cfg.n_t << ", " << cfg.n_angles
            << " angles, noise " << cfg.noise_level << ")\n";
        io::write_pgm(dir / "phantom.pgm",
                      render_phantom(cfg.phantom,
                                     std::make_shared<const PixelGrid>(cfg.n_t, cfg.epsilon)));
        const auto p = make_problem(cfg);
        io::write_pgm(dir / "sinogram.pgm", p.data);
        write_data_csv(dir / "data.csv", p);

        std::vector<Setup> setups;
        for (int N : cfg.n_blocks)
            setups.push_back(make_setup(cfg, p, N));
        write_noise_txt(dir / "noise.txt", cfg, p, setups);

        const auto x0 = uniform_start(p.pixels);
        RunOptions opts;
        opts.x_star = std::span<const double>(p.x_star);

        if (cfg.mode == RunMode::em || cfg.mode == RunMode::osem) {
            const auto& s = setups.front();
            const auto t0 = std::chrono::steady_clock::now();
            auto r = osem_run(s.system(), s.data, x0, cfg.cycles, opts);
            r.report.delta = s.delta_l1;
            const double wall = seconds_since(t0);
            r.trace.write_csv((dir / "trace.csv").string());
            r.report.write((dir / "stop_report.txt").string());
            write_reconstruction(dir / "reconstruction.pgm", p, r.x);
            log << method_name(s.n_blocks, false) << ": " << cfg.cycles
                << " cycles, d(x*, x) = " << r.trace.final_error << '\n';
            summary << "run=" << method_name(s.n_blocks, false) << " N=" << s.n_blocks
                    << " cycles=" << cfg.cycles << " wall_seconds=" << format_double(wall)
                    << " final_kl_error=" << format_double(r.trace.final_error) << '\n';
        } else {
            check_lambda(cfg);
            std::vector<TableRow> rows;
            bool first = true;
            for (const auto& s : setups) {
                const auto t0 = std::chrono::steady_clock::now();
                const auto r = loping_osem_run(s.system(), s.data, x0, solver_config(cfg, s), opts);
                const double wall = seconds_since(t0);
                const long cycles = r.report.k_star ? *r.report.k_star / s.n_blocks
                                                    : static_cast<long>(r.report.cycles_run);
                const double error = kl_distance(p.x_star, r.x, p.pixels->weights());
                if (first) {
                    r.trace.write_csv((dir / "trace.csv").string());
                    r.report.write((dir / "stop_report.txt").string());
                    write_reconstruction(dir / "reconstruction.pgm", p, r.x);
                }
                if (cfg.mode == RunMode::compare) {
                    r.trace.write_csv((dir / ("trace_" + tag(s.n_blocks, true) + ".csv")).string());
                    r.report.write((dir / ("stop_report_" + tag(s.n_blocks, true) + ".txt")).string());
                    write_reconstruction(dir / ("reconstruction_" + tag(s.n_blocks, true) + ".pgm"),
                                         p, r.x);
                }
                rows.push_back({method_name(s.n_blocks, true), s.n_blocks, cycles, wall, error});
                log << method_name(s.n_blocks, true) << " N=" << s.n_blocks << ": "
                    << (r.report.stopped() ? "stopped after " : "no stop within ") << cycles
                    << " cycles, d(x*, x) = " << error << '\n';
                if (!r.report.stopped())
                    err << "warning: " << method_name(s.n_blocks, true) << " N=" << s.n_blocks
                        << " reached max_cycles without stopping\n";

                if (cfg.mode == RunMode::compare) {
                    const auto t1 = std::chrono::steady_clock::now();
                    const auto o = oracle_stopped_osem(s.system(), s.data, x0, p.x_star, cfg.cycles);
                    const double wall_o = seconds_since(t1);
                    o.run.trace.write_csv((dir / ("trace_" + tag(s.n_blocks, false) + ".csv")).string());
                    write_reconstruction(dir / ("reconstruction_" + tag(s.n_blocks, false) + ".pgm"),
                                         p, o.best);
                    rows.push_back(
                        {method_name(s.n_blocks, false), s.n_blocks, o.best_cycle, wall_o, o.best_error});
                    log << method_name(s.n_blocks, false) << " N=" << s.n_blocks
                        << ": best cycle " << o.best_cycle << ", d(x*, x) = " << o.best_error << '\n';
                }
                first = false;
            }
            for (const auto& row : rows)
                summary << "run=" << row.method << " N=" << row.n_blocks << " cycles=" << row.cycles
                        << " wall_seconds=" << format_double(row.wall)
                        << " final_kl_error=" << format_double(row.error) << '\n';
            if (cfg.mode == RunMode::compare)
                write_table(dir / "table.csv", rows, cfg.record_timing);
        }
    } catch (const AssumptionViolation& e) {
        err << "error: " << e.what() << '\n';
        return exit_assumption;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::ofstream(dir / "FAILED") << e.what() << '\n';
        err << "error: numerical failure: " << e.what() << '\n';
        return exit_numerical;
    }

    summary << "finished=" << timestamp() << '\n';
    summary << "wall_seconds=" << format_double(seconds_since(t_start)) << '\n';
    std::ofstream(dir / "summary.txt") << summary.str();
    log << "artifacts written to " << dir.string() << '\n';
    return exit_ok;
}

bool prepare_output(const fs::path& dir, std::ostream& err) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        err << "error: cannot create output directory " << dir.string() << '\n';
        return false;
    }
    return true;
}

} // namespace

int run(const fs::path& config, const Overrides& overrides, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    try {
        cfg = load(config, overrides);
    } catch (const ConfigError& e) {
        err << config.string() << ": " << e.what() << '\n';
        return exit_config;
    }
    if (cfg.mode != RunMode::em && cfg.mode != RunMode::osem && !(cfg.lambda > 0.0)) {
        err << "error: kernel floor violated: lambda = 0 gives a zero kernel floor m; set lambda > 0\n";
        return exit_assumption;
    }
    if (!prepare_output(cfg.output_dir, err))
        return exit_config;
    Log log(out, overrides.quiet);
    return run_impl(cfg, config, log, err);
}

int verify(const fs::path& config, const Overrides& overrides, std::ostream& out,
           std::ostream& err) {
    RunConfig cfg;
    try {
        cfg = load(config, overrides);
    } catch (const ConfigError& e) {
        err << config.string() << ": " << e.what() << '\n';
        return exit_config;
    }
    std::vector<std::string> violated;
    auto report = [&](bool ok, const std::string& name, const std::string& detail) {
        out << (ok ? "[ok]   " : "[FAIL] ") << name << ": " << detail << '\n';
        if (!ok)
            violated.push_back(name);
    };

    try {
        const auto p = make_problem(cfg);
        for (int N : cfg.n_blocks) {
            const auto s = make_setup(cfg, p, N);
            const auto& sys = s.system();
            out << "N = " << N << '\n';

            const std::vector<double> ones(p.pixels->size(), 1.0);
            double adj_defect = 0.0;
            for (int j = 0; j < N; ++j) {
                std::vector<double> ys(sys.range_size(j), 1.0);
                const auto a = sys.adjoint(j, ys);
                for (std::size_t t = 0; t < a.size(); ++t)
                    if (p.pixels->inside(t))
                        adj_defect = std::max(adj_defect, std::abs(a[t] - 1.0));
            }
            report(adj_defect <= 1e-12, "adjoint",
                   "max |A_j^* 1 - 1| on Omega = " + format_double(adj_defect));

            const double m = sys.kernel_lower_bound();
            report(m > 0.0, "kernel floor", "kernel floor m = " + format_double(m));

            double mass_defect = 0.0;
            for (const auto& b : s.raw)
                mass_defect = std::max(mass_defect, std::abs(b.mass() - 1.0));
            report(mass_defect <= 1e-9, "data mass",
                   "max |int y_j - 1| = " + format_double(mass_defect));

            double m1 = std::numeric_limits<double>::infinity();
            double M1 = 0.0;
            for (const auto& y : s.data)
                for (double v : y) {
                    m1 = std::min(m1, v);
                    M1 = std::max(M1, v);
                }
            report(m1 > 0.0, "data floor", "data bounds m1 = " + format_double(m1) +
                                         ", M1 = " + format_double(M1));
            out << "       M = " << format_double(sys.kernel_upper_bound()) << '\n';

            const auto sc = solver_config(cfg, s);
            if (cfg.gamma_mode == GammaMode::l2_adaptive) {
                out << "[ok]   gamma: not used in l2 mode\n";
                out << "       thresholds tau delta_j (L2) = " << join(sc.delta) << '\n';
            } else {
                try {
                    const auto g = resolve_gamma(sc, sys, s.data);
                    report(g.has_value(), "gamma",
                           std::string(to_string(cfg.gamma_mode)) + " gamma = " +
                               (g ? format_double(*g) : std::string("none")));
                    if (g) {
                        std::vector<double> th(sc.delta.size());
                        for (std::size_t j = 0; j < th.size(); ++j)
                            th[j] = cfg.tau * *g * sc.delta[j];
                        out << "       thresholds tau gamma delta_j = " << join(th) << '\n';
                    }
                } catch (const Error& e) {
                    report(false, "gamma", e.what());
                }
            }
            if (std::all_of(sc.delta.begin(), sc.delta.end(), [](double d) { return d == 0.0; }))
                err << "warning: N = " << N
                    << ": all noise bounds are zero, so every threshold is zero and loping is "
                       "vacuous\n";
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const DomainError& e) {
        err << "error: assumption violated: " << e.what() << '\n';
        return exit_assumption;
    } catch (const std::exception& e) {
        err << "error: numerical failure: " << e.what() << '\n';
        return exit_numerical;
    }

    if (!violated.empty()) {
        err << "violated:";
        for (const auto& v : violated)
            err << ' ' << v;
        err << '\n';
        return exit_assumption;
    }
    if (!overrides.quiet)
        out << "all checks passed\n";
    return exit_ok;
}

int phantom(const fs::path& config, const Overrides& overrides, std::ostream& out,
            std::ostream& err) {
    RunConfig cfg;
    try {
        cfg = load(config, overrides);
    } catch (const ConfigError& e) {
        err << config.string() << ": " << e.what() << '\n';
        return exit_config;
    }
    if (!prepare_output(cfg.output_dir, err))
        return exit_config;
    try {
        const auto grid = std::make_shared<const PixelGrid>(cfg.n_t, cfg.epsilon);
        io::write_pgm(cfg.output_dir / "phantom.pgm", render_phantom(cfg.phantom, grid));
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return exit_assumption;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_numerical;
    }
    if (!overrides.quiet)
        out << "wrote " << (cfg.output_dir / "phantom.pgm").string() << '\n';
    return exit_ok;
}

} // namespace loposem::cli
