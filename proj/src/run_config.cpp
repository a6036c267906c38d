#include "loposem/run_config.hpp"

#include "loposem/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
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

struct Entry {
    std::string value;
    int line = 0;
};

class Entries {
public:
    void add(const std::string& key, Entry e) {
        if (!entries_.emplace(key, e).second)
            throw ConfigError("duplicate key '" + key + "'", e.line);
    }
    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    const Entry& get(const std::string& key) const { return entries_.at(key); }

    int get_int(const std::string& key, int fallback) const {
        if (!has(key))
            return fallback;
        const auto& e = get(key);
        try {
            std::size_t used = 0;
            const long v = std::stol(e.value, &used);
            if (used != e.value.size())
                throw std::invalid_argument(e.value);
            return static_cast<int>(v);
        } catch (const std::exception&) {
            throw ConfigError(key + ": '" + e.value + "' is not an integer", e.line);
        }
    }

    double get_double(const std::string& key, double fallback) const {
        if (!has(key))
            return fallback;
        const auto& e = get(key);
        return to_double(key, e.value, e.line);
    }

    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key))
            return fallback;
        const auto& e = get(key);
        if (e.value == "true" || e.value == "on" || e.value == "yes" || e.value == "1")
            return true;
        if (e.value == "false" || e.value == "off" || e.value == "no" || e.value == "0")
            return false;
        throw ConfigError(key + ": '" + e.value + "' is not a boolean", e.line);
    }

    static double to_double(const std::string& key, const std::string& s, int line) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size())
                throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(key + ": '" + s + "' is not a number", line);
        }
    }

private:
    std::map<std::string, Entry> entries_;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(trim(cell));
    return out;
}

const std::set<std::string> kKnownKeys = {
    "mode",       "n_t",         "n_r",          "n_angles",   "n_phi",
    "n_blocks",   "K",           "epsilon",      "lambda",     "oversample",
    "max_sim_nodes", "tau",      "tau_schedule", "tau_schedule_slope",
    "gamma_mode", "gamma",       "delta",        "max_cycles", "cycles",
    "noise_level", "counts_scale", "seed",       "phantom",    "output_dir",
    "record_timing",
};

void require(const Entries& e, const std::string& key) {
    if (!e.has(key))
        throw ConfigError("missing required key '" + key + "'");
}

int line_of(const Entries& e, const std::string& key) { return e.has(key) ? e.get(key).line : 0; }

} // namespace

const char* to_string(RunMode mode) {
    switch (mode) {
    case RunMode::em: return "em";
    case RunMode::osem: return "osem";
    case RunMode::loping_osem: return "loping-osem";
    case RunMode::compare: return "compare";
    }
    return "?";
}

SolverConfig RunConfig::solver_config(int n_blocks) const {
    SolverConfig c;
    c.tau = tau;
    c.use_tau_schedule = tau_schedule;
    c.tau_schedule_slope = tau_schedule_slope;
    c.gamma_mode = gamma_mode;
    c.gamma = gamma;
    c.max_cycles = max_cycles;
    c.loping = true;
    (void)n_blocks;
    return c;
}

RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir) {
    Entries e;
    RunConfig cfg;
    std::vector<std::pair<std::string, int>> disc_lines;

    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto text = trim(raw.substr(0, raw.find('#')));
        if (text.empty())
            continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected 'key = value'", line);
        const auto key = trim(text.substr(0, eq));
        const auto value = trim(text.substr(eq + 1));
        if (value.empty())
            throw ConfigError("key '" + key + "' has no value", line);
        if (key == "disc") {
            disc_lines.emplace_back(value, line);
            continue;
        }
        if (!kKnownKeys.count(key))
            throw ConfigError("unknown key '" + key + "'", line);
        e.add(key, {value, line});
    }

    require(e, "mode");
    {
        const auto& m = e.get("mode");
        if (m.value == "em")
            cfg.mode = RunMode::em;
        else if (m.value == "osem")
            cfg.mode = RunMode::osem;
        else if (m.value == "loping-osem")
            cfg.mode = RunMode::loping_osem;
        else if (m.value == "compare")
            cfg.mode = RunMode::compare;
        else
            throw ConfigError("mode: expected em, osem, loping-osem or compare", m.line);
    }

    require(e, "n_t");
    require(e, "n_r");
    cfg.n_t = e.get_int("n_t", 0);
    cfg.n_r = e.get_int("n_r", 0);
    if (cfg.n_t < 2)
        throw ConfigError("n_t must be >= 2", line_of(e, "n_t"));
    if (cfg.n_r < 2)
        throw ConfigError("n_r must be >= 2", line_of(e, "n_r"));

    if (cfg.mode == RunMode::em) {
        if (e.has("n_blocks") && e.get("n_blocks").value != "1")
            throw ConfigError("em mode uses a single block; drop n_blocks or set it to 1",
                              line_of(e, "n_blocks"));
        cfg.n_blocks = {1};
    } else {
        require(e, "n_blocks");
        const auto& nb = e.get("n_blocks");
        for (const auto& item : split_list(nb.value)) {
            const double v = Entries::to_double("n_blocks", item, nb.line);
            if (v < 1 || v != std::floor(v))
                throw ConfigError("n_blocks entries must be positive integers", nb.line);
            cfg.n_blocks.push_back(static_cast<int>(v));
        }
        if (cfg.n_blocks.size() > 1 && cfg.mode != RunMode::compare)
            throw ConfigError("several block counts are only allowed in compare mode", nb.line);
    }

    if (e.has("n_angles") && e.has("n_phi"))
        throw ConfigError("give either n_angles or n_phi, not both", line_of(e, "n_phi"));
    if (e.has("n_angles")) {
        cfg.n_angles = e.get_int("n_angles", 0);
    } else if (e.has("n_phi")) {
        if (cfg.n_blocks.size() != 1)
            throw ConfigError("n_phi needs a single block count; use n_angles", line_of(e, "n_phi"));
        cfg.n_angles = e.get_int("n_phi", 0) * cfg.n_blocks.front();
    } else {
        throw ConfigError("missing required key 'n_angles'");
    }
    if (cfg.n_angles < 1)
        throw ConfigError("number of angles must be >= 1", line_of(e, "n_angles"));
    for (int N : cfg.n_blocks)
        if (cfg.n_angles % N != 0)
            throw ConfigError("n_angles = " + std::to_string(cfg.n_angles) +
                                  " is not divisible by n_blocks = " + std::to_string(N),
                              line_of(e, "n_blocks"));

    cfg.kernel_halfwidth = e.get_int("K", 1);
    if (cfg.kernel_halfwidth < 1 || 2 * cfg.kernel_halfwidth > cfg.n_r)
        throw ConfigError("K must satisfy 1 <= K <= n_r/2", line_of(e, "K"));
    cfg.epsilon = 2.0 * cfg.kernel_halfwidth / cfg.n_r;
    if (e.has("epsilon")) {
        const double eps = e.get_double("epsilon", 0.0);
        if (std::abs(eps - cfg.epsilon) > 1e-12)
            throw ConfigError("epsilon must equal 2K/n_r = " + std::to_string(cfg.epsilon),
                              line_of(e, "epsilon"));
    }
    if (!(cfg.epsilon < 1.0))
        throw ConfigError("epsilon = 2K/n_r must be < 1", line_of(e, "K"));

    cfg.lambda = e.get_double("lambda", cfg.lambda);
    if (!(cfg.lambda >= 0.0))
        throw ConfigError("lambda must be >= 0", line_of(e, "lambda"));
    cfg.oversample = e.get_int("oversample", cfg.oversample);
    if (cfg.oversample < 2)
        throw ConfigError("oversample must be >= 2", line_of(e, "oversample"));
    if (e.has("max_sim_nodes")) {
        const double v = e.get_double("max_sim_nodes", 0.0);
        if (!(v >= 1.0))
            throw ConfigError("max_sim_nodes must be >= 1", line_of(e, "max_sim_nodes"));
        cfg.max_sim_nodes = static_cast<std::size_t>(v);
    }

    cfg.tau = e.get_double("tau", cfg.tau);
    if (!(cfg.tau > 0.0))
        throw ConfigError("tau must be > 0", line_of(e, "tau"));
    cfg.tau_schedule = e.get_bool("tau_schedule", false);
    if (cfg.tau_schedule && !(cfg.tau > 1.0))
        throw ConfigError("tau_schedule needs tau (the limit tau_inf) > 1", line_of(e, "tau"));
    cfg.tau_schedule_slope = e.get_double("tau_schedule_slope", 0.0);
    if (cfg.tau_schedule_slope < 0.0)
        throw ConfigError("tau_schedule_slope must be >= 0", line_of(e, "tau_schedule_slope"));

    if (e.has("gamma_mode")) {
        try {
            cfg.gamma_mode = gamma_mode_from_string(e.get("gamma_mode").value);
        } catch (const ConfigError& err) {
            throw ConfigError(err.what(), line_of(e, "gamma_mode"));
        }
    } else if (e.has("gamma")) {
        cfg.gamma_mode = GammaMode::explicit_value;
    }
    if (e.has("gamma")) {
        cfg.gamma = e.get_double("gamma", 0.0);
        if (!(*cfg.gamma > 0.0))
            throw ConfigError("gamma must be > 0", line_of(e, "gamma"));
    }
    if (cfg.gamma_mode == GammaMode::explicit_value && !cfg.gamma)
        throw ConfigError("gamma_mode = explicit requires a gamma value", line_of(e, "gamma_mode"));

    if (e.has("delta")) {
        const auto& d = e.get("delta");
        for (const auto& item : split_list(d.value)) {
            const double v = Entries::to_double("delta", item, d.line);
            if (!(v >= 0.0))
                throw ConfigError("delta entries must be >= 0", d.line);
            cfg.delta.push_back(v);
        }
        if (cfg.n_blocks.size() != 1)
            throw ConfigError("explicit delta needs a single block count", d.line);
        if (cfg.delta.size() == 1)
            cfg.delta.assign(static_cast<std::size_t>(cfg.n_blocks.front()), cfg.delta.front());
        if (cfg.delta.size() != static_cast<std::size_t>(cfg.n_blocks.front()))
            throw ConfigError("delta needs one value or one per block", d.line);
    }

    cfg.max_cycles = e.get_int("max_cycles", cfg.max_cycles);
    if (cfg.max_cycles < 1)
        throw ConfigError("max_cycles must be >= 1", line_of(e, "max_cycles"));
    cfg.cycles = e.get_int("cycles", cfg.cycles);
    if (cfg.cycles < 1)
        throw ConfigError("cycles must be >= 1", line_of(e, "cycles"));

    cfg.noise_level = e.get_double("noise_level", 0.0);
    if (!(cfg.noise_level >= 0.0 && cfg.noise_level < 1.0))
        throw ConfigError("noise_level must lie in [0, 1)", line_of(e, "noise_level"));
    if (e.has("counts_scale")) {
        cfg.counts_scale = e.get_double("counts_scale", 0.0);
        if (!(*cfg.counts_scale > 0.0))
            throw ConfigError("counts_scale must be > 0", line_of(e, "counts_scale"));
    }
    if (e.has("seed")) {
        const auto& s = e.get("seed");
        try {
            std::size_t used = 0;
            cfg.seed = std::stoull(s.value, &used);
            if (used != s.value.size() || s.value.front() == '-')
                throw std::invalid_argument(s.value);
        } catch (const std::exception&) {
            throw ConfigError("seed: '" + s.value + "' is not an unsigned integer", s.line);
        }
    }

    if (e.has("phantom")) {
        const auto& p = e.get("phantom");
        std::filesystem::path path = p.value;
        if (path.is_relative())
            path = base_dir / path;
        try {
            cfg.phantom = PhantomSpec::load(path);
        } catch (const ConfigError& err) {
            throw ConfigError(std::string("phantom file: ") + err.what(), p.line);
        }
    }
    for (const auto& [value, l] : disc_lines)
        cfg.phantom.discs.push_back(parse_disc(value, l));
    if (cfg.phantom.discs.empty())
        throw ConfigError("missing required key 'disc' (or 'phantom')");
    const double omega = 1.0 - cfg.epsilon;
    for (std::size_t i = 0; i < cfg.phantom.discs.size(); ++i) {
        const auto& d = cfg.phantom.discs[i];
        if (std::hypot(d.cx, d.cy) + d.radius > omega)
            throw ConfigError("disc " + std::to_string(i + 1) + " reaches outside Omega (radius " +
                                  std::to_string(omega) + ")",
                              i < disc_lines.size() ? 0 : 0);
    }

    if (e.has("output_dir"))
        cfg.output_dir = e.get("output_dir").value;
    cfg.record_timing = e.get_bool("record_timing", false);
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    return parse_run_config(in, path.parent_path());
}

} // namespace loposem
