#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "switchctl/core.hpp"
#include "switchctl/csv.hpp"
#include "switchctl/excitation.hpp"
#include "switchctl/grid.hpp"
#include "switchctl/hybrid.hpp"
#include "switchctl/miocp.hpp"
#include "switchctl/rng.hpp"
#include "switchctl/sha256.hpp"
#include "switchctl/signals.hpp"
#include "switchctl/transport.hpp"

namespace switchctl::scenario {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config field access — every diagnostic names the offending field
// ---------------------------------------------------------------------------

inline const json& require_field(const json& payload, const std::string& name) {
    const auto it = payload.find(name);
    if (it == payload.end())
        throw std::invalid_argument("scenario: missing required field '" + name + "'");
    return *it;
}

inline double as_double(const json& value, const std::string& name) {
    if (!value.is_number())
        throw std::invalid_argument("scenario: field '" + name + "' must be a number");
    return value.get<double>();
}

inline double field_double(const json& payload, const std::string& name) {
    return as_double(require_field(payload, name), name);
}

inline double field_double_or(const json& payload, const std::string& name, double fallback) {
    const auto it = payload.find(name);
    return it == payload.end() ? fallback : as_double(*it, name);
}

inline long long as_integer(const json& value, const std::string& name) {
    if (!value.is_number_integer() && !value.is_number_unsigned())
        throw std::invalid_argument("scenario: field '" + name + "' must be an integer");
    return value.get<long long>();
}

inline int field_int_or(const json& payload, const std::string& name, int fallback) {
    const auto it = payload.find(name);
    return it == payload.end() ? fallback : static_cast<int>(as_integer(*it, name));
}

inline std::string field_string(const json& payload, const std::string& name) {
    const json& value = require_field(payload, name);
    if (!value.is_string())
        throw std::invalid_argument("scenario: field '" + name + "' must be a string");
    return value.get<std::string>();
}

inline std::string field_string_or(const json& payload, const std::string& name,
                                   const std::string& fallback) {
    return payload.contains(name) ? field_string(payload, name) : fallback;
}

inline std::vector<double> as_double_vector(const json& value, const std::string& name) {
    if (!value.is_array())
        throw std::invalid_argument("scenario: field '" + name + "' must be an array of numbers");
    std::vector<double> out;
    out.reserve(value.size());
    for (const auto& entry : value) out.push_back(as_double(entry, name));
    return out;
}

inline std::vector<double> field_vector_or(const json& payload, const std::string& name,
                                           std::vector<double> fallback) {
    const auto it = payload.find(name);
    return it == payload.end() ? std::move(fallback) : as_double_vector(*it, name);
}

inline Eigen::MatrixXd as_matrix(const json& value, const std::string& name) {
    if (!value.is_array() || value.empty())
        throw std::invalid_argument("scenario: field '" + name +
                                    "' must be a non-empty array of rows");
    const auto first = as_double_vector(value.front(), name);
    Eigen::MatrixXd m(value.size(), first.size());
    for (std::size_t r = 0; r < value.size(); ++r) {
        const auto row = as_double_vector(value[r], name);
        if (row.size() != first.size())
            throw std::invalid_argument("scenario: field '" + name + "' has ragged rows");
        for (std::size_t c = 0; c < row.size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
    return m;
}

// ---------------------------------------------------------------------------
// scenario descriptions
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& scenario_kinds() {
    static const std::vector<std::string> kinds{"stability", "pe-wave", "round", "miocp", "hybrid"};
    return kinds;
}

/**
 * @brief One self-contained experiment: a kind selecting the executor, a seed
 * for every random draw, and the kind-specific payload fields.
 */
struct Scenario {
    std::string name; ///< builtin name or config file stem; names the default output dir
    std::string kind;
    std::uint64_t seed = 0;
    std::string out; ///< optional output dir requested by the config itself
    json payload;    ///< full config object (kind/seed included)
};

inline Scenario parse_scenario(const json& config, const std::string& fallback_name) {
    if (!config.is_object())
        throw std::invalid_argument("scenario: top-level config must be a JSON object");
    Scenario sc;
    sc.name = fallback_name;
    sc.kind = field_string(config, "kind");
    const auto& kinds = scenario_kinds();
    if (std::find(kinds.begin(), kinds.end(), sc.kind) == kinds.end()) {
        std::string valid;
        for (const auto& k : kinds) valid += (valid.empty() ? "" : ", ") + k;
        throw std::invalid_argument("scenario: field 'kind' must be one of " + valid + " (got '" +
                                    sc.kind + "')");
    }
    if (config.contains("seed")) {
        const long long seed = as_integer(config.at("seed"), "seed");
        if (seed < 0)
            throw std::invalid_argument("scenario: field 'seed' must be a nonnegative integer");
        sc.seed = static_cast<std::uint64_t>(seed);
    }
    sc.out = field_string_or(config, "out", "");
    sc.payload = config;
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::invalid_argument("scenario: cannot open config file '" + path.string() + "'");
    json config;
    try {
        config = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("scenario: invalid JSON in '" + path.string() +
                                    "': " + e.what());
    }
    return parse_scenario(config, path.stem().string());
}

/**
 * @brief Apply a `--override key=value` pair: dotted keys walk (and create)
 * nested objects; the value is parsed as a JSON literal, falling back to a
 * plain string when it does not parse.
 */
inline void apply_override(json& config, const std::string& key, const std::string& value) {
    if (key.empty()) throw std::invalid_argument("scenario: override key must not be empty");
    json* node = &config;
    std::size_t pos = 0;
    while (true) {
        const std::size_t dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (part.empty())
            throw std::invalid_argument("scenario: override key '" + key +
                                        "' has an empty path segment");
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        node = &(*node)[part];
        if (!node->is_object() && !node->is_null())
            throw std::invalid_argument("scenario: override key '" + key +
                                        "' descends into a non-object field");
        pos = dot + 1;
    }
}

inline const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names{"exsim-stability", "wave-counterexample",
                                                "burgers-track", "value-scan",
                                                "transport-diffusion"};
    return names;
}

/** @brief Preconfigured desk-scale experiments; unknown names list the valid ones. */
inline Scenario builtin_scenario(const std::string& name) {
    json config;
    if (name == "exsim-stability") {
        config = {{"kind", "stability"},    {"seed", 42},          {"system", "exsim"},
                  {"N_x", 200},             {"t_f", 40.0},         {"signals", 100},
                  {"dwell_min", 0.5},       {"dwell_max", 3.0},    {"cfl", 0.9},
                  {"series_signals", 3},    {"series_samples", 400}};
    } else if (name == "wave-counterexample") {
        config = {{"kind", "pe-wave"}, {"seed", 42},          {"b", 0.5},
                  {"T", 2.0},          {"mu", 0.25},          {"N_x", 800},
                  {"t_f", 10.0},       {"pe_horizon", 40.0},  {"full_damping", 1.0}};
    } else if (name == "burgers-track") {
        config = {{"kind", "miocp"},
                  {"seed", 42},
                  {"task", "track"},
                  {"a", 3.0},
                  {"kappa", 8e-3},
                  {"N_x", 100},
                  {"control_cells", 24},
                  {"beta0", "alternating"},
                  {"max_iters", 200},
                  {"gap_dts", {1.0, 0.5, 0.25, 0.125}}};
    } else if (name == "value-scan") {
        config = {{"kind", "miocp"},
                  {"seed", 42},
                  {"task", "value-scan"},
                  {"t_f", 1.0},
                  {"cells", 12},
                  {"lambdas", {-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0}}};
    } else if (name == "transport-diffusion") {
        config = {{"kind", "hybrid"},     {"seed", 42},  {"d", 50},
                  {"c", 1.0},             {"gamma", 1.0}, {"nu", 0.1},
                  {"t_f", 1.0},           {"sweep_points", 21},
                  {"starts", {0.1, 0.5, 0.9}}, {"insertion_grid", 16}};
    } else {
        std::string valid;
        for (const auto& n : builtin_names()) valid += (valid.empty() ? "" : ", ") + n;
        throw std::invalid_argument("scenario: unknown builtin '" + name +
                                    "' (valid names: " + valid + ")");
    }
    return parse_scenario(config, name);
}

// ---------------------------------------------------------------------------
// artifact output
// ---------------------------------------------------------------------------

/**
 * @brief Collects named artifacts in one output directory and finishes with a
 * manifest.json recording the SHA-256 of every file — the anchor for the
 * determinism contract (same config + seed ⇒ identical hashes).
 */
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec)
            throw std::invalid_argument("scenario: cannot create output directory '" +
                                        dir_.string() + "': " + ec.message());
    }

    const std::filesystem::path& dir() const noexcept { return dir_; }

    void write(const std::string& name, const std::string& content) {
        write_file(name, content);
        entries_.push_back(Entry{name, content.size(), sha256_hex(content)});
    }

    void write_json(const std::string& name, const json& value) {
        write(name, value.dump(2) + "\n");
    }

    /** @brief Write manifest.json (itself unlisted) and return it. */
    json finalize(const std::string& kind, std::uint64_t seed) {
        std::sort(entries_.begin(), entries_.end(),
                  [](const Entry& a, const Entry& b) { return a.name < b.name; });
        json manifest;
        manifest["kind"] = kind;
        manifest["seed"] = seed;
        manifest["artifacts"] = json::array();
        for (const auto& e : entries_)
            manifest["artifacts"].push_back(
                {{"name", e.name}, {"bytes", e.bytes}, {"sha256", e.sha256}});
        write_file("manifest.json", manifest.dump(2) + "\n");
        return manifest;
    }

private:
    struct Entry {
        std::string name;
        std::size_t bytes;
        std::string sha256;
    };

    void write_file(const std::string& name, const std::string& content) {
        const auto path = dir_ / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::invalid_argument("scenario: cannot write artifact '" + path.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out)
            throw std::invalid_argument("scenario: short write on artifact '" + path.string() +
                                        "'");
    }

    std::filesystem::path dir_;
    std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// deterministic work sharing
// ---------------------------------------------------------------------------

/**
 * @brief Run body(0..count-1) on up to `jobs` threads, worker w taking the
 * indices ≡ w (mod workers).  Results must be written to per-index slots;
 * combined with per-index RNG forks this makes output independent of the
 * worker count.
 */
inline void parallel_for(std::size_t count, int jobs,
                         const std::function<void(std::size_t)>& body) {
    if (jobs < 1) throw std::invalid_argument("scenario: field 'jobs' must be >= 1");
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs),
                                                      count == 0 ? 1 : count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t i = w; i < count; i += workers) body(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// systems used by the builtins
// ---------------------------------------------------------------------------

/**
 * @brief The two-mode reflection example: 2×2 transport on [0,1] with one
 * negative and one positive characteristic per mode, small coupling terms and
 * scalar boundary reflections.  Its worst mode pair has |G_R||G_L| = 0.7381,
 * so the switched system is certified stable with radius √0.7381 ≈ 0.859.
 */
inline transport::TransportSystem exsim_system() {
    Eigen::MatrixXd B1 = -0.005 * Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd B2(2, 2);
    B2 << 0.0, 0.005, 0.005, 0.0;
    Eigen::MatrixXd GL1(1, 1), GR1(1, 1), GL2(1, 1), GR2(1, 1);
    GL1 << 0.61;
    GR1 << 1.15;
    GL2 << 0.42;
    GR2 << 1.21;
    auto mode1 = transport::TransportSystem::constant_mode({-1.2, 1.8}, B1, GL1, GR1);
    auto mode2 = transport::TransportSystem::constant_mode({-0.8, 1.4}, B2, GL2, GR2);
    return transport::TransportSystem(0.0, 1.0, 2, 1, {std::move(mode1), std::move(mode2)});
}

inline transport::TransportSystem parse_system(const json& value) {
    if (value.is_string()) {
        const auto name = value.get<std::string>();
        if (name == "exsim") return exsim_system();
        throw std::invalid_argument("scenario: field 'system' names no known system (got '" +
                                    name + "', expected 'exsim' or an object)");
    }
    if (!value.is_object())
        throw std::invalid_argument("scenario: field 'system' must be 'exsim' or an object");
    const double a = field_double(value, "a");
    const double b = field_double(value, "b");
    const int n = static_cast<int>(as_integer(require_field(value, "n"), "n"));
    const int m = static_cast<int>(as_integer(require_field(value, "m"), "m"));
    const json& modes_json = require_field(value, "modes");
    if (!modes_json.is_array() || modes_json.empty())
        throw std::invalid_argument("scenario: field 'modes' must be a non-empty array");
    std::vector<transport::TransportMode> modes;
    for (const auto& mj : modes_json) {
        const auto speeds = as_double_vector(require_field(mj, "speeds"), "speeds");
        modes.push_back(transport::TransportSystem::constant_mode(
            speeds, as_matrix(require_field(mj, "B"), "B"),
            as_matrix(require_field(mj, "G_L"), "G_L"),
            as_matrix(require_field(mj, "G_R"), "G_R")));
    }
    return transport::TransportSystem(a, b, n, m, std::move(modes));
}

/** @brief Two-mode unstable-transport / stabilizing-diffusion switched ODE system. */
inline hybrid::HybridSystem transport_diffusion_system(int d, double c, double gamma, double nu) {
    hybrid::Mode transport_mode{hybrid::unstable_transport(d, c, gamma), nullptr, nullptr};
    hybrid::Mode diffusion_mode{hybrid::diffusion(d, nu), nullptr, nullptr};
    hybrid::HybridSystem sys(d, {std::move(transport_mode), std::move(diffusion_mode)});
    hybrid::RunningCost cost;
    cost.value = [](double, const Eigen::VectorXd& y) { return 0.5 * y.squaredNorm(); };
    cost.gradient = [](double, const Eigen::VectorXd& y) { return y; };
    sys.set_running_cost(std::move(cost));
    return sys;
}

// ---------------------------------------------------------------------------
// executors
// ---------------------------------------------------------------------------

inline void run_stability(const Scenario& sc, ArtifactWriter& writer, int jobs) {
    const json& p = sc.payload;
    const auto sys = parse_system(p.contains("system") ? p.at("system") : json("exsim"));
    const int N_x = field_int_or(p, "N_x", 200);
    const double t_f = field_double_or(p, "t_f", 40.0);
    const int n_signals = field_int_or(p, "signals", 100);
    const double dwell_min = field_double_or(p, "dwell_min", 0.5);
    const double dwell_max = field_double_or(p, "dwell_max", 3.0);
    const double cfl = field_double_or(p, "cfl", 0.9);
    const int series_signals = field_int_or(p, "series_signals", 3);
    const int series_samples = field_int_or(p, "series_samples", 400);
    if (n_signals < 1)
        throw std::invalid_argument("scenario: field 'signals' must be >= 1");

    const auto cert = transport::spectral_radius_condition(sys);
    json cj;
    cj["rho_max"] = cert.rho_max;
    cj["passes"] = cert.passes;
    cj["product_max"] = cert.product_max;
    cj["pairs"] = json::array();
    for (const auto& pair : cert.pairs)
        cj["pairs"].push_back(
            {{"j", pair.j}, {"jp", pair.jp}, {"rho", pair.rho}, {"product", pair.product}});
    cj["b_inf_norms"] = cert.b_inf_norms;
    writer.write_json("certificate.json", cj);

    // one shared initial profile: an interior sine bump with sup-norm 1
    const auto y0 = transport::sample_field(sys, N_x, [&](int, double x) {
        return std::sin(std::numbers::pi * (x - sys.a()) / (sys.b() - sys.a()));
    });

    std::vector<transport::DecayFit> fits(static_cast<std::size_t>(n_signals));
    std::vector<std::size_t> switch_counts(static_cast<std::size_t>(n_signals));
    std::vector<std::vector<std::pair<double, double>>> series(
        static_cast<std::size_t>(n_signals));
    parallel_for(static_cast<std::size_t>(n_signals), jobs, [&](std::size_t i) {
        Rng rng = Rng::fork(sc.seed, i);
        const auto sigma = signals::random_signal(rng, static_cast<int>(sys.mode_count()), t_f,
                                                  dwell_min, dwell_max);
        const auto traj = transport::simulate(sys, sigma, y0, t_f, N_x, cfl);
        series[i] = transport::sup_norm_series(traj);
        fits[i] = transport::fit_decay(series[i], series[i].front().second);
        switch_counts[i] = sigma.switch_times().size() - 1;
    });

    CsvWriter decay({"signal", "switches", "K_fit", "mu_fit", "residual"});
    for (std::size_t i = 0; i < fits.size(); ++i)
        decay.append_row({std::to_string(i), std::to_string(switch_counts[i]),
                          format_double(fits[i].K_fit), format_double(fits[i].mu_fit),
                          format_double(fits[i].residual)});
    writer.write("decay.csv", decay.str());

    const auto envelope = transport::dominating_envelope(series);
    // dominance margin: min over every sample of log(K e^{-mu t}) - log(value)
    double min_log_margin = std::numeric_limits<double>::infinity();
    double mu_min = std::numeric_limits<double>::infinity();
    for (const auto& fit : fits) mu_min = std::min(mu_min, fit.mu_fit);
    for (const auto& s : series)
        for (const auto& [t, v] : s)
            if (v > 0.0)
                min_log_margin = std::min(
                    min_log_margin, std::log(envelope.K_fit) - envelope.mu_fit * t - std::log(v));
    json ej;
    ej["K"] = envelope.K_fit;
    ej["mu"] = envelope.mu_fit;
    ej["residual"] = envelope.residual;
    ej["signals"] = n_signals;
    ej["min_log_margin"] = min_log_margin;
    ej["mu_fit_min"] = mu_min;
    writer.write_json("envelope.json", ej);

    CsvWriter series_csv({"signal", "t", "sup_norm"});
    const auto shown = static_cast<std::size_t>(std::max(0, series_signals));
    for (std::size_t i = 0; i < std::min(shown, series.size()); ++i) {
        const std::size_t stride =
            std::max<std::size_t>(1, series[i].size() / static_cast<std::size_t>(std::max(
                                          1, series_samples)));
        for (std::size_t k = 0; k < series[i].size(); k += stride)
            series_csv.append_row({std::to_string(i), format_double(series[i][k].first),
                                   format_double(series[i][k].second)});
    }
    writer.write("series.csv", series_csv.str());
}

inline void run_pe_wave(const Scenario& sc, ArtifactWriter& writer, int /*jobs*/) {
    const json& p = sc.payload;
    const double b = field_double_or(p, "b", 0.5);
    if (!(b > 0.0 && b < 1.0))
        throw std::invalid_argument("scenario: field 'b' must lie in (0,1)");
    const double T = field_double_or(p, "T", 2.0);
    const double mu = field_double_or(p, "mu", 0.25);
    const int N_x = field_int_or(p, "N_x", 800);
    const double t_f = field_double_or(p, "t_f", 10.0);
    const double horizon = field_double_or(p, "pe_horizon", 40.0);
    const double full_damping = field_double_or(p, "full_damping", 1.0);

    // the excitation windows of the counterexample signal have half-width
    // (1-b)/2: exactly the times the traveling square wave is away from the
    // damping region (0, b)
    const double mu_signal = 0.5 * (1.0 - b);
    const auto sigma = excitation::counterexample_signal(mu_signal, horizon);
    const auto pe = excitation::is_pe(sigma, excitation::PEParams{T, mu}, horizon);
    json pj;
    pj["ok"] = pe.ok;
    pj["worst_start"] = pe.worst_start;
    pj["worst_mass"] = pe.worst_mass;
    pj["T"] = T;
    pj["mu"] = mu;
    writer.write_json("pe.json", pj);

    const auto [v0, v1] = excitation::counterexample_wave_data(b, N_x);
    const auto run_cex = excitation::simulate_wave(excitation::DampingProfile::indicator(0.0, b),
                                                   sigma, v0, v1, t_f, N_x);
    const auto run_full = excitation::simulate_wave(
        excitation::DampingProfile::constant(full_damping), sigma, v0, v1, t_f, N_x);

    CsvWriter energy({"t", "E_counterexample", "E_full"});
    for (std::size_t k = 0; k < run_cex.times.size(); ++k)
        energy.append_numeric_row({run_cex.times[k], run_cex.energy[k], run_full.energy[k]});
    writer.write("energy.csv", energy.str());

    const auto index_of = [&](double t) {
        const auto k = static_cast<std::size_t>(std::llround(t * N_x));
        return std::min(k, run_cex.times.size() - 1);
    };
    const double e0 = run_cex.energy.front();
    json sj;
    sj["E0"] = e0;
    json ratios = json::array();
    double max_dev = 0.0;
    for (double t : {2.0, 4.0, 6.0}) {
        if (t > t_f) continue;
        const double ratio = run_cex.energy[index_of(t)] / e0;
        ratios.push_back({{"t", t}, {"ratio", ratio}});
        max_dev = std::max(max_dev, std::abs(ratio - 1.0));
    }
    sj["counterexample_ratios"] = ratios;
    sj["counterexample_max_deviation"] = max_dev;
    sj["full_damping_ratio"] = run_full.energy[index_of(t_f)] / run_full.energy.front();
    writer.write_json("summary.json", sj);
}

inline void run_round(const Scenario& sc, ArtifactWriter& writer, int /*jobs*/) {
    const json& p = sc.payload;
    const json& grid_json = require_field(p, "grid");
    TimeGrid grid = [&]() {
        if (grid_json.is_array()) return TimeGrid(as_double_vector(grid_json, "grid"));
        if (grid_json.is_object()) {
            const double t0 = field_double(grid_json, "t0");
            const double t1 = field_double(grid_json, "t1");
            const auto cells = as_integer(require_field(grid_json, "cells"), "cells");
            if (cells < 1)
                throw std::invalid_argument("scenario: field 'cells' must be >= 1");
            return TimeGrid::uniform(t0, t1, static_cast<std::size_t>(cells));
        }
        throw std::invalid_argument(
            "scenario: field 'grid' must be a node array or {t0, t1, cells}");
    }();

    const json& beta_json = require_field(p, "beta");
    if (!beta_json.is_array() || beta_json.empty())
        throw std::invalid_argument("scenario: field 'beta' must be a non-empty array");
    std::vector<std::vector<double>> values;
    for (const auto& row : beta_json) values.push_back(as_double_vector(row, "beta"));
    const signals::RelaxedControl control(grid, std::move(values));
    const int mode_count = static_cast<int>(control.modes());

    json dj;
    signals::BinaryControl rounded = [&]() {
        if (!p.contains("limits")) return signals::sum_up_round(control);
        const json& lim = p.at("limits");
        signals::SwitchCountMatrix limits =
            lim.is_number_integer() || lim.is_number_unsigned()
                ? signals::SwitchCountMatrix::uniform_limits(
                      mode_count, static_cast<int>(as_integer(lim, "limits")))
                : [&]() {
                      const auto m = as_matrix(lim, "limits");
                      if (m.rows() != mode_count || m.cols() != mode_count)
                          throw std::invalid_argument(
                              "scenario: field 'limits' must be a modes x modes matrix");
                      signals::SwitchCountMatrix out(mode_count);
                      for (int i = 1; i <= mode_count; ++i)
                          for (int j = 1; j <= mode_count; ++j)
                              out.at(i, j) = static_cast<int>(std::llround(m(i - 1, j - 1)));
                      return out;
                  }();
        dj["constrained"] = true;
        return signals::constrained_round(control, limits);
    }();

    writer.write("rounded.csv", signals::control_csv(rounded));

    double max_dt = 0.0;
    for (std::size_t k = 0; k < grid.cells(); ++k) max_dt = std::max(max_dt, grid.dt(k));
    const auto counts = signals::count_switches(signals::to_switching_signal(rounded));
    int total_switches = 0;
    for (int i = 1; i <= mode_count; ++i)
        for (int j = 1; j <= mode_count; ++j)
            if (i != j) total_switches += counts.at(i, j);

    dj["deviation"] = signals::integrated_deviation(rounded, control);
    dj["bound"] = (mode_count - 1) * max_dt;
    dj["switches"] = total_switches;
    dj["modes"] = mode_count;
    dj["cells"] = grid.cells();
    writer.write_json("deviation.json", dj);
}

inline void run_miocp(const Scenario& sc, ArtifactWriter& writer, int /*jobs*/) {
    const json& p = sc.payload;
    const auto task = field_string_or(p, "task", "track");

    if (task == "value-scan") {
        const double t_f = field_double_or(p, "t_f", 1.0);
        const int cells = field_int_or(p, "cells", 12);
        const auto lambdas =
            field_vector_or(p, "lambdas", {-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0});
        const auto rows = miocp::value_scan(t_f, lambdas, cells);

        CsvWriter scan({"lambda", "nu_bruteforce", "nu_closed", "abs_error"});
        double max_err = 0.0;
        for (const auto& row : rows) {
            const double err = std::abs(row.nu_bruteforce - row.nu_closed);
            max_err = std::max(max_err, err);
            scan.append_numeric_row({row.lambda, row.nu_bruteforce, row.nu_closed, err});
        }
        writer.write("scan.csv", scan.str());

        json sj;
        sj["max_abs_error"] = max_err;
        sj["cells"] = cells;
        sj["t_f"] = t_f;
        // the value function has a kink at lambda = 0: slope e on the left, 1 on the right
        const auto at = [&](double lambda) -> const miocp::ValueScanRow* {
            for (const auto& row : rows)
                if (row.lambda == lambda) return &row;
            return nullptr;
        };
        const miocp::ValueScanRow* zero = at(0.0);
        const miocp::ValueScanRow* left = nullptr;
        const miocp::ValueScanRow* right = nullptr;
        for (const auto& row : rows) {
            if (row.lambda < 0.0 && (!left || row.lambda > left->lambda)) left = &row;
            if (row.lambda > 0.0 && (!right || row.lambda < right->lambda)) right = &row;
        }
        if (zero && left)
            sj["left_slope"] =
                (zero->nu_bruteforce - left->nu_bruteforce) / (0.0 - left->lambda);
        if (zero && right)
            sj["right_slope"] = (right->nu_bruteforce - zero->nu_bruteforce) / right->lambda;
        writer.write_json("summary.json", sj);
        return;
    }

    if (task != "track")
        throw std::invalid_argument("scenario: field 'task' must be 'track' or 'value-scan' (got '" +
                                    task + "')");

    const auto problem = miocp::tracking_instance(field_double_or(p, "a", 3.0),
                                                  field_double_or(p, "kappa", 8e-3));
    const int N_x = field_int_or(p, "N_x", 100);
    const int cells = field_int_or(p, "control_cells", 24);
    if (cells < 1) throw std::invalid_argument("scenario: field 'control_cells' must be >= 1");
    const int max_iters = field_int_or(p, "max_iters", 200);
    const auto gap_dts = field_vector_or(p, "gap_dts", {1.0, 0.5, 0.25, 0.125});

    const miocp::PDEGrid grid{N_x};
    const TimeGrid control_grid = TimeGrid::uniform(0.0, problem.t_f, static_cast<std::size_t>(cells));

    // beta0: "alternating" (default), a constant fill value, or an explicit per-cell array
    std::vector<double> beta_init;
    const auto b0 = p.find("beta0");
    if (b0 == p.end() || (b0->is_string() && b0->get<std::string>() == "alternating")) {
        beta_init = miocp::alternating_start(static_cast<std::size_t>(cells));
    } else if (b0->is_number()) {
        beta_init.assign(static_cast<std::size_t>(cells), b0->get<double>());
    } else if (b0->is_array()) {
        beta_init = b0->get<std::vector<double>>();
        if (beta_init.size() != static_cast<std::size_t>(cells))
            throw std::invalid_argument("scenario: field 'beta0' array must have 'control_cells' entries");
    } else {
        throw std::invalid_argument(
            "scenario: field 'beta0' must be a number, an array, or \"alternating\"");
    }

    const auto report = miocp::descend(problem, grid, control_grid, beta_init,
                                       static_cast<std::size_t>(max_iters));

    CsvWriter descent({"iteration", "objective", "stationarity", "step"});
    for (std::size_t k = 0; k < report.history.size(); ++k)
        descent.append_row({std::to_string(k), format_double(report.history[k].objective),
                            format_double(report.history[k].stationarity),
                            format_double(report.history[k].step)});
    writer.write("descent.csv", descent.str());
    writer.write("control.csv", signals::control_csv(miocp::to_relaxed(control_grid, report.beta)));

    const auto gaps = miocp::round_and_gap(problem, grid, control_grid, report.beta, gap_dts);
    CsvWriter gaps_csv({"dt", "j_sigma", "gamma", "abs_gap"});
    for (const auto& row : gaps.rows)
        gaps_csv.append_numeric_row({row.dt, row.j_sigma, row.gamma, row.abs_gap});
    writer.write("gaps.csv", gaps_csv.str());

    const auto traj = miocp::forward(problem, grid, control_grid, report.beta);
    json sj;
    sj["j_star"] = gaps.j_star;
    sj["iterations"] = report.iterations;
    sj["stopping_reason"] = report.stopping_reason;
    sj["mass_drift"] = std::abs(traj.mass_final - traj.mass_initial);
    sj["subcharacteristic_ok"] = traj.subcharacteristic_ok;
    sj["max_abs_eta"] = traj.max_abs_eta;
    sj["N_x"] = N_x;
    writer.write_json("summary.json", sj);
}

inline void run_hybrid(const Scenario& sc, ArtifactWriter& writer, int jobs) {
    const json& p = sc.payload;
    const int d = field_int_or(p, "d", 50);
    const double c = field_double_or(p, "c", 1.0);
    const double gamma = field_double_or(p, "gamma", 1.0);
    const double nu = field_double_or(p, "nu", 0.1);
    const double t_f = field_double_or(p, "t_f", 1.0);
    const int sweep_points = field_int_or(p, "sweep_points", 21);
    const auto starts = field_vector_or(p, "starts", {0.1, 0.5, 0.9});
    const int insertion_grid = field_int_or(p, "insertion_grid", 16);
    if (sweep_points < 2)
        throw std::invalid_argument("scenario: field 'sweep_points' must be >= 2");
    if (!(t_f > 0.0)) throw std::invalid_argument("scenario: field 't_f' must be positive");

    const auto sys = transport_diffusion_system(d, c, gamma, nu);
    Eigen::VectorXd y0(d);
    for (int i = 0; i < d; ++i)
        y0(i) = std::sin(std::numbers::pi * (i + 0.5) / static_cast<double>(d));

    // sweep of the switch time: transport on [0, tau], diffusion on [tau, t_f]
    struct SweepRow {
        double tau, phi, dphi;
    };
    std::vector<SweepRow> sweep(static_cast<std::size_t>(sweep_points));
    parallel_for(sweep.size(), jobs, [&](std::size_t k) {
        const double tau = t_f * static_cast<double>(k) / static_cast<double>(sweep_points - 1);
        const hybrid::SwitchSchedule schedule({0, 1}, {0.0, tau, t_f});
        const auto traj = hybrid::simulate_hybrid(sys, schedule, y0);
        const auto adj = hybrid::adjoint_hybrid(sys, schedule, traj);
        const auto grads = hybrid::switch_time_gradient(sys, schedule, traj, adj);
        sweep[k] = SweepRow{tau, traj.total_cost, grads.d_tau.front()};
    });
    CsvWriter sweep_csv({"tau", "phi", "dphi"});
    double min_dphi = std::numeric_limits<double>::infinity();
    for (const auto& row : sweep) {
        sweep_csv.append_numeric_row({row.tau, row.phi, row.dphi});
        min_dphi = std::min(min_dphi, row.dphi);
    }
    writer.write("sweep.csv", sweep_csv.str());

    // descent with mode insertion from each start
    hybrid::OptimizeOptions opts;
    opts.insertion_grid = static_cast<std::size_t>(std::max(1, insertion_grid));
    struct OptRow {
        double start, final_tau, phi;
        std::size_t outer, switches;
        std::string reason;
    };
    std::vector<OptRow> outcomes(starts.size());
    parallel_for(starts.size(), jobs, [&](std::size_t k) {
        const double tau0 = starts[k];
        if (!(tau0 >= 0.0 && tau0 <= t_f))
            throw std::invalid_argument("scenario: field 'starts' entries must lie in [0, t_f]");
        const hybrid::SwitchSchedule schedule({0, 1}, {0.0, tau0, t_f});
        const auto report = hybrid::optimize_schedule(sys, schedule, y0, opts);
        outcomes[k] = OptRow{tau0,          report.times.at(1),      report.phi,
                             report.outer_iterations, report.times.size() - 2, report.stopping_reason};
    });
    CsvWriter opt_csv({"start", "final_tau", "phi", "outer_iterations", "switches"});
    double max_final_tau = 0.0;
    for (const auto& row : outcomes) {
        opt_csv.append_row({format_double(row.start), format_double(row.final_tau),
                            format_double(row.phi), std::to_string(row.outer),
                            std::to_string(row.switches)});
        max_final_tau = std::max(max_final_tau, row.final_tau);
    }
    writer.write("optimize.csv", opt_csv.str());

    json sj;
    sj["min_sweep_dphi"] = min_dphi;
    sj["phi_at_zero"] = sweep.front().phi;
    sj["phi_at_tf"] = sweep.back().phi;
    sj["max_final_tau"] = max_final_tau;
    sj["d"] = d;
    writer.write_json("summary.json", sj);
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

inline std::filesystem::path default_out_dir(const Scenario& sc) {
    return std::filesystem::path("artifacts") / sc.name;
}

/** @brief Execute the scenario into out_dir and finish with manifest.json. */
inline json run_scenario(const Scenario& sc, const std::filesystem::path& out_dir, int jobs = 1) {
    ArtifactWriter writer(out_dir);
    if (sc.kind == "stability")
        run_stability(sc, writer, jobs);
    else if (sc.kind == "pe-wave")
        run_pe_wave(sc, writer, jobs);
    else if (sc.kind == "round")
        run_round(sc, writer, jobs);
    else if (sc.kind == "miocp")
        run_miocp(sc, writer, jobs);
    else if (sc.kind == "hybrid")
        run_hybrid(sc, writer, jobs);
    else
        throw std::invalid_argument("scenario: field 'kind' is not executable (got '" + sc.kind +
                                    "')");
    return writer.finalize(sc.kind, sc.seed);
}

} // namespace switchctl::scenario
