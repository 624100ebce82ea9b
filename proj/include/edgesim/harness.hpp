#ifndef EDGESIM_HARNESS_HPP
#define EDGESIM_HARNESS_HPP

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgesim/agents.hpp"
#include "edgesim/env.hpp"
#include "edgesim/traces.hpp"

namespace edgesim {

// Config mistakes exit with code 2, runtime failures with 3.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct TraceSource {
    std::string kind = "synthetic";  // synthetic | csv
    std::string path;                // csv only
    std::string model = "random_waypoint";
    double speed_mps = 10.0;
    double slot_seconds = 60.0;
};

// Everything one simulation cell needs except the seed.
struct ScenarioConfig {
    int rows = 4;
    int cols = 4;
    double region_side = 4000.0;
    std::string connectivity = "high";
    int n_vehicles = 100;
    int horizon = 240;
    DelayParams params;
    UniformRange data_mb{0.5, 1.5};
    UniformRange density_cpb{200, 1000};
    UniformRange power_w{0.4, 0.6};
    UniformRange service_mb{0.5, 50};
    int tasks_per_slot = 1;
    // auto: optimal for srcl, learned for jsr, proportional for the rest
    std::string allocation_mode = "auto";
    TraceSource traces;
    AgentConfig agent;
    GaParams ga;
    int eval_episodes = 10;
};

struct SweepSpec {
    // none | server_capacity | migration_coeff | task_count | topology_kind |
    // backhaul_rate | vehicle_count
    std::string axis = "none";
    std::vector<std::string> values;  // parsed per axis
};

struct ExperimentConfig {
    std::string scenario = "default";
    PolicyKind policy = PolicyKind::SRCL;
    ScenarioConfig base;
    SweepSpec sweep;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::string out_dir = "runs/default";
    bool measure_decision_time = false;
};

struct MetricsRow {
    std::string scenario;
    std::string policy;
    std::string sweep_value;
    std::uint64_t seed = 0;
    double mean_total_delay_s = 0.0;
    double mean_migration_delay_s = 0.0;
    double mean_communication_delay_s = 0.0;
    double mean_computation_delay_s = 0.0;
    double migration_frequency = 0.0;
    double mean_decision_time_ms = 0.0;
    double mean_response_delay_s = 0.0;
};

inline const char* metrics_header() {
    return "scenario,policy,sweep_value,seed,mean_total_delay_s,mean_migration_delay_s,"
           "mean_communication_delay_s,mean_computation_delay_s,migration_frequency,"
           "mean_decision_time_ms,mean_response_delay_s";
}

inline std::string to_csv(const MetricsRow& r) {
    std::ostringstream out;
    out << r.scenario << ',' << r.policy << ',' << r.sweep_value << ',' << r.seed << ','
        << fmt_double(r.mean_total_delay_s) << ',' << fmt_double(r.mean_migration_delay_s) << ','
        << fmt_double(r.mean_communication_delay_s) << ','
        << fmt_double(r.mean_computation_delay_s) << ',' << fmt_double(r.migration_frequency)
        << ',' << fmt_double(r.mean_decision_time_ms) << ','
        << fmt_double(r.mean_response_delay_s);
    return out.str();
}

// ---------------------------------------------------------------------------
// JSON parsing with unknown-key rejection
// ---------------------------------------------------------------------------

namespace cfgdetail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::vector<std::string>& known,
                           const std::string& path) {
    if (!obj.is_object()) throw ValidationError(path + ": expected an object");
    for (const auto& item : obj.items()) {
        if (std::find(known.begin(), known.end(), item.key()) == known.end())
            throw ValidationError(path + "." + item.key() + ": unknown field");
    }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string(key) + ": " + e.what());
    }
}

inline void read_range(const json& obj, const char* key, UniformRange& out,
                       const std::string& path) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_array() || v.size() != 2)
        throw ValidationError(path + "." + key + ": expected [lo, hi]");
    out.lo = v[0].get<double>();
    out.hi = v[1].get<double>();
}

inline DelayParams parse_params(const json& obj, const std::string& path) {
    reject_unknown(obj,
                   {"backhaul_rate_bps", "migration_coeff_s", "transmission_coeff_s",
                    "noise_power_w", "unit_gain", "bs_bandwidth_hz", "server_capacity_hz"},
                   path);
    DelayParams p;
    read_field(obj, "backhaul_rate_bps", p.backhaul_rate);
    read_field(obj, "migration_coeff_s", p.migration_coeff);
    read_field(obj, "transmission_coeff_s", p.transmission_coeff);
    read_field(obj, "noise_power_w", p.noise_power);
    read_field(obj, "unit_gain", p.unit_gain);
    read_field(obj, "bs_bandwidth_hz", p.bs_bandwidth);
    read_field(obj, "server_capacity_hz", p.server_capacity);
    return p;
}

inline TraceSource parse_traces(const json& obj, const std::string& path) {
    reject_unknown(obj, {"kind", "path", "model", "speed_mps", "slot_seconds"}, path);
    TraceSource t;
    read_field(obj, "kind", t.kind);
    read_field(obj, "path", t.path);
    read_field(obj, "model", t.model);
    read_field(obj, "speed_mps", t.speed_mps);
    read_field(obj, "slot_seconds", t.slot_seconds);
    if (t.kind != "synthetic" && t.kind != "csv")
        throw ValidationError(path + ".kind: must be synthetic or csv");
    if (t.kind == "csv" && t.path.empty())
        throw ValidationError(path + ".path: required for csv traces");
    if (t.kind == "synthetic") mobility_from_string(t.model);
    return t;
}

inline AgentConfig parse_agent(const json& obj, const std::string& path) {
    reject_unknown(obj,
                   {"lr_actor", "lr_critic", "gamma", "soft_update_rate", "actor_delay",
                    "batch_size", "replay_capacity", "noise_sigma0", "noise_floor", "clip_norm",
                    "episodes", "hidden"},
                   path);
    AgentConfig a;
    read_field(obj, "lr_actor", a.lr_actor);
    read_field(obj, "lr_critic", a.lr_critic);
    read_field(obj, "gamma", a.gamma);
    read_field(obj, "soft_update_rate", a.soft_update_rate);
    read_field(obj, "actor_delay", a.actor_delay);
    read_field(obj, "batch_size", a.batch_size);
    std::uint64_t cap = a.replay_capacity;
    read_field(obj, "replay_capacity", cap);
    a.replay_capacity = cap;
    read_field(obj, "noise_sigma0", a.noise_sigma0);
    read_field(obj, "noise_floor", a.noise_floor);
    read_field(obj, "clip_norm", a.clip_norm);
    read_field(obj, "episodes", a.episodes);
    read_field(obj, "hidden", a.hidden_sizes);
    return a;
}

inline GaParams parse_ga(const json& obj, const std::string& path) {
    reject_unknown(obj, {"population", "generations", "crossover_rate", "mutation_rate",
                         "tournament"},
                   path);
    GaParams g;
    read_field(obj, "population", g.population);
    read_field(obj, "generations", g.generations);
    read_field(obj, "crossover_rate", g.crossover_rate);
    read_field(obj, "mutation_rate", g.mutation_rate);
    read_field(obj, "tournament", g.tournament);
    return g;
}

inline ScenarioConfig parse_scenario(const json& obj, const std::string& path) {
    reject_unknown(obj,
                   {"rows", "cols", "region_side_m", "connectivity", "vehicles", "horizon",
                    "params", "data_mb", "density_cpb", "power_w", "service_mb", "tasks_per_slot",
                    "allocation_mode", "traces", "agent", "ga", "eval_episodes"},
                   path);
    ScenarioConfig sc;
    read_field(obj, "rows", sc.rows);
    read_field(obj, "cols", sc.cols);
    read_field(obj, "region_side_m", sc.region_side);
    read_field(obj, "connectivity", sc.connectivity);
    read_field(obj, "vehicles", sc.n_vehicles);
    read_field(obj, "horizon", sc.horizon);
    if (obj.contains("params")) sc.params = parse_params(obj.at("params"), path + ".params");
    read_range(obj, "data_mb", sc.data_mb, path);
    read_range(obj, "density_cpb", sc.density_cpb, path);
    read_range(obj, "power_w", sc.power_w, path);
    read_range(obj, "service_mb", sc.service_mb, path);
    read_field(obj, "tasks_per_slot", sc.tasks_per_slot);
    read_field(obj, "allocation_mode", sc.allocation_mode);
    if (obj.contains("traces")) sc.traces = parse_traces(obj.at("traces"), path + ".traces");
    if (obj.contains("agent")) sc.agent = parse_agent(obj.at("agent"), path + ".agent");
    if (obj.contains("ga")) sc.ga = parse_ga(obj.at("ga"), path + ".ga");
    read_field(obj, "eval_episodes", sc.eval_episodes);
    if (sc.allocation_mode != "auto" && sc.allocation_mode != "optimal" &&
        sc.allocation_mode != "proportional")
        throw ValidationError(path + ".allocation_mode: must be auto, optimal or proportional");
    connectivity_from_string(sc.connectivity);
    return sc;
}

}  // namespace cfgdetail

inline const std::vector<std::string>& sweep_axes() {
    static const std::vector<std::string> axes{"none",          "server_capacity", "migration_coeff",
                                               "task_count",    "topology_kind",   "backhaul_rate",
                                               "vehicle_count"};
    return axes;
}

inline ExperimentConfig parse_experiment_config(const std::string& text) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config is not valid json: ") + e.what());
    }
    cfgdetail::reject_unknown(
        root, {"scenario", "policy", "env", "sweep", "seeds", "out", "measure_decision_time"},
        "config");

    ExperimentConfig cfg;
    cfgdetail::read_field(root, "scenario", cfg.scenario);
    std::string policy = "srcl";
    cfgdetail::read_field(root, "policy", policy);
    try {
        cfg.policy = policy_from_string(policy);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    if (root.contains("env")) cfg.base = cfgdetail::parse_scenario(root.at("env"), "config.env");
    if (root.contains("sweep")) {
        const auto& s = root.at("sweep");
        cfgdetail::reject_unknown(s, {"axis", "values"}, "config.sweep");
        cfgdetail::read_field(s, "axis", cfg.sweep.axis);
        if (s.contains("values")) {
            for (const auto& v : s.at("values"))
                cfg.sweep.values.push_back(v.is_string() ? v.get<std::string>()
                                                         : nlohmann::to_string(v));
        }
        const auto& axes = sweep_axes();
        if (std::find(axes.begin(), axes.end(), cfg.sweep.axis) == axes.end())
            throw ValidationError("config.sweep.axis: unknown axis " + cfg.sweep.axis);
        if (cfg.sweep.axis != "none" && cfg.sweep.values.empty())
            throw ValidationError("config.sweep.values: sweep needs at least one value");
    }
    if (root.contains("seeds")) {
        cfg.seeds.clear();
        for (const auto& v : root.at("seeds")) cfg.seeds.push_back(v.get<std::uint64_t>());
    }
    if (cfg.seeds.empty()) throw ValidationError("config.seeds: need at least one seed");
    cfgdetail::read_field(root, "out", cfg.out_dir);
    cfgdetail::read_field(root, "measure_decision_time", cfg.measure_decision_time);
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_experiment_config(text.str());
}

// ---------------------------------------------------------------------------
// Cell assembly
// ---------------------------------------------------------------------------

inline void apply_sweep_value(ScenarioConfig& sc, const std::string& axis,
                              const std::string& value) {
    auto as_double = [&](const char* what) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(value, &pos);
            if (pos != value.size()) throw std::invalid_argument(value);
            return v;
        } catch (const std::exception&) {
            throw ValidationError(std::string("sweep value '") + value + "' is not a number for " +
                                  what);
        }
    };
    if (axis == "none") {
        return;
    } else if (axis == "server_capacity") {
        sc.params.server_capacity = as_double(axis.c_str());
    } else if (axis == "migration_coeff") {
        sc.params.migration_coeff = as_double(axis.c_str());
    } else if (axis == "task_count") {
        sc.tasks_per_slot = static_cast<int>(as_double(axis.c_str()));
    } else if (axis == "topology_kind") {
        connectivity_from_string(value);
        sc.connectivity = value;
    } else if (axis == "backhaul_rate") {
        sc.params.backhaul_rate = as_double(axis.c_str());
    } else if (axis == "vehicle_count") {
        sc.n_vehicles = static_cast<int>(as_double(axis.c_str()));
    } else {
        throw ValidationError("unknown sweep axis: " + axis);
    }
}

inline AllocationMode effective_allocation_mode(const ScenarioConfig& sc, PolicyKind policy) {
    if (sc.allocation_mode == "optimal") return AllocationMode::optimal;
    if (sc.allocation_mode == "proportional") return AllocationMode::proportional;
    // auto: the learned method uses the closed form, comparison methods the
    // proportional rule; jsr carries its own allocation in the action
    return policy == PolicyKind::SRCL ? AllocationMode::optimal : AllocationMode::proportional;
}

inline std::vector<VehicleTrace> make_traces(const ScenarioConfig& sc, std::uint64_t seed) {
    if (sc.traces.kind == "csv") {
        std::ifstream in(sc.traces.path);
        if (!in) throw std::runtime_error("cannot open trace csv: " + sc.traces.path);
        auto traces = read_trace_csv(in);
        if (static_cast<int>(traces.size()) < sc.n_vehicles)
            throw ValidationError("trace csv has fewer vehicles than the scenario needs");
        return traces;
    }
    return synthetic_traces(mobility_from_string(sc.traces.model), sc.n_vehicles, sc.horizon,
                            sc.region_side, sc.traces.speed_mps, derive_seed(seed, "traces"),
                            sc.traces.slot_seconds);
}

inline EnvConfig make_env_config(const ScenarioConfig& sc, PolicyKind policy, std::uint64_t seed) {
    EnvConfig env;
    env.topology = build_grid_topology(sc.rows, sc.cols, sc.region_side,
                                       connectivity_from_string(sc.connectivity));
    env.params = sc.params;
    env.n_vehicles = sc.n_vehicles;
    env.horizon = sc.horizon;
    env.data_mb = sc.data_mb;
    env.density_cpb = sc.density_cpb;
    env.power_w = sc.power_w;
    env.service_mb = sc.service_mb;
    env.tasks_per_slot = sc.tasks_per_slot;
    env.allocation_mode = effective_allocation_mode(sc, policy);
    env.seed = seed;
    return env;
}

// ---------------------------------------------------------------------------
// Decision timing
// ---------------------------------------------------------------------------

struct TimingStats {
    double median_ms = 0.0;
    double p95_ms = 0.0;
    int samples = 0;
};

// Wall-clock per decision, environment stepping and observation building
// excluded; the first `warmup` calls are discarded.
inline TimingStats measure_decision_time(const PolicyFn& policy, Environment& env, int n_states,
                                         int warmup = 10) {
    if (n_states < 100) throw std::invalid_argument("need at least 100 sampled states");
    std::vector<SystemState> states;
    std::vector<Observation> observations;
    states.reserve(static_cast<std::size_t>(n_states + warmup));
    const int horizon = env.config().horizon;
    std::uint64_t episode = 0;
    while (static_cast<int>(states.size()) < n_states + warmup) {
        SystemState state = env.reset(7'000'000 + episode++);
        for (int t = 0; t < horizon && static_cast<int>(states.size()) < n_states + warmup; ++t) {
            states.push_back(state);
            observations.push_back(env.observe(state));
            env.step(state, am_policy(state));
        }
    }

    std::vector<double> ms;
    ms.reserve(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto decision = policy(states[i], observations[i]);
        const auto t1 = std::chrono::steady_clock::now();
        (void)decision;
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    ms.erase(ms.begin(), ms.begin() + warmup);
    std::sort(ms.begin(), ms.end());
    TimingStats stats;
    stats.samples = static_cast<int>(ms.size());
    stats.median_ms = ms[ms.size() / 2];
    stats.p95_ms = ms[static_cast<std::size_t>(0.95 * (ms.size() - 1))];
    return stats;
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

struct CellResult {
    MetricsRow row;
    std::optional<TrainResult> training;  // learning policies only
};

// Trains (if needed) and evaluates one (scenario, policy, seed) cell on
// held-out episodes.
inline CellResult run_cell(const std::string& scenario_name, const ScenarioConfig& sc,
                           PolicyKind policy, const std::string& sweep_value, std::uint64_t seed,
                           bool time_decisions) {
    CellResult cell;
    auto traces = make_traces(sc, seed);
    Environment env(make_env_config(sc, policy, seed), std::move(traces));

    AgentConfig agent = sc.agent;
    agent.seed = seed;

    PolicyFn fn;
    std::optional<ParameterSet> actor;
    if (is_learning_policy(policy)) {
        Trainer trainer(env, agent, policy);
        cell.training = trainer.train();
        actor = cell.training->actor;
        fn = make_policy(policy, env, &*actor);
    } else {
        fn = make_policy(policy, env, nullptr, &sc.ga, seed);
    }

    const EvalResult eval = evaluate_policy(env, fn, sc.eval_episodes);

    MetricsRow row;
    row.scenario = scenario_name;
    row.policy = to_string(policy);
    row.sweep_value = sweep_value;
    row.seed = seed;
    row.mean_total_delay_s = eval.mean_total_delay;
    row.mean_migration_delay_s = eval.mean_migration_delay;
    row.mean_communication_delay_s = eval.mean_communication_delay;
    row.mean_computation_delay_s = eval.mean_computation_delay;
    row.migration_frequency = eval.migration_frequency;
    row.mean_response_delay_s = eval.mean_response_delay;
    if (time_decisions) {
        // decision timing is wall-clock and intentionally not part of the
        // deterministic byte-for-byte contract; off by default
        row.mean_decision_time_ms = measure_decision_time(fn, env, 100).median_ms;
    }
    cell.row = row;
    return cell;
}

inline void write_manifest(std::ostream& out, const ExperimentConfig& cfg) {
    const auto& sc = cfg.base;
    out << "edgesim-manifest v1\n";
    out << "scenario=" << cfg.scenario << "\n";
    out << "policy=" << to_string(cfg.policy) << "\n";
    out << "sweep_axis=" << cfg.sweep.axis << "\n";
    out << "sweep_values=";
    for (std::size_t i = 0; i < cfg.sweep.values.size(); ++i)
        out << (i ? ";" : "") << cfg.sweep.values[i];
    out << "\n";
    out << "seeds=";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) out << (i ? ";" : "") << cfg.seeds[i];
    out << "\n";
    out << "measure_decision_time=" << (cfg.measure_decision_time ? 1 : 0) << "\n";
    out << "grid=" << sc.rows << "x" << sc.cols << "\n";
    out << "region_side_m=" << fmt_double(sc.region_side) << "\n";
    out << "connectivity=" << sc.connectivity << "\n";
    out << "vehicles=" << sc.n_vehicles << "\n";
    out << "horizon=" << sc.horizon << "\n";
    out << "tasks_per_slot=" << sc.tasks_per_slot << "\n";
    out << "allocation_mode=" << sc.allocation_mode << "\n";
    out << "backhaul_rate_bps=" << fmt_double(sc.params.backhaul_rate) << "\n";
    out << "migration_coeff_s=" << fmt_double(sc.params.migration_coeff) << "\n";
    out << "transmission_coeff_s=" << fmt_double(sc.params.transmission_coeff) << "\n";
    out << "noise_power_w=" << fmt_double(sc.params.noise_power) << "\n";
    out << "unit_gain=" << fmt_double(sc.params.unit_gain) << "\n";
    out << "bs_bandwidth_hz=" << fmt_double(sc.params.bs_bandwidth) << "\n";
    out << "server_capacity_hz=" << fmt_double(sc.params.server_capacity) << "\n";
    out << "data_mb=" << fmt_double(sc.data_mb.lo) << ";" << fmt_double(sc.data_mb.hi) << "\n";
    out << "density_cpb=" << fmt_double(sc.density_cpb.lo) << ";" << fmt_double(sc.density_cpb.hi)
        << "\n";
    out << "power_w=" << fmt_double(sc.power_w.lo) << ";" << fmt_double(sc.power_w.hi) << "\n";
    out << "service_mb=" << fmt_double(sc.service_mb.lo) << ";" << fmt_double(sc.service_mb.hi)
        << "\n";
    out << "trace_kind=" << sc.traces.kind << "\n";
    out << "trace_path=" << sc.traces.path << "\n";
    out << "trace_model=" << sc.traces.model << "\n";
    out << "trace_speed_mps=" << fmt_double(sc.traces.speed_mps) << "\n";
    out << "trace_slot_seconds=" << fmt_double(sc.traces.slot_seconds) << "\n";
    out << "trace_selection=most-records-in-window, first " << sc.n_vehicles << "\n";
    out << "eval_episodes=" << sc.eval_episodes << "\n";
    out << "eval_noise_sigma=0\n";
    out << "lr_actor=" << fmt_double(sc.agent.lr_actor) << "\n";
    out << "lr_critic=" << fmt_double(sc.agent.lr_critic) << "\n";
    out << "gamma=" << fmt_double(sc.agent.gamma) << "\n";
    out << "soft_update_rate=" << fmt_double(sc.agent.soft_update_rate) << "\n";
    out << "actor_delay=" << sc.agent.actor_delay << "\n";
    out << "batch_size=" << sc.agent.batch_size << "\n";
    out << "replay_capacity=" << sc.agent.replay_capacity << "\n";
    out << "noise_sigma0=" << fmt_double(sc.agent.noise_sigma0) << "\n";
    out << "noise_floor=" << fmt_double(sc.agent.noise_floor) << "\n";
    out << "noise_schedule=sigma0*max(floor,1-episode/episodes)\n";
    out << "clip_norm=" << fmt_double(sc.agent.clip_norm) << "\n";
    out << "episodes=" << sc.agent.episodes << "\n";
    out << "hidden=";
    for (std::size_t i = 0; i < sc.agent.hidden_sizes.size(); ++i)
        out << (i ? ";" : "") << sc.agent.hidden_sizes[i];
    out << "\n";
    out << "adam_beta1=0.9\nadam_beta2=0.999\nadam_epsilon=1e-08\n";
    out << "ga_population=" << sc.ga.population << "\n";
    out << "ga_generations=" << sc.ga.generations << "\n";
    out << "ga_crossover_rate=" << fmt_double(sc.ga.crossover_rate) << "\n";
    out << "ga_mutation_rate=" << fmt_double(sc.ga.mutation_rate) << "\n";
    out << "ga_tournament=" << sc.ga.tournament << "\n";
}

// Runs every (sweep value, seed) cell, writes metrics.csv, manifest.txt,
// learning curves and checkpoints; returns the metrics path.
inline std::string run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + cfg.out_dir);

    std::vector<std::string> sweep_values = cfg.sweep.values;
    if (cfg.sweep.axis == "none" || sweep_values.empty()) sweep_values = {"-"};

    std::vector<MetricsRow> rows;
    for (const auto& value : sweep_values) {
        ScenarioConfig sc = cfg.base;
        if (cfg.sweep.axis != "none" && value != "-")
            apply_sweep_value(sc, cfg.sweep.axis, value);
        for (std::uint64_t seed : cfg.seeds) {
            CellResult cell = run_cell(cfg.scenario, sc, cfg.policy, value, seed,
                                       cfg.measure_decision_time);
            if (cell.training) {
                const std::string tag = std::string(to_string(cfg.policy)) + "_" +
                                        (value == "-" ? "base" : value) + "_s" +
                                        std::to_string(seed);
                std::ofstream curve(fs::path(cfg.out_dir) / ("curve_" + tag + ".csv"));
                curve << "episode,mean_reward,migration_frequency\n";
                for (const auto& ep : cell.training->curve)
                    curve << ep.episode << ',' << fmt_double(ep.mean_reward) << ','
                          << ep.migrations << "\n";
                std::ofstream ckpt(fs::path(cfg.out_dir) / ("checkpoint_" + tag + ".txt"));
                save_checkpoint(ckpt, cell.training->actor, seed);
            }
            rows.push_back(cell.row);
        }
    }

    std::sort(rows.begin(), rows.end(), [&](const MetricsRow& a, const MetricsRow& b) {
        if (a.sweep_value != b.sweep_value) {
            const auto ia = std::find(sweep_values.begin(), sweep_values.end(), a.sweep_value);
            const auto ib = std::find(sweep_values.begin(), sweep_values.end(), b.sweep_value);
            return ia < ib;
        }
        return a.seed < b.seed;
    });

    const std::string metrics_path = (fs::path(cfg.out_dir) / "metrics.csv").string();
    std::ofstream metrics(metrics_path);
    if (!metrics) throw std::runtime_error("cannot write " + metrics_path);
    metrics << metrics_header() << "\n";
    for (const auto& r : rows) metrics << to_csv(r) << "\n";

    std::ofstream manifest(fs::path(cfg.out_dir) / "manifest.txt");
    write_manifest(manifest, cfg);
    return metrics_path;
}

// ---------------------------------------------------------------------------
// Cross-policy comparison
// ---------------------------------------------------------------------------

inline double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Column label for a compared config: the policy, plus the allocation mode
// when it is pinned away from auto (so allocation ablations of one policy get
// distinct columns).
inline std::string compare_label(const ExperimentConfig& cfg) {
    std::string label = to_string(cfg.policy);
    if (cfg.base.allocation_mode != "auto") label += "_" + cfg.base.allocation_mode;
    return label;
}

// Wide seed-median table: one row per sweep value, one column per config.
// Configs must share the sweep and seeds and should differ only in policy
// (or pinned allocation mode).
inline std::string sweep_compare(const std::vector<ExperimentConfig>& configs,
                                 const std::string& out_path,
                                 double MetricsRow::* metric = &MetricsRow::mean_total_delay_s) {
    if (configs.empty()) throw ValidationError("sweep_compare needs at least one config");
    std::vector<std::string> labels;
    for (const auto& cfg : configs) {
        if (cfg.sweep.axis != configs[0].sweep.axis || cfg.sweep.values != configs[0].sweep.values)
            throw ValidationError("sweep_compare configs must share the sweep axis and values");
        if (cfg.seeds != configs[0].seeds)
            throw ValidationError("sweep_compare configs must share seeds");
        const std::string label = compare_label(cfg);
        if (std::find(labels.begin(), labels.end(), label) != labels.end())
            throw ValidationError("sweep_compare configs collide on column " + label);
        labels.push_back(label);
    }

    std::vector<std::string> sweep_values = configs[0].sweep.values;
    if (configs[0].sweep.axis == "none" || sweep_values.empty()) sweep_values = {"-"};

    // value -> column label -> seed metrics
    std::map<std::string, std::map<std::string, std::vector<double>>> table;
    for (std::size_t c = 0; c < configs.size(); ++c) {
        const std::string metrics_path = run_experiment(configs[c]);
        std::ifstream in(metrics_path);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            MetricsRow row;
            std::istringstream ls(line);
            std::string field;
            std::vector<std::string> fields;
            while (std::getline(ls, field, ',')) fields.push_back(field);
            row.sweep_value = fields[2];
            row.mean_total_delay_s = std::stod(fields[4]);
            row.mean_migration_delay_s = std::stod(fields[5]);
            row.mean_communication_delay_s = std::stod(fields[6]);
            row.mean_computation_delay_s = std::stod(fields[7]);
            row.migration_frequency = std::stod(fields[8]);
            row.mean_decision_time_ms = std::stod(fields[9]);
            row.mean_response_delay_s = std::stod(fields[10]);
            table[row.sweep_value][labels[c]].push_back(row.*metric);
        }
    }

    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << "sweep_value";
    for (const auto& label : labels) out << ',' << label;
    out << "\n";
    for (const auto& value : sweep_values) {
        out << value;
        for (const auto& label : labels) out << ',' << fmt_double(median(table[value][label]));
        out << "\n";
    }
    return out_path;
}

// ---------------------------------------------------------------------------
// Plot-ready exports
// ---------------------------------------------------------------------------

// Tidy per-figure CSVs derived from a finished run directory: component
// breakdown bars, sweep lines, and convergence curves when present.
inline std::vector<std::string> emit_plot_data(const std::string& metrics_path) {
    namespace fs = std::filesystem;
    std::ifstream in(metrics_path);
    if (!in) throw ValidationError("cannot open metrics file: " + metrics_path);
    std::string line;
    if (!std::getline(in, line) || line != metrics_header())
        throw ValidationError("metrics file missing expected columns");

    struct Key {
        std::string policy, value;
        bool operator<(const Key& o) const {
            return policy != o.policy ? policy < o.policy : value < o.value;
        }
    };
    std::map<Key, std::vector<MetricsRow>> groups;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() != 11) throw ValidationError("metrics row has wrong arity");
        MetricsRow row;
        row.scenario = fields[0];
        row.policy = fields[1];
        row.sweep_value = fields[2];
        row.seed = std::stoull(fields[3]);
        row.mean_total_delay_s = std::stod(fields[4]);
        row.mean_migration_delay_s = std::stod(fields[5]);
        row.mean_communication_delay_s = std::stod(fields[6]);
        row.mean_computation_delay_s = std::stod(fields[7]);
        row.migration_frequency = std::stod(fields[8]);
        row.mean_decision_time_ms = std::stod(fields[9]);
        row.mean_response_delay_s = std::stod(fields[10]);
        groups[{row.policy, row.sweep_value}].push_back(row);
    }

    const fs::path dir = fs::path(metrics_path).parent_path();
    std::vector<std::string> written;

    {
        const fs::path p = dir / "fig_breakdown.csv";
        std::ofstream out(p);
        out << "policy,sweep_value,migration_s,communication_s,computation_s,total_s\n";
        for (const auto& [key, rows] : groups) {
            std::vector<double> mt, ht, ct;
            for (const auto& r : rows) {
                mt.push_back(r.mean_migration_delay_s);
                ht.push_back(r.mean_communication_delay_s);
                ct.push_back(r.mean_computation_delay_s);
            }
            const double m = median(mt), h = median(ht), c = median(ct);
            out << key.policy << ',' << key.value << ',' << fmt_double(m) << ',' << fmt_double(h)
                << ',' << fmt_double(c) << ',' << fmt_double(m + h + c) << "\n";
        }
        written.push_back(p.string());
    }
    {
        const fs::path p = dir / "fig_sweep.csv";
        std::ofstream out(p);
        out << "policy,sweep_value,median_total_delay_s,median_migration_frequency\n";
        for (const auto& [key, rows] : groups) {
            std::vector<double> total, freq;
            for (const auto& r : rows) {
                total.push_back(r.mean_total_delay_s);
                freq.push_back(r.migration_frequency);
            }
            out << key.policy << ',' << key.value << ',' << fmt_double(median(total)) << ','
                << fmt_double(median(freq)) << "\n";
        }
        written.push_back(p.string());
    }
    {
        // convergence export from any curve files sitting next to the metrics
        std::vector<fs::path> curves;
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("curve_", 0) == 0 && entry.path().extension() == ".csv")
                curves.push_back(entry.path());
        }
        std::sort(curves.begin(), curves.end());
        if (!curves.empty()) {
            const fs::path p = dir / "fig_convergence.csv";
            std::ofstream out(p);
            out << "episode,policy,reward\n";
            for (const auto& curve : curves) {
                // curve_<policy>_<value>_s<seed>.csv
                std::string stem = curve.stem().string().substr(6);
                const std::string policy = stem.substr(0, stem.find('_'));
                std::ifstream cin(curve);
                std::string row;
                std::getline(cin, row);  // header
                while (std::getline(cin, row)) {
                    const auto c1 = row.find(',');
                    const auto c2 = row.find(',', c1 + 1);
                    out << row.substr(0, c1) << ',' << policy << ','
                        << row.substr(c1 + 1, c2 - c1 - 1) << "\n";
                }
            }
            written.push_back(p.string());
        }
    }
    return written;
}

}  // namespace edgesim

#endif
