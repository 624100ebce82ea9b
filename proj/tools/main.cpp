// Command-line front end: train / eval / sweep / trace-convert / selftest.
// Exit codes: 0 success, 2 validation error, 3 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edgesim/harness.hpp"
#include "edgesim/selftest.hpp"

namespace {

using namespace edgesim;

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string policy;
    std::string trace_path;
    std::string synthetic_model;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_policy = true) {
    cmd->add_option("--config", args.config_path, "experiment config (json)");
    cmd->add_option("--seed", args.seed, "override: single run seed");
    cmd->add_option("--out", args.out_dir, "override: output directory");
    if (with_policy) cmd->add_option("--policy", args.policy, "override: policy kind");
    cmd->add_option("--trace", args.trace_path, "override: slotted trace csv");
    cmd->add_option("--synthetic", args.synthetic_model,
                    "override: synthetic mobility model (random_waypoint|linear)");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
    ExperimentConfig cfg;
    if (!args.config_path.empty()) cfg = load_experiment_config(args.config_path);
    if (args.seed) cfg.seeds = {*args.seed};
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (!args.policy.empty()) cfg.policy = policy_from_string(args.policy);
    if (!args.trace_path.empty()) {
        cfg.base.traces.kind = "csv";
        cfg.base.traces.path = args.trace_path;
    }
    if (!args.synthetic_model.empty()) {
        cfg.base.traces.kind = "synthetic";
        cfg.base.traces.model = args.synthetic_model;
        mobility_from_string(args.synthetic_model);
    }
    return cfg;
}

int cmd_train(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    if (!is_learning_policy(cfg.policy))
        throw ValidationError("train needs a learning policy (srcl, ddpg or jsr)");
    const std::string metrics = run_experiment(cfg);
    std::cout << "metrics: " << metrics << "\n";
    for (const auto& f : emit_plot_data(metrics)) std::cout << "plot data: " << f << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path, bool episode_log) {
    ExperimentConfig cfg = resolve_config(args);
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + cfg.out_dir);

    const std::uint64_t seed = cfg.seeds.front();
    auto traces = make_traces(cfg.base, seed);
    Environment env(make_env_config(cfg.base, cfg.policy, seed), std::move(traces));

    std::optional<ParameterSet> actor;
    PolicyFn fn;
    if (is_learning_policy(cfg.policy)) {
        if (checkpoint_path.empty())
            throw ValidationError("eval of a learned policy needs --checkpoint");
        std::ifstream in(checkpoint_path);
        if (!in) throw std::runtime_error("cannot open checkpoint: " + checkpoint_path);
        actor = load_checkpoint(in);
        fn = make_policy(cfg.policy, env, &*actor);
    } else {
        fn = make_policy(cfg.policy, env, nullptr, &cfg.base.ga, seed);
    }

    const EvalResult result = evaluate_policy(env, fn, cfg.base.eval_episodes);
    std::cout << "policy=" << to_string(cfg.policy) << " episodes=" << result.episodes
              << " mean_total_delay_s=" << fmt_double(result.mean_total_delay)
              << " migration_frequency=" << fmt_double(result.migration_frequency)
              << " mean_response_delay_s=" << fmt_double(result.mean_response_delay) << "\n";

    if (episode_log) {
        const std::string log_path =
            (fs::path(cfg.out_dir) / ("episode_" + std::string(to_string(cfg.policy)) + ".csv"))
                .string();
        std::ofstream out(log_path);
        EpisodeLogger logger(out);
        SystemState state = env.reset(1'000'000);
        for (int t = 0; t < env.config().horizon; ++t) {
            const Observation obs = env.observe(state);
            const PolicyDecision d = fn(state, obs);
            const int slot = state.slot;
            const auto outcome =
                env.step(state, d.decisions, d.alloc_scores ? &*d.alloc_scores : nullptr);
            logger.log_slot(slot, d.decisions, outcome.breakdowns);
        }
        std::cout << "episode log: " << log_path << "\n";
    }
    return 0;
}

int cmd_sweep(const CommonArgs& args, const std::vector<std::string>& policies) {
    ExperimentConfig cfg = resolve_config(args);
    std::vector<ExperimentConfig> configs;
    if (policies.empty()) {
        configs.push_back(cfg);
    } else {
        for (const auto& p : policies) {
            ExperimentConfig c = cfg;
            c.policy = policy_from_string(p);
            c.out_dir = (std::filesystem::path(cfg.out_dir) / p).string();
            configs.push_back(std::move(c));
        }
    }
    const std::string table = sweep_compare(
        configs, (std::filesystem::path(cfg.out_dir) / "comparison.csv").string());
    std::cout << "comparison: " << table << "\n";
    for (const auto& c : configs)
        for (const auto& f :
             emit_plot_data((std::filesystem::path(c.out_dir) / "metrics.csv").string()))
            std::cout << "plot data: " << f << "\n";
    return 0;
}

int cmd_trace_convert(const std::string& input, const std::string& output, double lat_min,
                      double lat_max, double lon_min, double lon_max, double region_side,
                      double slot_seconds, int slots, const std::string& start) {
    std::ifstream in(input);
    if (!in) throw std::runtime_error("cannot open trace file: " + input);
    ParseStats stats;
    const auto records = parse_trace_stream(in, &stats);

    double start_time;
    if (start.empty()) {
        start_time = records.front().timestamp;
        for (const auto& r : records) start_time = std::min(start_time, r.timestamp);
    } else if (!detail::parse_timestamp(start, start_time)) {
        throw ValidationError("--start: cannot parse timestamp '" + start + "'");
    }

    const BoundingBox bbox{lat_min, lat_max, lon_min, lon_max};
    const auto traces =
        resample_to_slots(records, bbox, region_side, slot_seconds, slots, start_time);

    std::ofstream out(output);
    if (!out) throw std::runtime_error("cannot write " + output);
    write_trace_csv(out, traces);
    std::cout << "records parsed=" << stats.parsed << " skipped=" << stats.skipped
              << " vehicles=" << traces.size() << " slots=" << slots << " -> " << output << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"edge service migration and resource allocation simulator"};
    app.require_subcommand(1);

    CommonArgs train_args, eval_args, sweep_args;
    std::string checkpoint_path;
    bool episode_log = false;
    std::vector<std::string> sweep_policies;

    auto* train = app.add_subcommand("train", "train a learning policy and evaluate it");
    add_common(train, train_args);

    auto* eval = app.add_subcommand("eval", "evaluate a policy on held-out episodes");
    add_common(eval, eval_args);
    eval->add_option("--checkpoint", checkpoint_path, "actor checkpoint for learned policies");
    eval->add_flag("--episode-log", episode_log, "write a per-slot episode log csv");

    auto* sweep = app.add_subcommand("sweep", "run the configured sweep, optionally per policy");
    add_common(sweep, sweep_args, false);
    sweep->add_option("--policies", sweep_policies, "policies to compare")->delimiter(',');

    std::string tc_in, tc_out, tc_start;
    double lat_min = 41.856, lat_max = 41.928, lon_min = 12.442, lon_max = 12.5387;
    double tc_side = 4000.0, tc_slot = 60.0;
    int tc_slots = 240;
    auto* convert = app.add_subcommand("trace-convert", "resample raw gps records to slot csv");
    convert->add_option("--trace", tc_in, "raw records: id;timestamp;POINT(lat lon)")->required();
    convert->add_option("--out", tc_out, "output csv path")->required();
    convert->add_option("--lat-min", lat_min, "bounding box");
    convert->add_option("--lat-max", lat_max, "bounding box");
    convert->add_option("--lon-min", lon_min, "bounding box");
    convert->add_option("--lon-max", lon_max, "bounding box");
    convert->add_option("--region-side", tc_side, "target region side, meters");
    convert->add_option("--slot-seconds", tc_slot, "slot duration");
    convert->add_option("--slots", tc_slots, "number of slots");
    convert->add_option("--start", tc_start, "window start timestamp (default: first record)");

    auto* selftest = app.add_subcommand("selftest", "run built-in sanity checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (train->parsed()) return cmd_train(train_args);
        if (eval->parsed()) return cmd_eval(eval_args, checkpoint_path, episode_log);
        if (sweep->parsed()) return cmd_sweep(sweep_args, sweep_policies);
        if (convert->parsed())
            return cmd_trace_convert(tc_in, tc_out, lat_min, lat_max, lon_min, lon_max, tc_side,
                                     tc_slot, tc_slots, tc_start);
        if (selftest->parsed()) return run_selftest(std::cout) ? 0 : kExitRuntime;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
