#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "edgesim/harness.hpp"
#include "edgesim/selftest.hpp"

using namespace edgesim;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("edgesim_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// small deterministic scenario shared by the harness tests
std::string tiny_config_json(const std::string& out_dir, const std::string& policy = "nm") {
    return R"({
      "scenario": "tiny",
      "policy": ")" + policy + R"(",
      "seeds": [1],
      "env": {
        "rows": 2, "cols": 2, "region_side_m": 2000, "vehicles": 3, "horizon": 6,
        "eval_episodes": 2,
        "traces": {"kind": "synthetic", "model": "random_waypoint", "speed_mps": 12},
        "agent": {"episodes": 2, "batch_size": 4, "hidden": [8, 8]},
        "ga": {"population": 6, "generations": 3}
      },
      "out": ")" + out_dir + R"("
    })";
}

}  // namespace

TEST_CASE("config parsing: defaults, overrides, strict keys") {
    SECTION("minimal config") {
        const auto cfg = parse_experiment_config(R"({"policy": "am"})");
        CHECK(cfg.policy == PolicyKind::AM);
        CHECK(cfg.base.rows == 4);
        CHECK(cfg.base.agent.batch_size == 512);
        CHECK(cfg.base.agent.lr_actor == 1e-5);
        CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
    }
    SECTION("unknown top-level key is rejected with its path") {
        CHECK_THROWS_MATCHES(parse_experiment_config(R"({"polizy": "am"})"), ValidationError,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("polizy")));
    }
    SECTION("unknown nested key is rejected with its path") {
        try {
            parse_experiment_config(R"({"env": {"params": {"chi": 1}}})");
            FAIL("expected validation error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("config.env.params.chi") != std::string::npos);
        }
    }
    SECTION("bad json is a validation error") {
        CHECK_THROWS_AS(parse_experiment_config("{"), ValidationError);
    }
    SECTION("sweep axis is validated") {
        CHECK_THROWS_AS(parse_experiment_config(R"({"sweep": {"axis": "warp", "values": ["1"]}})"),
                        ValidationError);
        CHECK_THROWS_AS(parse_experiment_config(R"({"sweep": {"axis": "task_count"}})"),
                        ValidationError);
    }
    SECTION("empty seeds rejected") {
        CHECK_THROWS_AS(parse_experiment_config(R"({"seeds": []})"), ValidationError);
    }
    SECTION("ranges and params parse") {
        const auto cfg = parse_experiment_config(
            R"({"env": {"data_mb": [1, 2], "params": {"server_capacity_hz": 3e10}}})");
        CHECK(cfg.base.data_mb.lo == 1.0);
        CHECK(cfg.base.data_mb.hi == 2.0);
        CHECK(cfg.base.params.server_capacity == 3e10);
    }
}

TEST_CASE("sweep value application") {
    ScenarioConfig sc;
    apply_sweep_value(sc, "server_capacity", "1e10");
    CHECK(sc.params.server_capacity == 1e10);
    apply_sweep_value(sc, "migration_coeff", "4.5");
    CHECK(sc.params.migration_coeff == 4.5);
    apply_sweep_value(sc, "task_count", "3");
    CHECK(sc.tasks_per_slot == 3);
    apply_sweep_value(sc, "topology_kind", "low");
    CHECK(sc.connectivity == "low");
    apply_sweep_value(sc, "backhaul_rate", "2.5e8");
    CHECK(sc.params.backhaul_rate == 2.5e8);
    apply_sweep_value(sc, "vehicle_count", "40");
    CHECK(sc.n_vehicles == 40);
    CHECK_THROWS_AS(apply_sweep_value(sc, "topology_kind", "ring"), std::invalid_argument);
    CHECK_THROWS_AS(apply_sweep_value(sc, "vehicle_count", "many"), ValidationError);
}

TEST_CASE("effective allocation mode") {
    ScenarioConfig sc;
    CHECK(effective_allocation_mode(sc, PolicyKind::SRCL) == AllocationMode::optimal);
    CHECK(effective_allocation_mode(sc, PolicyKind::AM) == AllocationMode::proportional);
    CHECK(effective_allocation_mode(sc, PolicyKind::DDPG) == AllocationMode::proportional);
    sc.allocation_mode = "optimal";
    CHECK(effective_allocation_mode(sc, PolicyKind::AM) == AllocationMode::optimal);
    sc.allocation_mode = "proportional";
    CHECK(effective_allocation_mode(sc, PolicyKind::SRCL) == AllocationMode::proportional);
}

TEST_CASE("run_experiment: nm baseline, single value, single seed") {
    TempDir tmp;
    const auto cfg = parse_experiment_config(tiny_config_json((tmp.path / "run").string()));
    const std::string metrics = run_experiment(cfg);

    std::ifstream in(metrics);
    std::string header, row, extra;
    REQUIRE(std::getline(in, header));
    CHECK(header == metrics_header());
    REQUIRE(std::getline(in, row));
    CHECK_FALSE(std::getline(in, extra));  // exactly 1 row

    // nm never migrates
    std::istringstream rs(row);
    std::vector<std::string> fields;
    std::string field;
    while (std::getline(rs, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 11);
    CHECK(fields[1] == "nm");
    CHECK(std::stod(fields[8]) == 0.0);

    // component sums match the total
    const double total = std::stod(fields[4]);
    const double parts = std::stod(fields[5]) + std::stod(fields[6]) + std::stod(fields[7]);
    CHECK(std::abs(total - parts) < 1e-9);

    CHECK(fs::exists(tmp.path / "run" / "manifest.txt"));
}

TEST_CASE("run_experiment: 3 sweep values x 2 seeds give 6 rows") {
    TempDir tmp;
    auto cfg = parse_experiment_config(tiny_config_json((tmp.path / "run").string(), "am"));
    cfg.seeds = {1, 2};
    cfg.sweep.axis = "server_capacity";
    cfg.sweep.values = {"3e10", "6e10", "9e10"};
    const std::string metrics = run_experiment(cfg);

    std::ifstream in(metrics);
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 6);
}

TEST_CASE("run_experiment is byte-deterministic") {
    TempDir tmp;
    const auto cfg_a =
        parse_experiment_config(tiny_config_json((tmp.path / "a").string(), "srcl"));
    const auto cfg_b =
        parse_experiment_config(tiny_config_json((tmp.path / "b").string(), "srcl"));
    const std::string metrics_a = run_experiment(cfg_a);
    const std::string metrics_b = run_experiment(cfg_b);
    CHECK(slurp(metrics_a) == slurp(metrics_b));
    CHECK(slurp(tmp.path / "a" / "manifest.txt") == slurp(tmp.path / "b" / "manifest.txt"));
    // learning artifacts exist for the learning policy
    CHECK(fs::exists(tmp.path / "a" / "curve_srcl_base_s1.csv"));
    CHECK(fs::exists(tmp.path / "a" / "checkpoint_srcl_base_s1.txt"));
}

TEST_CASE("sweep_compare builds a wide seed-median table") {
    TempDir tmp;
    std::vector<ExperimentConfig> configs;
    for (const std::string policy : {"am", "nm"}) {
        auto cfg = parse_experiment_config(
            tiny_config_json((tmp.path / policy).string(), policy));
        cfg.sweep.axis = "server_capacity";
        cfg.sweep.values = {"6e10"};
        configs.push_back(std::move(cfg));
    }
    const std::string table_path =
        sweep_compare(configs, (tmp.path / "comparison.csv").string());
    std::ifstream in(table_path);
    std::string header, row;
    REQUIRE(std::getline(in, header));
    CHECK(header == "sweep_value,am,nm");
    REQUIRE(std::getline(in, row));
    CHECK(row.rfind("6e10,", 0) == 0);

    SECTION("mismatched sweep axes are rejected") {
        configs[1].sweep.values = {"1e10"};
        CHECK_THROWS_AS(sweep_compare(configs, (tmp.path / "x.csv").string()), ValidationError);
    }
    SECTION("colliding columns are rejected") {
        configs[1].policy = configs[0].policy;
        CHECK_THROWS_AS(sweep_compare(configs, (tmp.path / "y.csv").string()), ValidationError);
    }
}

TEST_CASE("sweep_compare replays the allocator dominance on the ct column") {
    // one am decision stream, two pinned allocation modes: the optimal column
    // never exceeds the proportional one on computation delay
    TempDir tmp;
    std::vector<ExperimentConfig> configs;
    for (const std::string mode : {"optimal", "proportional"}) {
        auto cfg = parse_experiment_config(tiny_config_json((tmp.path / mode).string(), "am"));
        cfg.base.allocation_mode = mode;
        cfg.seeds = {1, 2, 3};
        configs.push_back(std::move(cfg));
    }
    const std::string path =
        sweep_compare(configs, (tmp.path / "ct.csv").string(),
                      &MetricsRow::mean_computation_delay_s);
    std::ifstream in(path);
    std::string header, row;
    REQUIRE(std::getline(in, header));
    CHECK(header == "sweep_value,am_optimal,am_proportional");
    REQUIRE(std::getline(in, row));
    const auto c1 = row.find(',');
    const auto c2 = row.find(',', c1 + 1);
    const double ct_opt = std::stod(row.substr(c1 + 1, c2 - c1 - 1));
    const double ct_prop = std::stod(row.substr(c2 + 1));
    CHECK(ct_opt <= ct_prop * (1.0 + 1e-12));
}

TEST_CASE("median rules") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);           // odd count: exact sample
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);      // even count: midpoint
    CHECK_THROWS_AS(median({}), std::invalid_argument);
}

TEST_CASE("decision time measurement") {
    EnvConfig env_cfg;
    env_cfg.topology = build_grid_topology(2, 2, 2000.0, Connectivity::high);
    env_cfg.n_vehicles = 4;
    env_cfg.horizon = 30;
    env_cfg.seed = 9;
    Environment env(env_cfg, synthetic_traces(MobilityModel::random_waypoint, 4, 30, 2000.0,
                                              10.0, 5));
    const auto nm = make_policy(PolicyKind::NM, env);
    const auto stats = measure_decision_time(nm, env, 120);
    CHECK(stats.samples == 120);
    CHECK(stats.median_ms >= 0.0);
    CHECK(stats.p95_ms >= stats.median_ms);
    CHECK_THROWS_AS(measure_decision_time(nm, env, 50), std::invalid_argument);
}

TEST_CASE("emit_plot_data produces tidy figure csvs") {
    TempDir tmp;
    auto cfg = parse_experiment_config(tiny_config_json((tmp.path / "run").string(), "srcl"));
    cfg.seeds = {1, 2, 3};
    const std::string metrics = run_experiment(cfg);
    const auto files = emit_plot_data(metrics);
    REQUIRE(files.size() == 3);  // breakdown, sweep, convergence

    const std::string breakdown = slurp(files[0]);
    CHECK(breakdown.rfind("policy,sweep_value,migration_s,", 0) == 0);
    {
        // component rows sum to the total column
        std::istringstream in(breakdown);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            std::istringstream ls(line);
            std::string f;
            std::vector<std::string> fields;
            while (std::getline(ls, f, ',')) fields.push_back(f);
            const double sum =
                std::stod(fields[2]) + std::stod(fields[3]) + std::stod(fields[4]);
            CHECK(std::abs(sum - std::stod(fields[5])) < 1e-9);
        }
    }
    const std::string convergence = slurp(files[2]);
    CHECK(convergence.rfind("episode,policy,reward", 0) == 0);
    CHECK(convergence.find("srcl") != std::string::npos);

    SECTION("missing columns are a validation error") {
        const fs::path bad = tmp.path / "bad.csv";
        std::ofstream out(bad);
        out << "nope\n1\n";
        out.close();
        CHECK_THROWS_AS(emit_plot_data(bad.string()), ValidationError);
    }
}

TEST_CASE("selftest passes") {
    std::ostringstream out;
    CHECK(run_selftest(out));
    CHECK(out.str().find("[FAIL]") == std::string::npos);
}
