#ifndef EDGESIM_SELFTEST_HPP
#define EDGESIM_SELFTEST_HPP

#include <cmath>
#include <ostream>
#include <sstream>

#include "edgesim/agents.hpp"
#include "edgesim/allocator.hpp"
#include "edgesim/delay.hpp"
#include "edgesim/env.hpp"
#include "edgesim/topology.hpp"
#include "edgesim/traces.hpp"

namespace edgesim {

// Quick end-to-end sanity pass for installs and CI; prints one line per check.
inline bool run_selftest(std::ostream& out) {
    int failures = 0;
    auto check = [&](const char* name, bool ok) {
        out << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
        if (!ok) ++failures;
    };
    auto close_rel = [](double a, double b, double rel) {
        return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
    };

    const DelayParams p;
    check("migration delay hand value", close_rel(migration_delay({4.0e8}, 2, p), 3.8, 1e-9));
    check("snr hand value", close_rel(snr({8e6, 600.0, 0.5}, 100.0, p), 5000.0, 1e-9));
    check("access delay hand value",
          close_rel(access_delay({8e6, 600.0, 0.5}, 2e6, 5000.0), 0.32552080976413333, 1e-9));
    check("backhaul delay hand value", close_rel(backhaul_delay({8e6, 600.0, 0.5}, 3, p), 0.916, 1e-9));
    check("computation delay hand value", close_rel(computation_delay(4.8e9, 0.25, p), 0.32, 1e-9));

    const AllocationRequest req{{1.0, 4.0, 9.0}};
    const auto opt = optimal_allocation(req);
    check("closed-form allocation", close_rel(opt.proportions[2], 0.5, 1e-12));
    check("kkt residual at the optimum", kkt_residual(req, opt) < 1e-9);
    check("allocation dominance",
          allocation_objective(req, opt) < allocation_objective(req, proportional_allocation(req)));

    const auto topo = build_grid_topology(4, 4, 4000.0, Connectivity::high);
    check("hop metric corner-to-corner", hop_distance(topo, 0, 15) == 6);

    EnvConfig env_cfg;
    env_cfg.topology = build_grid_topology(2, 2, 2000.0, Connectivity::high);
    env_cfg.n_vehicles = 4;
    env_cfg.horizon = 10;
    env_cfg.seed = 3;
    const auto traces = synthetic_traces(MobilityModel::random_waypoint, 4, 10, 2000.0, 10.0, 3);
    Environment env_a(env_cfg, traces), env_b(env_cfg, traces);
    auto sa = env_a.reset(0);
    auto sb = env_b.reset(0);
    bool identical = true;
    for (int t = 0; t < 10; ++t) {
        const auto ra = env_a.step(sa, am_policy(sa));
        const auto rb = env_b.step(sb, am_policy(sb));
        identical = identical && ra.reward == rb.reward;
    }
    check("environment determinism", identical);

    return failures == 0;
}

}  // namespace edgesim

#endif
