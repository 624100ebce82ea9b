#ifndef EDGESIM_ENV_HPP
#define EDGESIM_ENV_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgesim/allocator.hpp"
#include "edgesim/delay.hpp"
#include "edgesim/rng.hpp"
#include "edgesim/topology.hpp"
#include "edgesim/traces.hpp"

namespace edgesim {

struct UniformRange {
    double lo = 0.0;
    double hi = 0.0;

    void validate(const char* name) const {
        if (!(lo > 0.0) || hi < lo)
            throw std::invalid_argument(std::string(name) + " range must satisfy 0 < lo <= hi");
    }
    double sample(Rng& rng) const { return rng.uniform(lo, hi); }
    // min-max normalization onto [0, 1]
    double normalize(double v) const {
        const double width = hi - lo;
        if (width <= 0.0) return 0.0;
        return std::clamp((v - lo) / width, 0.0, 1.0);
    }
};

enum class AllocationMode { optimal, proportional };

inline const char* to_string(AllocationMode m) {
    return m == AllocationMode::optimal ? "optimal" : "proportional";
}

inline AllocationMode allocation_mode_from_string(const std::string& s) {
    if (s == "optimal") return AllocationMode::optimal;
    if (s == "proportional") return AllocationMode::proportional;
    throw std::invalid_argument("unknown allocation mode: " + s);
}

struct EnvConfig {
    Topology topology;
    DelayParams params;
    int n_vehicles = 100;
    int horizon = 240;
    // per-task / per-episode sampling ranges
    UniformRange data_mb{0.5, 1.5};        // D
    UniformRange density_cpb{200, 1000};   // C
    UniformRange power_w{0.4, 0.6};        // P
    UniformRange service_mb{0.5, 50};      // S, drawn once per vehicle per episode
    int tasks_per_slot = 1;                // traffic multiplier: tasks generated per slot
    AllocationMode allocation_mode = AllocationMode::optimal;
    std::uint64_t seed = 1;

    void validate() const {
        params.validate();
        if (n_vehicles < 1) throw std::invalid_argument("n_vehicles must be >= 1");
        if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
        if (tasks_per_slot < 1) throw std::invalid_argument("tasks_per_slot must be >= 1");
        data_mb.validate("data_mb");
        density_cpb.validate("density_cpb");
        power_w.validate("power_w");
        service_mb.validate("service_mb");
        if (topology.node_count() < 1) throw std::invalid_argument("topology is empty");
    }
};

struct VehicleState {
    Position position;
    NodeId attached = 0;      // nearest base station
    NodeId hosting = 0;       // node holding the service instance
    TaskSpec task;            // current slot's workload
    double service_bits = 0;  // migrated state size, fixed per episode
    int prev_decision = 0;    // x_{u,t-1}
};

struct SystemState {
    int slot = 0;
    std::vector<VehicleState> vehicles;
    std::vector<NodeId> initial_hosting;  // hosting nodes at slot 0 (never-migrate anchor)
};

using Observation = std::vector<double>;

struct Transition {
    Observation state;
    std::vector<double> action;
    double reward = 0.0;
    Observation next_state;
};

// Discrete-time migration/allocation environment over a fixed topology and
// trace set. Slot semantics: the caller decides on the current state, then
// one step migrates instances, advances vehicles one slot, transmits the
// current task from the new position, runs the per-node allocation, and
// returns reward = -(sum of all delay components).
class Environment {
  public:
    Environment(EnvConfig config, std::vector<VehicleTrace> traces)
        : cfg_(std::move(config)), traces_(std::move(traces)), rng_(cfg_.seed) {
        cfg_.validate();
        if (static_cast<int>(traces_.size()) < cfg_.n_vehicles)
            throw std::invalid_argument("need at least one trace per vehicle");
        for (int u = 0; u < cfg_.n_vehicles; ++u) {
            if (static_cast<int>(traces_[static_cast<std::size_t>(u)].positions.size()) <
                cfg_.horizon)
                throw std::invalid_argument("trace shorter than the horizon");
        }
    }

    const EnvConfig& config() const { return cfg_; }
    int observation_size() const { return cfg_.n_vehicles * 6; }
    int node_count() const { return cfg_.topology.node_count(); }

    SystemState reset(std::uint64_t episode_seed) {
        rng_ = Rng(derive_seed(cfg_.seed, "episode", episode_seed));
        SystemState state;
        state.slot = 0;
        state.vehicles.resize(static_cast<std::size_t>(cfg_.n_vehicles));
        state.initial_hosting.resize(static_cast<std::size_t>(cfg_.n_vehicles));
        for (int u = 0; u < cfg_.n_vehicles; ++u) {
            auto& v = state.vehicles[static_cast<std::size_t>(u)];
            v.position = clamp_to_region(cfg_.topology, trace_position(u, 0));
            v.attached = nearest_node(cfg_.topology, v.position);
            v.hosting = v.attached;  // instances start on the nearest node
            v.service_bits = megabytes_to_bits(cfg_.service_mb.sample(rng_));
            v.task = sample_task();
            v.prev_decision = v.hosting;
            state.initial_hosting[static_cast<std::size_t>(u)] = v.hosting;
        }
        return state;
    }

    // Flat normalized vector: per vehicle (x/side, y/side, D, C, S, x_prev/M).
    Observation observe(const SystemState& state) const {
        Observation obs;
        obs.reserve(static_cast<std::size_t>(observation_size()));
        const double side = cfg_.topology.region_side;
        const double m = static_cast<double>(node_count());
        for (const auto& v : state.vehicles) {
            obs.push_back(v.position.x / side);
            obs.push_back(v.position.y / side);
            obs.push_back(data_range_bits().normalize(v.task.data_bits));
            obs.push_back(cfg_.density_cpb.normalize(v.task.compute_density));
            obs.push_back(service_range_bits().normalize(v.service_bits));
            obs.push_back(static_cast<double>(v.prev_decision) / m);
        }
        return obs;
    }

    // Equal split of each base station's bandwidth among its attached vehicles.
    std::vector<double> bandwidth_shares(const SystemState& state) const {
        std::vector<int> attached_count(static_cast<std::size_t>(node_count()), 0);
        for (const auto& v : state.vehicles) ++attached_count[static_cast<std::size_t>(v.attached)];
        std::vector<double> shares;
        shares.reserve(state.vehicles.size());
        for (const auto& v : state.vehicles)
            shares.push_back(cfg_.params.bs_bandwidth /
                             attached_count[static_cast<std::size_t>(v.attached)]);
        return shares;
    }

    struct StepResult {
        double reward = 0.0;
        std::vector<DelayBreakdown> breakdowns;
    };

    // Delay outcome of applying `decisions` to `state`, without committing
    // anything: no movement, no task resampling, no RNG consumption. GA uses
    // this as its fitness oracle; step() uses it as the single source of the
    // realized delays. Optional `alloc_scores` (one raw score per vehicle)
    // switches allocation to per-node normalized exponentials of the scores.
    StepResult evaluate_decisions(const SystemState& state, const std::vector<NodeId>& decisions,
                                  const std::vector<double>* alloc_scores = nullptr) const {
        check_decisions(state, decisions);
        const int u_count = cfg_.n_vehicles;
        StepResult result;
        result.breakdowns.resize(static_cast<std::size_t>(u_count));

        // migration from the current hosting node
        for (int u = 0; u < u_count; ++u) {
            const auto& v = state.vehicles[static_cast<std::size_t>(u)];
            const int hops = hop_distance(cfg_.topology, v.hosting, decisions[static_cast<std::size_t>(u)]);
            result.breakdowns[static_cast<std::size_t>(u)].migration =
                migration_delay({v.service_bits}, hops, cfg_.params);
        }

        // vehicles advance one slot, then transmit from the new position
        std::vector<Position> next_pos(static_cast<std::size_t>(u_count));
        std::vector<NodeId> next_attached(static_cast<std::size_t>(u_count));
        std::vector<int> attached_count(static_cast<std::size_t>(node_count()), 0);
        const int next_slot = std::min(state.slot + 1, cfg_.horizon - 1);
        for (int u = 0; u < u_count; ++u) {
            next_pos[static_cast<std::size_t>(u)] =
                clamp_to_region(cfg_.topology, trace_position(u, next_slot));
            next_attached[static_cast<std::size_t>(u)] =
                nearest_node(cfg_.topology, next_pos[static_cast<std::size_t>(u)]);
            ++attached_count[static_cast<std::size_t>(next_attached[static_cast<std::size_t>(u)])];
        }

        for (int u = 0; u < u_count; ++u) {
            const auto& v = state.vehicles[static_cast<std::size_t>(u)];
            auto& b = result.breakdowns[static_cast<std::size_t>(u)];
            const NodeId bs = next_attached[static_cast<std::size_t>(u)];
            const double share =
                cfg_.params.bs_bandwidth / attached_count[static_cast<std::size_t>(bs)];
            const double len = std::max(
                1.0, distance(next_pos[static_cast<std::size_t>(u)],
                              cfg_.topology.node_positions[static_cast<std::size_t>(bs)]));
            b.access = access_delay(v.task, share, snr(v.task, len, cfg_.params));
            b.backhaul = backhaul_delay(
                v.task, hop_distance(cfg_.topology, bs, decisions[static_cast<std::size_t>(u)]),
                cfg_.params);
        }

        // per-node allocation over the instances the decisions placed there
        std::vector<std::vector<int>> hosted(static_cast<std::size_t>(node_count()));
        for (int u = 0; u < u_count; ++u)
            hosted[static_cast<std::size_t>(decisions[static_cast<std::size_t>(u)])].push_back(u);
        for (const auto& instances : hosted) {
            if (instances.empty()) continue;
            AllocationRequest req;
            req.cycles.reserve(instances.size());
            for (int u : instances)
                req.cycles.push_back(required_cycles(state.vehicles[static_cast<std::size_t>(u)].task));
            std::vector<double> shares;
            if (alloc_scores) {
                shares = normalized_exponentials(*alloc_scores, instances);
            } else if (cfg_.allocation_mode == AllocationMode::optimal) {
                shares = optimal_allocation(req).proportions;
            } else {
                shares = proportional_allocation(req).proportions;
            }
            for (std::size_t i = 0; i < instances.size(); ++i)
                result.breakdowns[static_cast<std::size_t>(instances[i])].computation =
                    computation_delay(req.cycles[i], shares[i], cfg_.params);
        }

        result.reward = -slot_total(result.breakdowns);
        return result;
    }

    // Commits one slot: migrate, move, transmit, compute, then sample the
    // next slot's tasks.
    StepResult step(SystemState& state, const std::vector<NodeId>& decisions,
                    const std::vector<double>* alloc_scores = nullptr) {
        if (state.slot >= cfg_.horizon)
            throw std::runtime_error("episode finished: step past the horizon");
        StepResult result = evaluate_decisions(state, decisions, alloc_scores);

        const int next_slot = std::min(state.slot + 1, cfg_.horizon - 1);
        for (int u = 0; u < cfg_.n_vehicles; ++u) {
            auto& v = state.vehicles[static_cast<std::size_t>(u)];
            v.hosting = decisions[static_cast<std::size_t>(u)];
            v.prev_decision = decisions[static_cast<std::size_t>(u)];
            v.position = clamp_to_region(cfg_.topology, trace_position(u, next_slot));
            v.attached = nearest_node(cfg_.topology, v.position);
            v.task = sample_task();
        }
        state.slot += 1;
        return result;
    }

    bool done(const SystemState& state) const { return state.slot >= cfg_.horizon; }

  private:
    Position trace_position(int vehicle, int slot) const {
        return traces_[static_cast<std::size_t>(vehicle)]
            .positions[static_cast<std::size_t>(slot)];
    }

    UniformRange data_range_bits() const {
        return {megabytes_to_bits(cfg_.data_mb.lo) * cfg_.tasks_per_slot,
                megabytes_to_bits(cfg_.data_mb.hi) * cfg_.tasks_per_slot};
    }
    UniformRange service_range_bits() const {
        return {megabytes_to_bits(cfg_.service_mb.lo), megabytes_to_bits(cfg_.service_mb.hi)};
    }

    TaskSpec sample_task() {
        TaskSpec task;
        task.data_bits = 0.0;
        for (int i = 0; i < cfg_.tasks_per_slot; ++i)
            task.data_bits += megabytes_to_bits(cfg_.data_mb.sample(rng_));
        task.compute_density = cfg_.density_cpb.sample(rng_);
        task.tx_power = cfg_.power_w.sample(rng_);
        return task;
    }

    void check_decisions(const SystemState& state, const std::vector<NodeId>& decisions) const {
        if (static_cast<int>(decisions.size()) != cfg_.n_vehicles)
            throw std::invalid_argument("need one decision per vehicle");
        for (NodeId d : decisions)
            if (d < 0 || d >= node_count())
                throw std::invalid_argument("migration decision out of range");
        if (static_cast<int>(state.vehicles.size()) != cfg_.n_vehicles)
            throw std::invalid_argument("state does not match environment");
    }

    std::vector<double> normalized_exponentials(const std::vector<double>& scores,
                                                const std::vector<int>& instances) const {
        if (static_cast<int>(scores.size()) != cfg_.n_vehicles)
            throw std::invalid_argument("need one allocation score per vehicle");
        double max_score = -std::numeric_limits<double>::infinity();
        for (int u : instances) max_score = std::max(max_score, scores[static_cast<std::size_t>(u)]);
        std::vector<double> shares;
        shares.reserve(instances.size());
        double sum = 0.0;
        for (int u : instances) {
            const double e = std::exp(scores[static_cast<std::size_t>(u)] - max_score);
            shares.push_back(e);
            sum += e;
        }
        for (double& s : shares) s /= sum;
        return shares;
    }

    EnvConfig cfg_;
    std::vector<VehicleTrace> traces_;
    Rng rng_;
};

// Episode log rows `slot,vehicle,decision,MT,PT,ST,CT`, one per vehicle plus
// a per-slot summary row with vehicle=-1 carrying the component sums.
class EpisodeLogger {
  public:
    explicit EpisodeLogger(std::ostream& out) : out_(out) {
        out_ << "slot,vehicle,decision,MT,PT,ST,CT\n";
    }

    void log_slot(int slot, const std::vector<NodeId>& decisions,
                  const std::vector<DelayBreakdown>& breakdowns) {
        char buf[192];
        DelayBreakdown sum;
        for (std::size_t u = 0; u < breakdowns.size(); ++u) {
            const auto& b = breakdowns[u];
            std::snprintf(buf, sizeof(buf), "%d,%zu,%d,%.17g,%.17g,%.17g,%.17g\n", slot, u,
                          decisions[u], b.migration, b.access, b.backhaul, b.computation);
            out_ << buf;
            sum.migration += b.migration;
            sum.access += b.access;
            sum.backhaul += b.backhaul;
            sum.computation += b.computation;
        }
        std::snprintf(buf, sizeof(buf), "%d,-1,-1,%.17g,%.17g,%.17g,%.17g\n", slot, sum.migration,
                      sum.access, sum.backhaul, sum.computation);
        out_ << buf;
    }

  private:
    std::ostream& out_;
};

}  // namespace edgesim

#endif
