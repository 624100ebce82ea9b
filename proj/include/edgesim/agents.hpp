#ifndef EDGESIM_AGENTS_HPP
#define EDGESIM_AGENTS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "edgesim/env.hpp"
#include "edgesim/nn.hpp"
#include "edgesim/rng.hpp"

namespace edgesim {

enum class PolicyKind { SRCL, DDPG, JSR, AM, NM, GA };

inline const char* to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::SRCL: return "srcl";
        case PolicyKind::DDPG: return "ddpg";
        case PolicyKind::JSR: return "jsr";
        case PolicyKind::AM: return "am";
        case PolicyKind::NM: return "nm";
        case PolicyKind::GA: return "ga";
    }
    return "?";
}

inline PolicyKind policy_from_string(const std::string& s) {
    if (s == "srcl") return PolicyKind::SRCL;
    if (s == "ddpg") return PolicyKind::DDPG;
    if (s == "jsr") return PolicyKind::JSR;
    if (s == "am") return PolicyKind::AM;
    if (s == "nm") return PolicyKind::NM;
    if (s == "ga") return PolicyKind::GA;
    throw std::invalid_argument("unknown policy kind: " + s);
}

inline bool is_learning_policy(PolicyKind k) {
    return k == PolicyKind::SRCL || k == PolicyKind::DDPG || k == PolicyKind::JSR;
}

struct AgentConfig {
    double lr_actor = 1e-5;
    double lr_critic = 1e-4;
    double gamma = 0.95;
    double soft_update_rate = 1e-2;  // omega
    int actor_delay = 5;             // lambda: critic updates per actor update
    int batch_size = 512;
    std::size_t replay_capacity = 10000;
    double noise_sigma0 = 0.15;
    double noise_floor = 0.05;  // schedule floor as a fraction of sigma0
    double clip_norm = 2.0;
    int episodes = 200;
    std::vector<int> hidden_sizes{512, 256};
    std::uint64_t seed = 1;

    void validate() const {
        if (!(gamma > 0.0) || gamma >= 1.0) throw std::invalid_argument("gamma must be in (0, 1)");
        if (actor_delay < 1) throw std::invalid_argument("actor_delay must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (replay_capacity < 1) throw std::invalid_argument("replay_capacity must be >= 1");
        if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
        if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be > 0");
        if (!(lr_actor > 0.0) || !(lr_critic > 0.0))
            throw std::invalid_argument("learning rates must be > 0");
        if (soft_update_rate < 0.0 || soft_update_rate > 1.0)
            throw std::invalid_argument("soft_update_rate must be in [0, 1]");
        if (hidden_sizes.empty()) throw std::invalid_argument("need at least one hidden layer");
    }

    // sigma_episode = sigma0 * max(floor, 1 - episode/E)
    double noise_sigma(int episode) const {
        const double frac = 1.0 - static_cast<double>(episode) / episodes;
        return noise_sigma0 * std::max(noise_floor, frac);
    }
};

// Fixed-capacity ring buffer with seeded uniform sampling (with replacement).
class ReplayMemory {
  public:
    explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
        if (capacity < 1) throw std::invalid_argument("replay capacity must be >= 1");
    }

    void push(Transition t) {
        if (buffer_.size() < capacity_) {
            buffer_.push_back(std::move(t));
        } else {
            buffer_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return buffer_.size(); }
    std::size_t capacity() const { return capacity_; }

    // i-th oldest transition still stored
    const Transition& oldest(std::size_t i) const {
        return buffer_[(head_ + i) % buffer_.size()];
    }

    const Transition& sample(Rng& rng) const {
        if (buffer_.empty()) throw std::runtime_error("sampling from empty replay memory");
        return buffer_[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(buffer_.size())))];
    }

    std::vector<Transition> sample_batch(int n, Rng& rng) const {
        std::vector<Transition> batch;
        batch.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) batch.push_back(sample(rng));
        return batch;
    }

  private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> buffer_;
};

struct ActionSelection {
    std::vector<double> scores;     // continuous action stored in replay
    std::vector<NodeId> decisions;  // per-vehicle argmax over the score rows
};

namespace detail {

inline std::vector<NodeId> argmax_rows(const std::vector<double>& scores, int n_vehicles,
                                       int n_nodes) {
    std::vector<NodeId> decisions(static_cast<std::size_t>(n_vehicles), 0);
    for (int u = 0; u < n_vehicles; ++u) {
        const double* row = scores.data() + static_cast<std::size_t>(u) * n_nodes;
        int best = 0;
        for (int m = 1; m < n_nodes; ++m)
            if (row[m] > row[best]) best = m;
        decisions[static_cast<std::size_t>(u)] = best;
    }
    return decisions;
}

}  // namespace detail

// Bounded actor scores plus exploration noise; the environment consumes the
// per-row argmax while replay keeps the continuous vector. The noise is left
// unclipped: clamping would pile scores onto the bound and bias the argmax
// toward low indices under heavy exploration.
inline ActionSelection select_action(const ParameterSet& actor, const Observation& obs,
                                     double noise_sigma, Rng& noise_rng, int n_vehicles,
                                     int n_nodes) {
    if (actor.spec.output_size() < n_vehicles * n_nodes)
        throw std::invalid_argument("actor output smaller than the decision matrix");
    ActionSelection sel;
    sel.scores = forward(actor, obs);
    if (noise_sigma > 0.0)
        for (double& s : sel.scores) s += noise_rng.normal(0.0, noise_sigma);
    sel.decisions = detail::argmax_rows(sel.scores, n_vehicles, n_nodes);
    return sel;
}

// One clipped Adam step on the critic toward the bootstrapped targets
// y = r + gamma * target_critic(s', target_actor(s')); returns the pre-step
// mean squared error.
inline double critic_update(const std::vector<Transition>& batch, ParameterSet& critic,
                            const ParameterSet& target_actor, const ParameterSet& target_critic,
                            double gamma, OptimizerState& opt, double clip_norm) {
    if (batch.empty()) throw std::invalid_argument("empty training batch");
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    Gradients grads = zero_gradients(critic.spec);
    double loss = 0.0;
    std::vector<double> critic_in;
    for (const auto& t : batch) {
        const auto next_action = forward(target_actor, t.next_state);
        critic_in.assign(t.next_state.begin(), t.next_state.end());
        critic_in.insert(critic_in.end(), next_action.begin(), next_action.end());
        const double target_q = forward(target_critic, critic_in)[0];
        const double y = t.reward + gamma * target_q;
        if (!std::isfinite(y)) throw std::runtime_error("non-finite critic target");

        critic_in.assign(t.state.begin(), t.state.end());
        critic_in.insert(critic_in.end(), t.action.begin(), t.action.end());
        const double q = forward(critic, critic_in)[0];
        const double err = q - y;
        loss += err * err * inv_n;

        const double dq[1] = {2.0 * err * inv_n};
        add_scaled(grads, backward(critic, critic_in, dq), 1.0);
    }
    adam_step(critic, grads, opt, clip_norm);
    return loss;
}

// Deterministic policy-gradient ascent on J = mean critic(s, actor(s));
// returns the clipped gradient's global norm.
inline double actor_update(const std::vector<Transition>& batch, ParameterSet& actor,
                           const ParameterSet& critic, OptimizerState& opt, double clip_norm) {
    if (batch.empty()) throw std::invalid_argument("empty training batch");
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    const int obs_size = actor.spec.input_size();
    const int action_size = actor.spec.output_size();
    Gradients grads = zero_gradients(actor.spec);
    std::vector<double> critic_in;
    const double dq[1] = {1.0};
    for (const auto& t : batch) {
        const auto action = forward(actor, t.state);
        critic_in.assign(t.state.begin(), t.state.end());
        critic_in.insert(critic_in.end(), action.begin(), action.end());
        // dQ/da, taken from the critic's input gradient
        const auto critic_grads = backward(critic, critic_in, dq);
        std::span<const double> dq_da(critic_grads.input.data() + obs_size,
                                      static_cast<std::size_t>(action_size));
        // ascent: accumulate -dJ/dtheta so adam_step descends on -J
        add_scaled(grads, backward(actor, t.state, dq_da), -inv_n);
    }
    const double norm = std::min(global_norm(grads), clip_norm);
    adam_step(actor, grads, opt, clip_norm);
    return norm;
}

struct EpisodeStats {
    int episode = 0;
    double cumulative_reward = 0.0;
    double mean_reward = 0.0;  // cumulative / horizon
    int migrations = 0;
    double noise_sigma = 0.0;
};

struct TrainResult {
    ParameterSet actor;
    std::vector<EpisodeStats> curve;
};

// Actor-critic training loop: the critic updates every slot, the actor and
// both target networks only every `actor_delay` critic updates (SRCL). The
// one-step baseline (DDPG) is the same machinery with delay 1. JSR widens the
// actor output with one allocation score per vehicle and bypasses the
// closed-form allocator.
class Trainer {
  public:
    Trainer(Environment& env, AgentConfig config, PolicyKind kind)
        : env_(env),
          cfg_(std::move(config)),
          kind_(kind),
          replay_(cfg_.replay_capacity),
          sample_rng_(derive_seed(cfg_.seed, "replay-sample")),
          noise_rng_(derive_seed(cfg_.seed, "noise")) {
        cfg_.validate();
        if (!is_learning_policy(kind)) throw std::invalid_argument("trainer needs a learning policy");
        if (kind == PolicyKind::DDPG) cfg_.actor_delay = 1;

        const int obs = env.observation_size();
        const int action = action_size();
        NetworkSpec actor_spec;
        actor_spec.layer_sizes.push_back(obs);
        for (int h : cfg_.hidden_sizes) actor_spec.layer_sizes.push_back(h);
        actor_spec.layer_sizes.push_back(action);
        actor_spec.output_activation = OutputActivation::bounded;

        NetworkSpec critic_spec;
        critic_spec.layer_sizes.push_back(obs + action);
        for (int h : cfg_.hidden_sizes) critic_spec.layer_sizes.push_back(h);
        critic_spec.layer_sizes.push_back(1);
        critic_spec.output_activation = OutputActivation::identity;

        actor_ = init_params(actor_spec, derive_seed(cfg_.seed, "actor"));
        critic_ = init_params(critic_spec, derive_seed(cfg_.seed, "critic"));
        target_actor_ = actor_;
        target_critic_ = critic_;
        actor_opt_ = make_optimizer(actor_spec, {cfg_.lr_actor});
        critic_opt_ = make_optimizer(critic_spec, {cfg_.lr_critic});
    }

    int action_size() const {
        const int base = env_.config().n_vehicles * env_.node_count();
        return kind_ == PolicyKind::JSR ? base + env_.config().n_vehicles : base;
    }

    // One slot of the training loop. Returns the realized reward.
    double train_step(SystemState& state, double noise_sigma) {
        const int u = env_.config().n_vehicles;
        const int m = env_.node_count();
        Observation obs = env_.observe(state);
        ActionSelection sel = select_action(actor_, obs, noise_sigma, noise_rng_, u, m);

        std::vector<double> alloc_scores;
        const std::vector<double>* alloc = nullptr;
        if (kind_ == PolicyKind::JSR) {
            alloc_scores.assign(sel.scores.begin() + static_cast<std::ptrdiff_t>(u) * m,
                                sel.scores.end());
            alloc = &alloc_scores;
        }

        for (int i = 0; i < u; ++i)
            if (sel.decisions[static_cast<std::size_t>(i)] !=
                state.vehicles[static_cast<std::size_t>(i)].hosting)
                ++episode_migrations_;

        const auto outcome = env_.step(state, sel.decisions, alloc);
        Transition t;
        t.state = std::move(obs);
        t.action = std::move(sel.scores);
        t.reward = outcome.reward;
        t.next_state = env_.observe(state);
        replay_.push(std::move(t));

        const auto batch = replay_.sample_batch(cfg_.batch_size, sample_rng_);
        last_loss_ = critic_update(batch, critic_, target_actor_, target_critic_, cfg_.gamma,
                                   critic_opt_, cfg_.clip_norm);
        ++critic_updates_;
        if (critic_updates_ % cfg_.actor_delay == 0) delayed_actor_update(batch);
        return outcome.reward;
    }

    // Actor ascent plus soft target updates; only legal on the delay schedule.
    void delayed_actor_update(const std::vector<Transition>& batch) {
        if (critic_updates_ % cfg_.actor_delay != 0)
            throw std::logic_error("actor update requested off the delayed schedule");
        actor_update(batch, actor_, critic_, actor_opt_, cfg_.clip_norm);
        soft_update(target_actor_, actor_, cfg_.soft_update_rate);
        soft_update(target_critic_, critic_, cfg_.soft_update_rate);
        ++actor_updates_;
    }

    EpisodeStats run_episode(int episode_index) {
        SystemState state = env_.reset(static_cast<std::uint64_t>(episode_index));
        episode_migrations_ = 0;
        const double sigma = cfg_.noise_sigma(episode_index);
        double cumulative = 0.0;
        const int horizon = env_.config().horizon;
        for (int t = 0; t < horizon; ++t) cumulative += train_step(state, sigma);
        EpisodeStats stats;
        stats.episode = episode_index;
        stats.cumulative_reward = cumulative;
        stats.mean_reward = cumulative / horizon;
        stats.migrations = episode_migrations_;
        stats.noise_sigma = sigma;
        return stats;
    }

    TrainResult train() {
        TrainResult result;
        result.curve.reserve(static_cast<std::size_t>(cfg_.episodes));
        for (int e = 0; e < cfg_.episodes; ++e) result.curve.push_back(run_episode(e));
        result.actor = actor_;
        return result;
    }

    const ParameterSet& actor() const { return actor_; }
    const ParameterSet& critic() const { return critic_; }
    const ParameterSet& target_actor() const { return target_actor_; }
    const ParameterSet& target_critic() const { return target_critic_; }
    long critic_updates() const { return critic_updates_; }
    long actor_updates() const { return actor_updates_; }
    double last_critic_loss() const { return last_loss_; }
    const ReplayMemory& replay() const { return replay_; }
    PolicyKind kind() const { return kind_; }
    const AgentConfig& agent_config() const { return cfg_; }

  private:
    Environment& env_;
    AgentConfig cfg_;
    PolicyKind kind_;
    ParameterSet actor_, critic_, target_actor_, target_critic_;
    OptimizerState actor_opt_, critic_opt_;
    ReplayMemory replay_;
    Rng sample_rng_;
    Rng noise_rng_;
    long critic_updates_ = 0;
    long actor_updates_ = 0;
    int episode_migrations_ = 0;
    double last_loss_ = 0.0;
};

// ---------------------------------------------------------------------------
// Rule-based and evolutionary baselines
// ---------------------------------------------------------------------------

// Always migrate to the vehicle's current nearest node.
inline std::vector<NodeId> am_policy(const SystemState& state) {
    std::vector<NodeId> decisions;
    decisions.reserve(state.vehicles.size());
    for (const auto& v : state.vehicles) decisions.push_back(v.attached);
    return decisions;
}

// Keep every instance at the node it started the episode on.
inline std::vector<NodeId> nm_policy(const SystemState& state) {
    return state.initial_hosting;
}

struct GaParams {
    int population = 40;
    int generations = 30;
    double crossover_rate = 0.9;
    double mutation_rate = 0.1;
    int tournament = 3;
    // optional warm-start individuals prepended to the random population
    std::vector<std::vector<NodeId>> seed_population;

    void validate() const {
        if (population < 2) throw std::invalid_argument("population must be >= 2");
        if (generations < 1) throw std::invalid_argument("generations must be >= 1");
        if (tournament < 1) throw std::invalid_argument("tournament must be >= 1");
    }
};

// Per-slot evolutionary search over decision vectors. Fitness is the instant
// reward of a hypothetical step from the current state; tournament selection,
// uniform crossover, per-gene random-node mutation, top-1 elitism.
inline std::vector<NodeId> ga_policy(const SystemState& state, const Environment& env,
                                     const GaParams& params, Rng& rng,
                                     std::vector<double>* best_fitness_trace = nullptr) {
    params.validate();
    const int u_count = env.config().n_vehicles;
    const int m = env.node_count();

    std::vector<std::vector<NodeId>> population;
    population.reserve(static_cast<std::size_t>(params.population));
    for (const auto& seeded : params.seed_population) {
        if (static_cast<int>(seeded.size()) != u_count)
            throw std::invalid_argument("seed individual has wrong length");
        if (static_cast<int>(population.size()) < params.population) population.push_back(seeded);
    }
    while (static_cast<int>(population.size()) < params.population) {
        std::vector<NodeId> individual(static_cast<std::size_t>(u_count));
        for (auto& gene : individual) gene = rng.uniform_int(m);
        population.push_back(std::move(individual));
    }

    auto fitness_of = [&](const std::vector<NodeId>& individual) {
        return env.evaluate_decisions(state, individual).reward;
    };
    std::vector<double> fitness(population.size());
    for (std::size_t i = 0; i < population.size(); ++i) fitness[i] = fitness_of(population[i]);

    auto best_index = [&]() {
        std::size_t best = 0;
        for (std::size_t i = 1; i < population.size(); ++i)
            if (fitness[i] > fitness[best]) best = i;
        return best;
    };

    for (int gen = 0; gen < params.generations; ++gen) {
        const std::size_t elite = best_index();
        std::vector<std::vector<NodeId>> next;
        next.reserve(population.size());
        next.push_back(population[elite]);  // elitism

        auto tournament_pick = [&]() -> const std::vector<NodeId>& {
            std::size_t winner = static_cast<std::size_t>(rng.uniform_int(params.population));
            for (int k = 1; k < params.tournament; ++k) {
                const auto contender = static_cast<std::size_t>(rng.uniform_int(params.population));
                if (fitness[contender] > fitness[winner]) winner = contender;
            }
            return population[winner];
        };

        while (next.size() < population.size()) {
            std::vector<NodeId> child = tournament_pick();
            if (rng.bernoulli(params.crossover_rate)) {
                const auto& other = tournament_pick();
                for (int g = 0; g < u_count; ++g)
                    if (rng.bernoulli(0.5)) child[static_cast<std::size_t>(g)] = other[static_cast<std::size_t>(g)];
            }
            for (int g = 0; g < u_count; ++g)
                if (rng.bernoulli(params.mutation_rate))
                    child[static_cast<std::size_t>(g)] = rng.uniform_int(m);
            next.push_back(std::move(child));
        }
        population = std::move(next);
        for (std::size_t i = 0; i < population.size(); ++i) fitness[i] = fitness_of(population[i]);
        if (best_fitness_trace) best_fitness_trace->push_back(fitness[best_index()]);
    }
    return population[best_index()];
}

// ---------------------------------------------------------------------------
// Frozen-policy evaluation
// ---------------------------------------------------------------------------

struct PolicyDecision {
    std::vector<NodeId> decisions;
    std::optional<std::vector<double>> alloc_scores;  // JSR only
};

using PolicyFn = std::function<PolicyDecision(const SystemState&, const Observation&)>;

// Decision function for a policy kind; learned kinds wrap a trained actor
// with zero exploration noise.
inline PolicyFn make_policy(PolicyKind kind, const Environment& env,
                            const ParameterSet* actor = nullptr, const GaParams* ga = nullptr,
                            std::uint64_t ga_seed = 0) {
    const int u = env.config().n_vehicles;
    const int m = env.node_count();
    switch (kind) {
        case PolicyKind::AM:
            return [](const SystemState& s, const Observation&) {
                return PolicyDecision{am_policy(s), std::nullopt};
            };
        case PolicyKind::NM:
            return [](const SystemState& s, const Observation&) {
                return PolicyDecision{nm_policy(s), std::nullopt};
            };
        case PolicyKind::GA: {
            GaParams params = ga ? *ga : GaParams{};
            auto rng = std::make_shared<Rng>(derive_seed(ga_seed, "ga"));
            return [&env, params, rng](const SystemState& s, const Observation&) {
                return PolicyDecision{ga_policy(s, env, params, *rng), std::nullopt};
            };
        }
        case PolicyKind::SRCL:
        case PolicyKind::DDPG: {
            if (!actor) throw std::invalid_argument("learned policy needs an actor");
            return [actor, u, m](const SystemState&, const Observation& obs) {
                const auto scores = forward(*actor, obs);
                return PolicyDecision{detail::argmax_rows(scores, u, m), std::nullopt};
            };
        }
        case PolicyKind::JSR: {
            if (!actor) throw std::invalid_argument("learned policy needs an actor");
            return [actor, u, m](const SystemState&, const Observation& obs) {
                const auto scores = forward(*actor, obs);
                PolicyDecision d;
                d.decisions = detail::argmax_rows(scores, u, m);
                d.alloc_scores.emplace(scores.begin() + static_cast<std::ptrdiff_t>(u) * m,
                                       scores.end());
                return d;
            };
        }
    }
    throw std::invalid_argument("unknown policy kind");
}

struct EvalResult {
    int episodes = 0;
    double mean_reward = 0.0;          // per slot
    double mean_total_delay = 0.0;     // per slot, all vehicles
    double mean_migration_delay = 0.0;
    double mean_communication_delay = 0.0;
    double mean_computation_delay = 0.0;
    double migration_frequency = 0.0;  // migrations per episode
    double mean_response_delay = 0.0;  // per task
};

// Runs `episodes` held-out episodes (seeds offset away from the training
// range) and averages the delay components.
inline EvalResult evaluate_policy(Environment& env, const PolicyFn& policy, int episodes,
                                  std::uint64_t eval_seed_offset = 1'000'000) {
    if (episodes < 1) throw std::invalid_argument("need >= 1 evaluation episode");
    EvalResult result;
    result.episodes = episodes;
    const int horizon = env.config().horizon;
    const int u_count = env.config().n_vehicles;
    long slots = 0;
    long migrations = 0;
    for (int e = 0; e < episodes; ++e) {
        SystemState state = env.reset(eval_seed_offset + static_cast<std::uint64_t>(e));
        for (int t = 0; t < horizon; ++t) {
            const Observation obs = env.observe(state);
            const PolicyDecision d = policy(state, obs);
            for (int i = 0; i < u_count; ++i)
                if (d.decisions[static_cast<std::size_t>(i)] !=
                    state.vehicles[static_cast<std::size_t>(i)].hosting)
                    ++migrations;
            const auto outcome =
                env.step(state, d.decisions, d.alloc_scores ? &*d.alloc_scores : nullptr);
            result.mean_reward += outcome.reward;
            for (const auto& b : outcome.breakdowns) {
                result.mean_migration_delay += b.migration;
                result.mean_communication_delay += b.communication();
                result.mean_computation_delay += b.computation;
                result.mean_response_delay += b.total();
            }
            ++slots;
        }
    }
    const double inv_slots = 1.0 / static_cast<double>(slots);
    result.mean_reward *= inv_slots;
    result.mean_migration_delay *= inv_slots;
    result.mean_communication_delay *= inv_slots;
    result.mean_computation_delay *= inv_slots;
    result.mean_total_delay = result.mean_migration_delay + result.mean_communication_delay +
                              result.mean_computation_delay;
    result.mean_response_delay /= static_cast<double>(slots) * u_count;
    result.migration_frequency = static_cast<double>(migrations) / episodes;
    return result;
}

}  // namespace edgesim

#endif
