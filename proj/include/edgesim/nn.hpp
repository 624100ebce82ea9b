#ifndef EDGESIM_NN_HPP
#define EDGESIM_NN_HPP

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgesim/rng.hpp"

namespace edgesim {

enum class OutputActivation { identity, bounded };  // bounded = tanh into (-1, 1)

// Dense feed-forward shape: input, hidden..., output. Hidden layers are
// rectified-linear.
struct NetworkSpec {
    std::vector<int> layer_sizes;
    OutputActivation output_activation = OutputActivation::identity;

    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    std::size_t layer_count() const { return layer_sizes.size() - 1; }

    void validate() const {
        if (layer_sizes.size() < 2) throw std::invalid_argument("network needs >= 2 layers");
        for (int n : layer_sizes)
            if (n < 1) throw std::invalid_argument("layer sizes must be >= 1");
    }
};

// Weights are row-major [out x in], one matrix and bias vector per layer.
struct ParameterSet {
    NetworkSpec spec;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
    std::vector<double> input;  // gradient w.r.t. the network input
};

inline ParameterSet init_params(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    ParameterSet params;
    params.spec = spec;
    Rng rng(derive_seed(seed, "init"));
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const int fan_in = spec.layer_sizes[l];
        const int fan_out = spec.layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / fan_in);
        std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
        for (double& v : w) v = rng.uniform(-bound, bound);
        params.weights.push_back(std::move(w));
        params.biases.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
    }
    return params;
}

inline Gradients zero_gradients(const NetworkSpec& spec) {
    Gradients g;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        g.weights.emplace_back(
            static_cast<std::size_t>(spec.layer_sizes[l]) * spec.layer_sizes[l + 1], 0.0);
        g.biases.emplace_back(static_cast<std::size_t>(spec.layer_sizes[l + 1]), 0.0);
    }
    g.input.assign(static_cast<std::size_t>(spec.input_size()), 0.0);
    return g;
}

inline void add_scaled(Gradients& acc, const Gradients& g, double scale) {
    for (std::size_t l = 0; l < acc.weights.size(); ++l) {
        for (std::size_t i = 0; i < acc.weights[l].size(); ++i)
            acc.weights[l][i] += scale * g.weights[l][i];
        for (std::size_t i = 0; i < acc.biases[l].size(); ++i)
            acc.biases[l][i] += scale * g.biases[l][i];
    }
}

namespace detail {

inline void affine(const std::vector<double>& w, const std::vector<double>& b,
                   std::span<const double> in, std::vector<double>& out) {
    const std::size_t n_out = b.size();
    const std::size_t n_in = in.size();
    out.resize(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
        double acc = b[o];
        const double* row = w.data() + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * in[i];
        out[o] = acc;
    }
}

struct ForwardTrace {
    // activations[0] is the input, activations.back() the network output
    std::vector<std::vector<double>> activations;
    std::vector<std::vector<double>> pre_activations;
};

inline ForwardTrace forward_trace(const ParameterSet& params, std::span<const double> input) {
    if (static_cast<int>(input.size()) != params.spec.input_size())
        throw std::invalid_argument("input size does not match network spec");
    ForwardTrace trace;
    trace.activations.emplace_back(input.begin(), input.end());
    const std::size_t layers = params.weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        std::vector<double> z;
        affine(params.weights[l], params.biases[l], trace.activations.back(), z);
        std::vector<double> a = z;
        if (l + 1 < layers) {
            for (double& v : a) v = v > 0.0 ? v : 0.0;
        } else if (params.spec.output_activation == OutputActivation::bounded) {
            for (double& v : a) v = std::tanh(v);
        }
        trace.pre_activations.push_back(std::move(z));
        trace.activations.push_back(std::move(a));
    }
    return trace;
}

}  // namespace detail

inline std::vector<double> forward(const ParameterSet& params, std::span<const double> input) {
    return detail::forward_trace(params, input).activations.back();
}

// Exact reverse-mode gradients of sum(output * output_gradient) w.r.t. every
// parameter and the input. The input gradient carries the chained policy
// gradient from critic to actor.
inline Gradients backward(const ParameterSet& params, std::span<const double> input,
                          std::span<const double> output_gradient) {
    if (static_cast<int>(output_gradient.size()) != params.spec.output_size())
        throw std::invalid_argument("output gradient size does not match network spec");
    const auto trace = detail::forward_trace(params, input);
    Gradients grads = zero_gradients(params.spec);

    const std::size_t layers = params.weights.size();
    std::vector<double> delta(output_gradient.begin(), output_gradient.end());
    if (params.spec.output_activation == OutputActivation::bounded) {
        const auto& out = trace.activations.back();
        for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= 1.0 - out[i] * out[i];
    }

    for (std::size_t l = layers; l-- > 0;) {
        const auto& a_prev = trace.activations[l];
        const std::size_t n_out = params.biases[l].size();
        const std::size_t n_in = a_prev.size();
        for (std::size_t o = 0; o < n_out; ++o) {
            grads.biases[l][o] = delta[o];
            double* wrow = grads.weights[l].data() + o * n_in;
            for (std::size_t i = 0; i < n_in; ++i) wrow[i] = delta[o] * a_prev[i];
        }
        std::vector<double> next(n_in, 0.0);
        for (std::size_t o = 0; o < n_out; ++o) {
            const double* row = params.weights[l].data() + o * n_in;
            const double d = delta[o];
            for (std::size_t i = 0; i < n_in; ++i) next[i] += d * row[i];
        }
        if (l > 0) {
            const auto& z_prev = trace.pre_activations[l - 1];
            for (std::size_t i = 0; i < n_in; ++i)
                if (z_prev[i] <= 0.0) next[i] = 0.0;
        }
        delta = std::move(next);
    }
    grads.input = std::move(delta);
    return grads;
}

inline double global_norm(const Gradients& g) {
    double sq = 0.0;
    for (const auto& w : g.weights)
        for (double v : w) sq += v * v;
    for (const auto& b : g.biases)
        for (double v : b) sq += v * v;
    return std::sqrt(sq);
}

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    AdamConfig config;
    long step = 0;
    std::vector<std::vector<double>> m_weights, v_weights;
    std::vector<std::vector<double>> m_biases, v_biases;
};

inline OptimizerState make_optimizer(const NetworkSpec& spec, const AdamConfig& config) {
    OptimizerState opt;
    opt.config = config;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const std::size_t nw = static_cast<std::size_t>(spec.layer_sizes[l]) * spec.layer_sizes[l + 1];
        const std::size_t nb = static_cast<std::size_t>(spec.layer_sizes[l + 1]);
        opt.m_weights.emplace_back(nw, 0.0);
        opt.v_weights.emplace_back(nw, 0.0);
        opt.m_biases.emplace_back(nb, 0.0);
        opt.v_biases.emplace_back(nb, 0.0);
    }
    return opt;
}

// Global-norm clipping followed by one bias-corrected Adam update.
inline void adam_step(ParameterSet& params, const Gradients& grads, OptimizerState& opt,
                      double clip_norm) {
    if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be > 0");
    const double norm = global_norm(grads);
    if (!std::isfinite(norm)) throw std::runtime_error("non-finite gradients in adam_step");
    const double scale = norm > clip_norm ? clip_norm / norm : 1.0;

    opt.step += 1;
    const auto& c = opt.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.step));

    auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i] * scale;
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
        }
    };
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        update(params.weights[l], grads.weights[l], opt.m_weights[l], opt.v_weights[l]);
        update(params.biases[l], grads.biases[l], opt.m_biases[l], opt.v_biases[l]);
    }
}

// target <- rate * online + (1 - rate) * target
inline void soft_update(ParameterSet& target, const ParameterSet& online, double rate) {
    if (rate < 0.0 || rate > 1.0) throw std::invalid_argument("soft update rate must be in [0, 1]");
    if (target.spec.layer_sizes != online.spec.layer_sizes)
        throw std::invalid_argument("soft update shape mismatch");
    for (std::size_t l = 0; l < target.weights.size(); ++l) {
        for (std::size_t i = 0; i < target.weights[l].size(); ++i)
            target.weights[l][i] = rate * online.weights[l][i] + (1.0 - rate) * target.weights[l][i];
        for (std::size_t i = 0; i < target.biases[l].size(); ++i)
            target.biases[l][i] = rate * online.biases[l][i] + (1.0 - rate) * target.biases[l][i];
    }
}

// ---------------------------------------------------------------------------
// Checkpoint format (text, one value per token, doubles as %.17g):
//
//   edgesim-params v1
//   seed <seed>
//   output_activation identity|bounded
//   layers <n> <size_0> ... <size_n>
//   W <layer> <count> <values...>
//   b <layer> <count> <values...>
// ---------------------------------------------------------------------------

inline void save_checkpoint(std::ostream& out, const ParameterSet& params, std::uint64_t seed) {
    out << "edgesim-params v1\n";
    out << "seed " << seed << "\n";
    out << "output_activation "
        << (params.spec.output_activation == OutputActivation::bounded ? "bounded" : "identity")
        << "\n";
    out << "layers " << params.spec.layer_sizes.size();
    for (int n : params.spec.layer_sizes) out << ' ' << n;
    out << "\n";
    char buf[40];
    auto dump = [&](const char* tag, std::size_t layer, const std::vector<double>& values) {
        out << tag << ' ' << layer << ' ' << values.size();
        for (double v : values) {
            std::snprintf(buf, sizeof(buf), " %.17g", v);
            out << buf;
        }
        out << "\n";
    };
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        dump("W", l, params.weights[l]);
        dump("b", l, params.biases[l]);
    }
}

inline ParameterSet load_checkpoint(std::istream& in, std::uint64_t* seed_out = nullptr) {
    std::string magic, version;
    in >> magic >> version;
    if (magic != "edgesim-params" || version != "v1")
        throw std::runtime_error("unrecognized checkpoint header");

    std::string key;
    std::uint64_t seed = 0;
    in >> key >> seed;
    if (key != "seed") throw std::runtime_error("checkpoint missing seed");
    if (seed_out) *seed_out = seed;

    std::string activation;
    in >> key >> activation;
    if (key != "output_activation") throw std::runtime_error("checkpoint missing activation");

    std::size_t n_sizes = 0;
    in >> key >> n_sizes;
    if (key != "layers" || n_sizes < 2) throw std::runtime_error("checkpoint missing layer sizes");

    ParameterSet params;
    params.spec.output_activation =
        activation == "bounded" ? OutputActivation::bounded : OutputActivation::identity;
    params.spec.layer_sizes.resize(n_sizes);
    for (auto& n : params.spec.layer_sizes) in >> n;
    params.spec.validate();

    for (std::size_t l = 0; l + 1 < n_sizes; ++l) {
        for (const char* tag : {"W", "b"}) {
            std::string t;
            std::size_t layer = 0, count = 0;
            in >> t >> layer >> count;
            if (t != tag || layer != l) throw std::runtime_error("checkpoint layer order corrupt");
            std::vector<double> values(count);
            for (auto& v : values) in >> v;
            if (!in) throw std::runtime_error("checkpoint truncated");
            if (t[0] == 'W')
                params.weights.push_back(std::move(values));
            else
                params.biases.push_back(std::move(values));
        }
    }
    // shape check against the spec
    for (std::size_t l = 0; l + 1 < n_sizes; ++l) {
        const auto expect_w = static_cast<std::size_t>(params.spec.layer_sizes[l]) *
                              params.spec.layer_sizes[l + 1];
        if (params.weights[l].size() != expect_w ||
            params.biases[l].size() != static_cast<std::size_t>(params.spec.layer_sizes[l + 1]))
            throw std::runtime_error("checkpoint shapes inconsistent with spec");
    }
    return params;
}

}  // namespace edgesim

#endif
