#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "edgesim/nn.hpp"
#include "edgesim/rng.hpp"

using namespace edgesim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// scalar loss L(params) = sum(forward(params, input) * output_gradient)
double probe_loss(const ParameterSet& params, const std::vector<double>& input,
                  const std::vector<double>& out_grad) {
    const auto out = forward(params, input);
    double loss = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) loss += out[i] * out_grad[i];
    return loss;
}

double max_relative_fd_error(const NetworkSpec& spec, std::uint64_t seed) {
    auto params = init_params(spec, seed);
    Rng rng(derive_seed(seed, "fd"));
    std::vector<double> input(static_cast<std::size_t>(spec.input_size()));
    for (double& v : input) v = rng.uniform(-1.0, 1.0);
    std::vector<double> out_grad(static_cast<std::size_t>(spec.output_size()));
    for (double& v : out_grad) v = rng.uniform(-1.0, 1.0);

    const auto grads = backward(params, input, out_grad);
    const double h = 1e-5;
    double worst = 0.0;
    auto check = [&](double* value, double analytic) {
        const double saved = *value;
        *value = saved + h;
        const double fp = probe_loss(params, input, out_grad);
        *value = saved - h;
        const double fm = probe_loss(params, input, out_grad);
        *value = saved;
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(numeric - analytic) / denom);
    };
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        for (std::size_t i = 0; i < params.weights[l].size(); i += 7)
            check(&params.weights[l][i], grads.weights[l][i]);
        for (std::size_t i = 0; i < params.biases[l].size(); ++i)
            check(&params.biases[l][i], grads.biases[l][i]);
    }
    // input gradient via the same probe
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double saved = input[i];
        input[i] = saved + h;
        const double fp = probe_loss(params, input, out_grad);
        input[i] = saved - h;
        const double fm = probe_loss(params, input, out_grad);
        input[i] = saved;
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(grads.input[i]), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(numeric - grads.input[i]) / denom);
    }
    return worst;
}

}  // namespace

TEST_CASE("init_params: deterministic, zero biases, bounded weights") {
    const NetworkSpec spec{{8, 16, 4}, OutputActivation::identity};
    const auto a = init_params(spec, 5);
    const auto b = init_params(spec, 5);
    const auto c = init_params(spec, 6);
    REQUIRE(a.weights.size() == 2);
    CHECK(a.weights[0] == b.weights[0]);
    CHECK(a.weights[1] == b.weights[1]);
    CHECK(a.weights[0] != c.weights[0]);
    for (const auto& bias : a.biases)
        for (double v : bias) CHECK(v == 0.0);
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        const double bound = std::sqrt(6.0 / spec.layer_sizes[l]);
        for (double v : a.weights[l]) CHECK(std::abs(v) <= bound);
    }
}

TEST_CASE("forward: affine identities") {
    NetworkSpec spec{{2, 3}, OutputActivation::identity};
    auto params = init_params(spec, 1);

    SECTION("zero parameters give zero output") {
        for (auto& w : params.weights)
            for (double& v : w) v = 0.0;
        const auto out = forward(params, std::vector<double>{0.3, -0.7});
        for (double v : out) CHECK(v == 0.0);
    }
    SECTION("single identity layer is the exact affine map") {
        params.weights[0] = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};  // 3x2 row-major
        params.biases[0] = {0.5, -0.5, 0.0};
        const auto out = forward(params, std::vector<double>{1.0, -1.0});
        CHECK_THAT(out[0], WithinAbs(1.0 - 2.0 + 0.5, 1e-15));
        CHECK_THAT(out[1], WithinAbs(3.0 - 4.0 - 0.5, 1e-15));
        CHECK_THAT(out[2], WithinAbs(5.0 - 6.0, 1e-15));
    }
    SECTION("dimension mismatch is rejected") {
        CHECK_THROWS_AS(forward(params, std::vector<double>{1.0}), std::invalid_argument);
    }
}

TEST_CASE("forward: hidden rectifier and bounded output") {
    NetworkSpec spec{{1, 2, 1}, OutputActivation::identity};
    auto params = init_params(spec, 1);
    params.weights[0] = {1.0, -1.0};
    params.biases[0] = {0.0, 0.0};
    params.weights[1] = {1.0, 1.0};
    params.biases[1] = {0.0};
    // negative pre-activation is cut to zero by the hidden rectifier
    CHECK_THAT(forward(params, std::vector<double>{2.0})[0], WithinAbs(2.0, 1e-15));
    CHECK_THAT(forward(params, std::vector<double>{-2.0})[0], WithinAbs(2.0, 1e-15));

    params.spec.output_activation = OutputActivation::bounded;
    const double v = forward(params, std::vector<double>{2.0})[0];
    CHECK_THAT(v, WithinRel(std::tanh(2.0), 1e-12));
}

TEST_CASE("backward matches central finite differences on 100 random nets") {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const NetworkSpec spec{{8, 16, 4},
                               seed % 2 == 0 ? OutputActivation::identity : OutputActivation::bounded};
        worst = std::max(worst, max_relative_fd_error(spec, seed));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("backward edge cases") {
    const NetworkSpec spec{{3, 5, 2}, OutputActivation::identity};
    const auto params = init_params(spec, 3);
    const std::vector<double> input{0.1, 0.2, 0.3};

    SECTION("zero output gradient gives zero parameter gradients") {
        const auto g = backward(params, input, std::vector<double>{0.0, 0.0});
        for (const auto& w : g.weights)
            for (double v : w) CHECK(v == 0.0);
        for (double v : g.input) CHECK(v == 0.0);
    }
    SECTION("bias gradient of a single identity layer is the output gradient") {
        const NetworkSpec single{{2, 2}, OutputActivation::identity};
        const auto p = init_params(single, 4);
        const auto g = backward(p, std::vector<double>{1.0, 2.0}, std::vector<double>{0.25, -0.5});
        CHECK(g.biases[0][0] == 0.25);
        CHECK(g.biases[0][1] == -0.5);
    }
    SECTION("dimension mismatch is rejected") {
        CHECK_THROWS_AS(backward(params, input, std::vector<double>{1.0}), std::invalid_argument);
    }
}

TEST_CASE("adam_step") {
    NetworkSpec spec{{1, 1}, OutputActivation::identity};

    SECTION("first step moves by about -lr * sign(g)") {
        auto params = init_params(spec, 1);
        params.weights[0] = {0.0};
        auto opt = make_optimizer(spec, {0.1});
        Gradients g = zero_gradients(spec);
        g.weights[0][0] = 3.0;  // clipped to 2.0, sign unchanged
        adam_step(params, g, opt, 1e18);
        CHECK_THAT(params.weights[0][0], WithinAbs(-0.1, 1e-7));
    }
    SECTION("global norm clipping rescales by clip/norm") {
        // two parameters of 2sqrt(2) each -> norm 4, clip 2 -> halved
        NetworkSpec wide{{2, 1}, OutputActivation::identity};
        auto params = init_params(wide, 1);
        auto opt = make_optimizer(wide, {1e-3});
        Gradients g = zero_gradients(wide);
        g.weights[0] = {2.0 * std::sqrt(2.0), 2.0 * std::sqrt(2.0)};
        CHECK_THAT(global_norm(g), WithinRel(4.0, 1e-12));
        const auto before = params.weights[0];
        adam_step(params, g, opt, 2.0);
        // both coordinates got the same clipped gradient; adam's first step
        // is then -lr regardless of scale, so check via the moment buffers
        CHECK_THAT(opt.m_weights[0][0], WithinRel(0.1 * std::sqrt(2.0), 1e-12));
        CHECK(params.weights[0][0] < before[0]);
    }
    SECTION("zero gradients leave parameters unchanged") {
        auto params = init_params(spec, 2);
        const auto before = params;
        auto opt = make_optimizer(spec, {0.05});
        adam_step(params, zero_gradients(spec), opt, 2.0);
        CHECK(params.weights[0][0] == before.weights[0][0]);
        CHECK(opt.step == 1);
    }
    SECTION("two-step scalar trace matches the textbook recursion") {
        auto params = init_params(spec, 1);
        params.weights[0] = {1.0};
        params.biases[0] = {0.0};
        const AdamConfig c{0.01, 0.9, 0.999, 1e-8};
        auto opt = make_optimizer(spec, c);
        double m = 0.0, v = 0.0, x = 1.0;
        Gradients g = zero_gradients(spec);
        for (int step = 1; step <= 2; ++step) {
            const double grad = 0.4 * step;
            g.weights[0][0] = grad;
            adam_step(params, g, opt, 1e18);
            m = c.beta1 * m + (1 - c.beta1) * grad;
            v = c.beta2 * v + (1 - c.beta2) * grad * grad;
            const double mhat = m / (1 - std::pow(c.beta1, step));
            const double vhat = v / (1 - std::pow(c.beta2, step));
            x -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
            CHECK_THAT(params.weights[0][0], WithinRel(x, 1e-14));
        }
    }
    SECTION("non-finite gradients raise") {
        auto params = init_params(spec, 1);
        auto opt = make_optimizer(spec, {0.1});
        Gradients g = zero_gradients(spec);
        g.weights[0][0] = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(adam_step(params, g, opt, 2.0), std::runtime_error);
    }
}

TEST_CASE("soft update") {
    const NetworkSpec spec{{2, 2}, OutputActivation::identity};
    auto online = init_params(spec, 1);
    auto target = init_params(spec, 2);

    SECTION("rate 1 copies, rate 0 freezes") {
        auto t1 = target;
        soft_update(t1, online, 1.0);
        CHECK(t1.weights[0] == online.weights[0]);
        auto t0 = target;
        soft_update(t0, online, 0.0);
        CHECK(t0.weights[0] == target.weights[0]);
    }
    SECTION("scalar arithmetic") {
        NetworkSpec s{{1, 1}, OutputActivation::identity};
        auto t = init_params(s, 1);
        auto o = init_params(s, 1);
        t.weights[0] = {1.0};
        o.weights[0] = {2.0};
        soft_update(t, o, 0.01);
        CHECK_THAT(t.weights[0][0], WithinRel(1.01, 1e-14));
    }
    SECTION("contraction toward the online parameters") {
        auto t = target;
        auto norm_gap = [&](const ParameterSet& a) {
            double sq = 0.0;
            for (std::size_t l = 0; l < a.weights.size(); ++l)
                for (std::size_t i = 0; i < a.weights[l].size(); ++i) {
                    const double d = a.weights[l][i] - online.weights[l][i];
                    sq += d * d;
                }
            return std::sqrt(sq);
        };
        const double before = norm_gap(t);
        soft_update(t, online, 0.25);
        CHECK_THAT(norm_gap(t), WithinRel(0.75 * before, 1e-12));
    }
    SECTION("shape mismatch is rejected") {
        auto wrong = init_params(NetworkSpec{{3, 2}, OutputActivation::identity}, 1);
        CHECK_THROWS_AS(soft_update(wrong, online, 0.5), std::invalid_argument);
    }
}

TEST_CASE("checkpoint round trip") {
    const NetworkSpec spec{{4, 8, 3}, OutputActivation::bounded};
    const auto params = init_params(spec, 77);
    std::ostringstream out;
    save_checkpoint(out, params, 77);

    std::istringstream in(out.str());
    std::uint64_t seed = 0;
    const auto loaded = load_checkpoint(in, &seed);
    CHECK(seed == 77);
    CHECK(loaded.spec.layer_sizes == params.spec.layer_sizes);
    CHECK(loaded.spec.output_activation == params.spec.output_activation);
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        CHECK(loaded.weights[l] == params.weights[l]);
        CHECK(loaded.biases[l] == params.biases[l]);
    }
    std::istringstream bad("bogus v9");
    CHECK_THROWS_AS(load_checkpoint(bad), std::runtime_error);
}
