#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "edgesim/allocator.hpp"
#include "edgesim/rng.hpp"

using namespace edgesim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// plain recursive enumeration of the discrete simplex; only usable at small
// resolution, kept here to validate the marginal-allocation oracle itself
AllocationResult enumerate_allocation(const AllocationRequest& req, int resolution) {
    const std::size_t z_count = req.size();
    std::vector<int> units(z_count, 0), best_units;
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, int)> recurse = [&](std::size_t z, int left) {
        if (z + 1 == z_count) {
            units[z] = left;
            if (left >= 1) {
                double objective = 0.0;
                for (std::size_t i = 0; i < z_count; ++i)
                    objective += req.cycles[i] * resolution / static_cast<double>(units[i]);
                if (objective < best) {
                    best = objective;
                    best_units = units;
                }
            }
            return;
        }
        for (int n = 1; n <= left - static_cast<int>(z_count - z - 1); ++n) {
            units[z] = n;
            recurse(z + 1, left - n);
        }
    };
    recurse(0, resolution);
    AllocationResult result;
    for (int n : best_units) result.proportions.push_back(static_cast<double>(n) / resolution);
    return result;
}

}  // namespace

TEST_CASE("optimal allocation: closed form") {
    SECTION("single instance takes everything") {
        const auto r = optimal_allocation({{5e9}});
        REQUIRE(r.proportions.size() == 1);
        CHECK(r.proportions[0] == 1.0);
    }
    SECTION("equal demands split evenly") {
        const auto r = optimal_allocation({{7.5e8, 7.5e8}});
        CHECK_THAT(r.proportions[0], WithinAbs(0.5, 1e-15));
        CHECK_THAT(r.proportions[1], WithinAbs(0.5, 1e-15));
    }
    SECTION("square-root weighting") {
        const auto r = optimal_allocation({{1.0, 4.0, 9.0}});
        CHECK_THAT(r.proportions[0], WithinRel(1.0 / 6.0, 1e-12));
        CHECK_THAT(r.proportions[1], WithinRel(1.0 / 3.0, 1e-12));
        CHECK_THAT(r.proportions[2], WithinRel(0.5, 1e-12));
    }
    SECTION("empty request gives empty result") {
        CHECK(optimal_allocation({}).proportions.empty());
    }
    SECTION("non-positive demand rejected") {
        CHECK_THROWS_AS(optimal_allocation({{1.0, 0.0}}), std::invalid_argument);
        CHECK_THROWS_AS(optimal_allocation({{-2.0}}), std::invalid_argument);
    }
}

TEST_CASE("proportional allocation") {
    const auto r = proportional_allocation({{1.0, 3.0}});
    CHECK_THAT(r.proportions[0], WithinAbs(0.25, 1e-15));
    CHECK_THAT(r.proportions[1], WithinAbs(0.75, 1e-15));
    CHECK(proportional_allocation({{42.0}}).proportions[0] == 1.0);
    const auto r3 = proportional_allocation({{1.0, 1.0, 2.0}});
    CHECK_THAT(r3.proportions[0], WithinAbs(0.25, 1e-15));
    CHECK_THAT(r3.proportions[2], WithinAbs(0.5, 1e-15));
}

TEST_CASE("oracle allocation") {
    SECTION("matches the closed form within one grid step") {
        const AllocationRequest req{{1.0, 9.0}};
        const auto oracle = oracle_allocation(req, 1000);
        CHECK_THAT(oracle.proportions[0], WithinAbs(0.25, 1.0 / 1000.0));
        CHECK_THAT(oracle.proportions[1], WithinAbs(0.75, 1.0 / 1000.0));
    }
    SECTION("symmetric request at even resolution is exact") {
        const auto oracle = oracle_allocation({{3.0, 3.0}}, 1000);
        CHECK(oracle.proportions[0] == 0.5);
        CHECK(oracle.proportions[1] == 0.5);
    }
    SECTION("never beats the continuous optimum") {
        Rng rng(7);
        for (int i = 0; i < 50; ++i) {
            AllocationRequest req;
            const int z = 1 + rng.uniform_int(4);
            for (int j = 0; j < z; ++j) req.cycles.push_back(rng.uniform(1e8, 1e10));
            const int res = 500;
            const auto oracle = oracle_allocation(req, res);
            const auto closed = optimal_allocation(req);
            CHECK(allocation_objective(req, oracle) >= allocation_objective(req, closed) - 1e-6);
        }
    }
    SECTION("agrees with plain enumeration at small resolution") {
        Rng rng(11);
        for (int i = 0; i < 20; ++i) {
            AllocationRequest req;
            const int z = 1 + rng.uniform_int(3);
            for (int j = 0; j < z; ++j) req.cycles.push_back(rng.uniform(0.1, 10.0));
            const auto fast = oracle_allocation(req, 120);
            const auto slow = enumerate_allocation(req, 120);
            const double f_fast = allocation_objective(req, fast);
            const double f_slow = allocation_objective(req, slow);
            CHECK_THAT(f_fast, WithinRel(f_slow, 1e-12));
        }
    }
    SECTION("contract checks") {
        CHECK_THROWS_AS(oracle_allocation({{1, 1, 1, 1, 1, 1, 1}}, 1000), std::invalid_argument);
        CHECK_THROWS_AS(oracle_allocation({}, 1000), std::invalid_argument);
        CHECK_THROWS_AS(oracle_allocation({{1.0}}, 50), std::invalid_argument);
    }
}

TEST_CASE("kkt residual") {
    SECTION("closed form satisfies stationarity") {
        const AllocationRequest req{{2.0, 8.0, 5.0}};
        CHECK(kkt_residual(req, optimal_allocation(req)) < 1e-9);
    }
    SECTION("proportional rule violates stationarity for unequal demands") {
        const AllocationRequest req{{1.0, 4.0}};
        CHECK(kkt_residual(req, proportional_allocation(req)) > 1e-6);
    }
    SECTION("symmetric optimum has zero residual") {
        const AllocationRequest req{{3.0, 3.0}};
        CHECK(kkt_residual(req, {{0.5, 0.5}}) < 1e-12);
    }
    SECTION("infeasible result rejected") {
        CHECK_THROWS_AS(kkt_residual({{1.0, 1.0}}, {{0.9, 0.9}}), std::invalid_argument);
        CHECK_THROWS_AS(kkt_residual({{1.0}}, {{0.0}}), std::invalid_argument);
        CHECK_THROWS_AS(kkt_residual({{1.0, 1.0}}, {{1.0}}), std::invalid_argument);
    }
}

TEST_CASE("hessian positive definiteness check") {
    SECTION("optimal point of an uneven request") {
        const AllocationRequest req{{1.0, 4.0, 9.0}};
        CHECK(hessian_pd_check(req, optimal_allocation(req)));
    }
    SECTION("single instance at full share") {
        CHECK(hessian_pd_check({{5.0}}, {{1.0}}));
    }
    SECTION("boundary point rejected") {
        CHECK_THROWS_AS(hessian_pd_check({{1.0, 1.0}}, {{0.0, 1.0}}), std::invalid_argument);
    }
    SECTION("off-diagonal second partials vanish") {
        const AllocationRequest req{{1.0, 4.0, 9.0}};
        const auto point = optimal_allocation(req).proportions;
        auto objective = [&](const std::vector<double>& e) {
            double sum = 0.0;
            for (std::size_t z = 0; z < req.size(); ++z) sum += req.cycles[z] / e[z];
            return sum;
        };
        double diag_scale = 0.0;
        for (std::size_t z = 0; z < req.size(); ++z)
            diag_scale = std::max(diag_scale, 2.0 * req.cycles[z] / std::pow(point[z], 3));
        const double h = 1e-4;
        for (std::size_t a = 0; a < req.size(); ++a) {
            for (std::size_t b = a + 1; b < req.size(); ++b) {
                auto probe = point;
                probe[a] += h; probe[b] += h;
                const double fpp = objective(probe);
                probe[b] -= 2 * h;
                const double fpm = objective(probe);
                probe[a] -= 2 * h;
                const double fmm = objective(probe);
                probe[b] += 2 * h;
                const double fmp = objective(probe);
                const double cross = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
                CHECK(std::abs(cross) < 1e-6 * diag_scale);
            }
        }
    }
}

TEST_CASE("allocation invariants over random requests") {
    Rng rng(1234);
    for (int i = 0; i < 200; ++i) {
        AllocationRequest req;
        const int z = 1 + rng.uniform_int(6);
        for (int j = 0; j < z; ++j) req.cycles.push_back(rng.uniform(1e8, 1e10));

        const auto opt = optimal_allocation(req);
        const auto prop = proportional_allocation(req);

        // feasibility
        for (double e : opt.proportions) CHECK((e > 0.0 && e <= 1.0 + 1e-12));
        CHECK_THAT(opt.sum(), WithinAbs(1.0, 1e-12));
        CHECK(prop.sum() <= 1.0 + 1e-12);

        // optimum value identity: objective at the closed form = (sum sqrt K)^2 / F
        double root_sum = 0.0;
        for (double k : req.cycles) root_sum += std::sqrt(k);
        CHECK_THAT(allocation_objective(req, opt, 6e10), WithinRel(root_sum * root_sum / 6e10, 1e-12));

        // dominance, strict unless all demands equal
        const double f_opt = allocation_objective(req, opt);
        const double f_prop = allocation_objective(req, prop);
        CHECK(f_opt <= f_prop * (1.0 + 1e-12));
        bool all_equal = true;
        for (double k : req.cycles) all_equal = all_equal && k == req.cycles[0];
        if (!all_equal) CHECK(f_opt < f_prop);

        // scale invariance
        AllocationRequest scaled;
        for (double k : req.cycles) scaled.cycles.push_back(137.5 * k);
        const auto opt_scaled = optimal_allocation(scaled);
        for (std::size_t j = 0; j < opt.proportions.size(); ++j)
            CHECK_THAT(opt_scaled.proportions[j], WithinRel(opt.proportions[j], 1e-12));
    }
}

TEST_CASE("oracle agreement at resolution 2000") {
    Rng rng(99);
    for (int i = 0; i < 50; ++i) {
        AllocationRequest req;
        const int z = 1 + rng.uniform_int(4);
        for (int j = 0; j < z; ++j) req.cycles.push_back(rng.uniform(1e8, 1e10));
        const int res = 2000;
        const auto oracle = oracle_allocation(req, res);
        const auto closed = optimal_allocation(req);
        CHECK(allocation_objective(req, closed) <=
              allocation_objective(req, oracle) * (1.0 + 1e-12));
        for (std::size_t j = 0; j < closed.proportions.size(); ++j)
            CHECK_THAT(oracle.proportions[j], WithinAbs(closed.proportions[j], 2.0 / res));
    }
}
