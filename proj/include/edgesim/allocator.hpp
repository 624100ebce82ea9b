#ifndef EDGESIM_ALLOCATOR_HPP
#define EDGESIM_ALLOCATOR_HPP

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <vector>

namespace edgesim {

// Cycle demands of the service instances hosted on one edge node.
struct AllocationRequest {
    std::vector<double> cycles;

    bool empty() const { return cycles.empty(); }
    std::size_t size() const { return cycles.size(); }

    void validate() const {
        for (double k : cycles)
            if (!(k > 0.0)) throw std::invalid_argument("cycle demands must be > 0");
    }
};

// Fractional server shares, aligned with the request.
struct AllocationResult {
    std::vector<double> proportions;

    double sum() const {
        double s = 0.0;
        for (double e : proportions) s += e;
        return s;
    }
};

// Total computation delay of a request under a given allocation.
inline double allocation_objective(const AllocationRequest& req, const AllocationResult& result,
                                   double capacity = 1.0) {
    if (req.size() != result.proportions.size())
        throw std::invalid_argument("allocation does not match request");
    double sum = 0.0;
    for (std::size_t z = 0; z < req.size(); ++z) {
        const double e = result.proportions[z];
        if (!(e > 0.0)) throw std::invalid_argument("allocation proportion must be > 0");
        sum += req.cycles[z] / (e * capacity);
    }
    return sum;
}

// Closed-form minimizer of the per-node computation delay: shares go with the
// square roots of the demands and saturate the capacity constraint.
inline AllocationResult optimal_allocation(const AllocationRequest& req) {
    req.validate();
    AllocationResult result;
    if (req.empty()) return result;
    double root_sum = 0.0;
    for (double k : req.cycles) root_sum += std::sqrt(k);
    result.proportions.reserve(req.size());
    for (double k : req.cycles) result.proportions.push_back(std::sqrt(k) / root_sum);
    return result;
}

// Baseline rule: shares proportional to the demands themselves.
inline AllocationResult proportional_allocation(const AllocationRequest& req) {
    req.validate();
    AllocationResult result;
    if (req.empty()) return result;
    double sum = 0.0;
    for (double k : req.cycles) sum += k;
    result.proportions.reserve(req.size());
    for (double k : req.cycles) result.proportions.push_back(k / sum);
    return result;
}

// Independent check on the closed form: exact minimizer over the discretized
// simplex {e_z = n_z/resolution, n_z >= 1, sum n_z = resolution}. The
// objective is separable and convex in each coordinate, so handing out grid
// units one at a time to the instance with the largest marginal gain reaches
// the discrete optimum; this never touches the square-root formula.
inline AllocationResult oracle_allocation(const AllocationRequest& req, int resolution) {
    req.validate();
    if (req.empty() || req.size() > 6)
        throw std::invalid_argument("oracle supports 1..6 instances");
    if (resolution < 100) throw std::invalid_argument("oracle resolution must be >= 100");
    if (resolution < static_cast<int>(req.size()))
        throw std::invalid_argument("resolution smaller than instance count");

    const std::size_t z_count = req.size();
    std::vector<int> units(z_count, 1);
    // marginal gain of the (n -> n+1)-th unit for instance z: K_z*(1/n - 1/(n+1))
    auto gain = [&](std::size_t z) {
        const double n = static_cast<double>(units[z]);
        return req.cycles[z] / (n * (n + 1.0));
    };
    using Entry = std::pair<double, std::size_t>;
    auto worse = [](const Entry& a, const Entry& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second > b.second;  // tie-break: lowest index first
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);
    for (std::size_t z = 0; z < z_count; ++z) heap.push({gain(z), z});

    for (int left = resolution - static_cast<int>(z_count); left > 0; --left) {
        auto [g, z] = heap.top();
        heap.pop();
        ++units[z];
        heap.push({gain(z), z});
    }

    AllocationResult result;
    result.proportions.reserve(z_count);
    for (std::size_t z = 0; z < z_count; ++z)
        result.proportions.push_back(static_cast<double>(units[z]) / resolution);
    return result;
}

namespace detail {

inline void check_feasible(const AllocationRequest& req, const AllocationResult& result) {
    req.validate();
    if (req.size() != result.proportions.size())
        throw std::invalid_argument("allocation does not match request");
    double sum = 0.0;
    for (double e : result.proportions) {
        if (!(e > 0.0) || e > 1.0 + 1e-12)
            throw std::invalid_argument("allocation proportion outside (0, 1]");
        sum += e;
    }
    if (sum > 1.0 + 1e-12) throw std::invalid_argument("allocation proportions exceed capacity");
}

}  // namespace detail

// Stationarity + complementary-slackness residual of the interior first-order
// conditions, dimensionless (capacity cancels). The multiplier is recovered
// as the mean of K_z/e_z^2 and the stationarity gap is reported relative to
// it so the residual is scale-free in K.
inline double kkt_residual(const AllocationRequest& req, const AllocationResult& result) {
    detail::check_feasible(req, result);
    if (req.empty()) return 0.0;

    double beta = 0.0;
    for (std::size_t z = 0; z < req.size(); ++z) {
        const double e = result.proportions[z];
        beta += req.cycles[z] / (e * e);
    }
    beta /= static_cast<double>(req.size());

    double stationarity = 0.0;
    for (std::size_t z = 0; z < req.size(); ++z) {
        const double e = result.proportions[z];
        stationarity = std::max(stationarity, std::abs(beta - req.cycles[z] / (e * e)));
    }
    const double slackness = std::abs(result.sum() - 1.0);
    return stationarity / beta + slackness;
}

// Convexity check at an interior point: the analytic Hessian of the objective
// is diagonal with entries 2*K_z/e_z^3, positive definite iff all positive.
// The diagonal is cross-checked against a central finite difference of the
// objective (step 1e-6, relative agreement 1e-3).
inline bool hessian_pd_check(const AllocationRequest& req, const AllocationResult& result) {
    req.validate();
    if (req.size() != result.proportions.size())
        throw std::invalid_argument("allocation does not match request");
    for (double e : result.proportions)
        if (!(e > 0.0) || e > 1.0 + 1e-12)
            throw std::invalid_argument("hessian check needs an interior point");
    if (req.empty()) return true;

    auto objective = [&](const std::vector<double>& e) {
        double sum = 0.0;
        for (std::size_t z = 0; z < req.size(); ++z) sum += req.cycles[z] / e[z];
        return sum;
    };

    const double h = 1e-6;
    std::vector<double> probe = result.proportions;
    for (std::size_t z = 0; z < req.size(); ++z) {
        const double e = result.proportions[z];
        const double analytic = 2.0 * req.cycles[z] / (e * e * e);
        if (!(analytic > 0.0)) return false;

        const double f0 = objective(probe);
        probe[z] = e + h;
        const double fp = objective(probe);
        probe[z] = e - h;
        const double fm = objective(probe);
        probe[z] = e;
        const double numeric = (fp - 2.0 * f0 + fm) / (h * h);
        if (std::abs(numeric - analytic) > 1e-3 * analytic) return false;
    }
    return true;
}

}  // namespace edgesim

#endif
