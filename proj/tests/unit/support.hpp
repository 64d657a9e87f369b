#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <parastab.hpp>

namespace parastab::testing {

inline ProblemSpec problem(std::size_t n, double length, double shift, NonlinearityKind kind, double alpha = 1.0,
                           double eta = std::numeric_limits<double>::infinity(), double theta = 1.0) {
    return make_problem(build_grid(n, length), shift, Nonlinearity(kind), alpha, eta, theta);
}

inline GridFunction random_vector(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    GridFunction v(n);
    for (double& x : v) {
        x = normal(rng);
    }
    return v;
}

template <class Tag>
Trajectory<Tag> random_traj(const TimeGrid& tg, std::size_t dim, std::mt19937_64& rng) {
    Trajectory<Tag> t(tg, dim);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& x : t.values()) {
        x = normal(rng);
    }
    return t;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace parastab::testing
