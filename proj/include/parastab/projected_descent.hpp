#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <vector>

#include "parastab/trajectory.hpp"

namespace parastab {

/// Objective over control trajectories for projected descent.
///
/// `value(u)` may cache whatever `gradient(u)` needs; `gradient` is only called
/// right after `value` on the same iterate.
template <class T>
concept DescentObjective = requires(T obj, const ControlTrajectory& u) {
    { obj.value(u) } -> std::convertible_to<double>;
    { obj.gradient(u) } -> std::same_as<ControlTrajectory>;
    { obj.project(u) } -> std::same_as<ControlTrajectory>;
    { obj.inner(u, u) } -> std::convertible_to<double>;
    { obj.stationarity(u, u) } -> std::convertible_to<double>;
};

struct DescentOptions {
    double tol = 1e-8;
    int max_iter = 500;
    double armijo = 1e-4;
    double initial_step = 1.0;
    double min_step = 1e-14;
    double max_step = 1e14;
    int max_backtracks = 50;
};

struct DescentResult {
    ControlTrajectory u;
    ControlTrajectory gradient;
    double value = 0.0;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Objective value after every accepted step (starting point first).
    std::vector<double> history;
};

/// Projected gradient with Barzilai-Borwein trial steps and Armijo backtracking along
/// the projection arc. Accepted iterates never increase the objective beyond round-off.
template <DescentObjective Objective>
DescentResult projected_descent(Objective& obj, ControlTrajectory u0, const DescentOptions& opts) {
    DescentResult res;
    res.u = obj.project(u0);
    res.value = obj.value(res.u);
    res.gradient = obj.gradient(res.u);
    res.history.push_back(res.value);
    double step = opts.initial_step;
    for (int it = 0;; ++it) {
        res.residual = obj.stationarity(res.u, res.gradient);
        res.iterations = it;
        if (res.residual <= opts.tol) {
            res.converged = true;
            return res;
        }
        if (it >= opts.max_iter) {
            return res;
        }
        bool accepted = false;
        ControlTrajectory trial;
        double trial_value = 0.0;
        for (int bt = 0; bt < opts.max_backtracks; ++bt) {
            trial = obj.project(ControlTrajectory::combine(res.u, -step, res.gradient));
            const ControlTrajectory d = trial - res.u;
            const double dd = obj.inner(d, d);
            trial_value = obj.value(trial);
            const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(res.value);
            if (std::isfinite(trial_value) && trial_value <= res.value - opts.armijo / step * dd + slack) {
                accepted = true;
                break;
            }
            step *= 0.5;
            if (step < opts.min_step) {
                break;
            }
        }
        if (!accepted) {
            // Line search stalled; the caller decides from `converged`.
            obj.value(res.u);
            return res;
        }
        ControlTrajectory g_new = obj.gradient(trial);
        const ControlTrajectory du = trial - res.u;
        const ControlTrajectory dg = g_new - res.gradient;
        const double sy = obj.inner(du, dg);
        const double ss = obj.inner(du, du);
        step = sy > 0.0 ? std::clamp(ss / sy, opts.min_step, opts.max_step) : opts.initial_step;
        res.u = std::move(trial);
        res.gradient = std::move(g_new);
        res.value = trial_value;
        res.history.push_back(res.value);
    }
}

}  // namespace parastab
