#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "parastab/control.hpp"
#include "parastab/integrator.hpp"
#include "parastab/norms.hpp"
#include "parastab/projected_descent.hpp"

namespace parastab {

/// Residuals of the discrete optimality system, all nonnegative.
struct ResidualReport {
    double state_residual = 0.0;
    double adjoint_residual = 0.0;
    /// |u - P(u - (alpha u - B* p))|_U, the natural residual of the variational inequality.
    double projection_residual = 0.0;
    /// |u - P(B* p / alpha)|_U, the feedback fixed-point residual.
    double fixed_point_residual = 0.0;
    /// max over nodes where B* p / alpha leaves the ball of | |u_k| - eta |.
    double complementarity_gap = 0.0;
};

struct OptimalTriple {
    StateTrajectory y;
    ControlTrajectory u;
    AdjointTrajectory p;
    double cost = 0.0;
    ResidualReport residuals;
    bool converged = false;
    int iterations = 0;
    std::vector<double> cost_history;
};

/// Thrown when the optimizer hits its iteration cap; carries the best iterate.
class OptimizationError : public Error {
public:
    OptimizationError(const std::string& what, OptimalTriple best)
        : Error(ErrorCode::MaxIterations, what), best_(std::make_shared<OptimalTriple>(std::move(best))) {}

    const OptimalTriple& best() const noexcept { return *best_; }

private:
    std::shared_ptr<const OptimalTriple> best_;
};

struct OptimizerConfig {
    /// Stationarity tolerance, scaled by max(1, |y0|_Y).
    double tol_opt = 1e-8;
    int max_iter = 2000;
    /// Control-norm slack used to classify a node as active.
    double active_tol = 1e-9;
};

/// J = 1/2 sum_k w_k |y_k|_Y^2 + alpha/2 |u|_U^2 with the scheme-consistent weights w_k.
inline double cost_of(const ProblemSpec& spec, const StateTrajectory& y, const ControlTrajectory& u) {
    const TimeGrid& tg = y.time_grid();
    double state = 0.0;
    for (std::size_t k = 0; k <= tg.steps(); ++k) {
        const double w = state_cost_weight(tg, spec.theta, k);
        if (w != 0.0) {
            state += w * state_inner(spec, y[k], y[k]);
        }
    }
    return 0.5 * state + 0.5 * spec.alpha * control_inner(spec, u, u);
}

inline double reduced_cost(const ProblemSpec& spec, std::span<const double> y0, const ControlTrajectory& u) {
    return cost_of(spec, solve_state(spec, y0, u), u);
}

/// g_k = alpha u_k - B* p_k, the Riesz representative of J'(u) in U.
inline ControlTrajectory gradient_from_adjoint(const ProblemSpec& spec, const ControlTrajectory& u,
                                               const AdjointTrajectory& p) {
    ControlTrajectory g = adjoint_feedback(spec, p, -1.0);
    axpy(spec.alpha, u.values(), g.values());
    return g;
}

inline ControlTrajectory reduced_gradient(const ProblemSpec& spec, std::span<const double> y0,
                                          const ControlTrajectory& u) {
    const StateTrajectory y = solve_state(spec, y0, u);
    return gradient_from_adjoint(spec, u, solve_adjoint(spec, y));
}

/// Exact gradient of the discrete value with respect to y0 (h-weighted pairing):
/// w_0 y0 - (I + dt (1 - theta) G'(y0)) p_0, which is -p_0 for implicit Euler.
inline GridFunction initial_state_gradient(const ProblemSpec& spec, const StateTrajectory& y,
                                           const AdjointTrajectory& p) {
    const TimeGrid& tg = y.time_grid();
    const std::size_t n = spec.state_dim();
    GridFunction g(n);
    const auto p0 = p[0];
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = -p0[i];
    }
    if (spec.theta < 1.0) {
        std::vector<double> d(n), a(n);
        detail::derivative_weights(spec, y[0], d);
        detail::apply_linearized(spec.op, d, p0, a);
        axpy(-tg.dt() * (1.0 - spec.theta), a, g);
        axpy(state_cost_weight(tg, spec.theta, 0), y[0], g);
    }
    return g;
}

namespace detail {

inline double natural_residual(const ProblemSpec& spec, const ControlTrajectory& u, const ControlTrajectory& g,
                               double step) {
    const ControlTrajectory r = u - project_control(spec, ControlTrajectory::combine(u, -step, g));
    return control_norm(spec, r);
}

/// max_k |u_k - P(u_k - g_k / alpha)|, i.e. the feedback relation node by node.
inline double pointwise_fixed_point_residual(const ProblemSpec& spec, const ControlTrajectory& u,
                                             const ControlTrajectory& g) {
    const ControlTrajectory r = u - project_control(spec, ControlTrajectory::combine(u, -1.0 / spec.alpha, g));
    return control_sup_norm(spec, r);
}

/// Reduced objective with caching of the last state solve.
class ReducedObjective {
public:
    ReducedObjective(const ProblemSpec& spec, std::span<const double> y0) : spec_(spec), y0_(y0.begin(), y0.end()) {}

    /// Divergent trial steps evaluate to +inf so the line search backtracks; divergence at the
    /// starting point propagates.
    double value(const ControlTrajectory& u) {
        try {
            y_ = solve_state(spec_, y0_, u);
        } catch (const Error& e) {
            if (evaluations_ == 0 || e.code() != ErrorCode::NonlinearStepDivergence) {
                throw;
            }
            return std::numeric_limits<double>::infinity();
        }
        ++evaluations_;
        return cost_of(spec_, y_, u);
    }

    ControlTrajectory gradient(const ControlTrajectory& u) {
        p_ = solve_adjoint(spec_, y_);
        return gradient_from_adjoint(spec_, u, p_);
    }

    ControlTrajectory project(const ControlTrajectory& u) const { return project_control(spec_, u); }
    double inner(const ControlTrajectory& a, const ControlTrajectory& b) const { return control_inner(spec_, a, b); }

    /// Natural residuals at steps 1 and 1/alpha in U, and the fixed-point residual in C(I; U).
    double stationarity(const ControlTrajectory& u, const ControlTrajectory& g) const {
        const double r = std::max(natural_residual(spec_, u, g, 1.0), natural_residual(spec_, u, g, 1.0 / spec_.alpha));
        return std::max(r, pointwise_fixed_point_residual(spec_, u, g));
    }

    const StateTrajectory& state() const noexcept { return y_; }
    const AdjointTrajectory& adjoint() const noexcept { return p_; }

private:
    const ProblemSpec& spec_;
    GridFunction y0_;
    StateTrajectory y_;
    AdjointTrajectory p_;
    std::size_t evaluations_ = 0;
};

}  // namespace detail

inline ResidualReport optimality_residuals(const ProblemSpec& spec, const StateTrajectory& y,
                                           const ControlTrajectory& u, const AdjointTrajectory& p,
                                           double active_tol = 1e-9) {
    ResidualReport r;
    r.state_residual = state_scheme_residual(spec, y, u);
    r.adjoint_residual = adjoint_scheme_residual(spec, y, p);
    const ControlTrajectory g = gradient_from_adjoint(spec, u, p);
    r.projection_residual = detail::natural_residual(spec, u, g, 1.0);
    r.fixed_point_residual = detail::natural_residual(spec, u, g, 1.0 / spec.alpha);
    if (!spec.unconstrained()) {
        const ControlTrajectory free = adjoint_feedback(spec, p, 1.0 / spec.alpha);
        for (std::size_t k = 0; k < u.size(); ++k) {
            if (control_norm(spec, free[k]) > spec.eta + active_tol) {
                r.complementarity_gap =
                    std::max(r.complementarity_gap, std::abs(control_norm(spec, u[k]) - spec.eta));
            }
        }
    }
    return r;
}

inline ResidualReport optimality_residuals(const ProblemSpec& spec, const OptimalTriple& triple) {
    return optimality_residuals(spec, triple.y, triple.u, triple.p);
}

/// Projected gradient (BB steps, Armijo backtracking) on the reduced problem over the
/// time grid `tg`. `warm_start` (optional) seeds the iteration.
inline OptimalTriple optimize(const ProblemSpec& spec, std::span<const double> y0, const TimeGrid& tg,
                              const OptimizerConfig& cfg = {}, const ControlTrajectory* warm_start = nullptr) {
    spec.validate();
    require_dims(y0.size(), spec.state_dim(), "initial state");
    require(cfg.tol_opt > 0.0, ErrorCode::InvalidArgument, "tol_opt must be > 0");
    ControlTrajectory u0(tg, spec.control_dim());
    if (warm_start) {
        require(warm_start->time_grid() == tg, ErrorCode::DimensionMismatch, "warm start on a different time grid");
        u0 = *warm_start;
    }
    detail::ReducedObjective objective(spec, y0);
    DescentOptions opts;
    opts.tol = cfg.tol_opt * std::max(1.0, norm_Y(spec.grid, y0));
    opts.max_iter = cfg.max_iter;
    opts.initial_step = 1.0 / spec.alpha;
    DescentResult res = projected_descent(objective, std::move(u0), opts);

    OptimalTriple triple{objective.state(), std::move(res.u), objective.adjoint(), res.value, {}, res.converged,
                         res.iterations, std::move(res.history)};
    triple.residuals = optimality_residuals(spec, triple.y, triple.u, triple.p, cfg.active_tol);
    if (!triple.converged) {
        throw OptimizationError("projected gradient stopped at residual " + std::to_string(res.residual) +
                                    " after " + std::to_string(res.iterations) + " iterations",
                                std::move(triple));
    }
    return triple;
}

}  // namespace parastab
