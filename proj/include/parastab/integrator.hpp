#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "parastab/problem.hpp"

namespace parastab {

// Theta scheme for y_t = A y + F(y) + B u + s with piecewise-constant u, s:
//
//   y_{k+1} - y_k = dt [ theta G(y_{k+1}) + (1 - theta) G(y_k) + B u_k + s_k ],  G(y) = A y + F(y).
//
// The adjoint, tangent and second-order sweeps below are the exact transposes and
// derivatives of this recursion, so gradients are exact for the discrete cost.

namespace detail {

/// Tridiagonal system I - c (A + diag(d)) with scratch space.
class ShiftedSystem {
public:
    explicit ShiftedSystem(const DiscreteOperator& op)
        : op_(op), sub_(op.size()), diag_(op.size()), sup_(op.size()), work_(op.size()) {}

    /// Solves (I - c (A + diag(d))) x = rhs in place; `d` may be empty (treated as zero).
    void solve(double c, std::span<const double> d, std::span<double> rhs) {
        const std::size_t n = op_.size();
        const auto a_sub = op_.sub();
        const auto a_diag = op_.diag();
        const auto a_sup = op_.sup();
        for (std::size_t i = 0; i < n; ++i) {
            sub_[i] = -c * a_sub[i];
            sup_[i] = -c * a_sup[i];
            diag_[i] = 1.0 - c * (a_diag[i] + (d.empty() ? 0.0 : d[i]));
        }
        thomas_solve(sub_, diag_, sup_, rhs, work_);
    }

    /// True when I - c (A + diag(d)) is positive definite (all elimination pivots positive).
    bool positive_definite(double c, std::span<const double> d) const {
        const auto a_sub = op_.sub();
        const auto a_diag = op_.diag();
        const auto a_sup = op_.sup();
        double pivot = 0.0;
        for (std::size_t i = 0; i < op_.size(); ++i) {
            double diag = 1.0 - c * (a_diag[i] + d[i]);
            if (i > 0) {
                diag -= (c * a_sub[i]) * (c * a_sup[i - 1]) / pivot;
            }
            if (!(diag > 0.0)) {
                return false;
            }
            pivot = diag;
        }
        return true;
    }

private:
    const DiscreteOperator& op_;
    std::vector<double> sub_, diag_, sup_, work_;
};

/// out = (A + diag(d)) x, d may be empty.
inline void apply_linearized(const DiscreteOperator& op, std::span<const double> d, std::span<const double> x,
                             std::span<double> out) {
    op.apply(x, out);
    if (!d.empty()) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            out[i] += d[i] * x[i];
        }
    }
}

inline void eval_rhs_operator(const ProblemSpec& spec, std::span<const double> y, std::span<double> out) {
    spec.op.apply(y, out);
    if (!spec.nl.is_linear()) {
        for (std::size_t i = 0; i < y.size(); ++i) {
            out[i] += spec.nl.f(y[i]);
        }
    }
}

inline void derivative_weights(const ProblemSpec& spec, std::span<const double> y, std::span<double> d) {
    for (std::size_t i = 0; i < y.size(); ++i) {
        d[i] = spec.nl.df(y[i]);
    }
}

/// Solves z - c G(z) = rhs by Newton, falling back to a fixed-point iteration. A root is
/// accepted only on the branch where I - c G'(z) stays positive definite; other roots of
/// the step equation are artifacts of a step that is too large for the data.
inline void implicit_solve(const ProblemSpec& spec, double c, std::span<const double> rhs, std::span<double> z,
                           ShiftedSystem& system, std::size_t step_index) {
    const std::size_t n = rhs.size();
    if (spec.nl.is_linear() || c == 0.0) {
        std::copy(rhs.begin(), rhs.end(), z.begin());
        if (c != 0.0) {
            system.solve(c, {}, z);
        }
        return;
    }
    const auto& opts = spec.step;
    std::vector<double> start(z.begin(), z.end());
    std::vector<double> g(n), d(n), delta(n);
    auto converged = [&](std::span<const double> update, std::span<const double> iterate) {
        return norm_inf(update) <= opts.tol_step * norm_inf(iterate);
    };
    auto on_branch = [&] {
        derivative_weights(spec, z, d);
        return system.positive_definite(c, d);
    };
    for (int it = 0; it < opts.max_newton; ++it) {
        eval_rhs_operator(spec, z, g);
        for (std::size_t i = 0; i < n; ++i) {
            delta[i] = -(z[i] - c * g[i] - rhs[i]);
        }
        derivative_weights(spec, z, d);
        system.solve(c, d, delta);
        axpy(1.0, delta, z);
        if (!all_finite(z)) {
            break;
        }
        if (converged(delta, z)) {
            if (on_branch()) {
                return;
            }
            break;
        }
    }
    std::copy(start.begin(), start.end(), z.begin());
    for (int it = 0; it < opts.max_fixed_point; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            delta[i] = rhs[i] + c * spec.nl.f(z[i]);
        }
        system.solve(c, {}, delta);
        for (std::size_t i = 0; i < n; ++i) {
            const double next = delta[i];
            delta[i] = next - z[i];
            z[i] = next;
        }
        if (!all_finite(z)) {
            break;
        }
        if (converged(delta, z)) {
            if (on_branch()) {
                return;
            }
            break;
        }
    }
    throw Error(ErrorCode::NonlinearStepDivergence,
                "nonlinear step " + std::to_string(step_index) + " did not converge (initial state too large?)");
}

}  // namespace detail

/// Forward solve of the state equation; `source` (optional) is an additional forcing.
inline StateTrajectory solve_state(const ProblemSpec& spec, std::span<const double> y0, const ControlTrajectory& u,
                                   const ForcingTrajectory* source = nullptr) {
    const std::size_t n = spec.state_dim();
    require_dims(y0.size(), n, "initial state");
    require_dims(u.dim(), spec.control_dim(), "control dimension");
    require(all_finite(y0), ErrorCode::InvalidArgument, "initial state must be finite");
    const TimeGrid& tg = u.time_grid();
    if (source) {
        require(source->time_grid() == tg, ErrorCode::DimensionMismatch, "source on a different time grid");
        require_dims(source->dim(), n, "source dimension");
    }
    const double dt = tg.dt();
    const double theta = spec.theta;
    StateTrajectory y(tg, n);
    std::copy(y0.begin(), y0.end(), y[0].begin());
    detail::ShiftedSystem system(spec.op);
    std::vector<double> rhs(n), g(n);
    for (std::size_t k = 0; k < tg.steps(); ++k) {
        auto yk = y[k];
        std::copy(yk.begin(), yk.end(), rhs.begin());
        if (theta < 1.0) {
            detail::eval_rhs_operator(spec, yk, g);
            axpy(dt * (1.0 - theta), g, rhs);
        }
        spec.control.apply_add(u[k], dt, rhs);
        if (source) {
            axpy(dt, (*source)[k], rhs);
        }
        auto next = y[k + 1];
        std::copy(yk.begin(), yk.end(), next.begin());
        detail::implicit_solve(spec, dt * theta, rhs, next, system, k);
    }
    return y;
}

/// Backward sweep  (I - dt theta G'_k) q_{k-1} = (I + dt (1 - theta) G'_k) q_k - r_k,  q_N = 0,
/// with G'_k = A + f'(ybar_k). `r` is indexed on state nodes; r[0] is unused.
inline AdjointTrajectory adjoint_sweep(const ProblemSpec& spec, const StateTrajectory& ybar,
                                       const StateTrajectory& r) {
    ybar.check_compatible(r);
    const TimeGrid& tg = ybar.time_grid();
    const std::size_t n = spec.state_dim();
    require_dims(ybar.dim(), n, "linearization point dimension");
    const double dt = tg.dt();
    const double theta = spec.theta;
    AdjointTrajectory q(tg, n);
    detail::ShiftedSystem system(spec.op);
    std::vector<double> d(n), tmp(n), rhs(n);
    const bool linear = spec.nl.is_linear();
    for (std::size_t k = tg.steps(); k >= 1; --k) {
        if (!linear) {
            detail::derivative_weights(spec, ybar[k], d);
        }
        const std::span<const double> dk = linear ? std::span<const double>{} : std::span<const double>{d};
        auto qk = q[k];
        std::copy(qk.begin(), qk.end(), rhs.begin());
        if (theta < 1.0) {
            detail::apply_linearized(spec.op, dk, qk, tmp);
            axpy(dt * (1.0 - theta), tmp, rhs);
        }
        axpy(-1.0, r[k], rhs);
        system.solve(dt * theta, dk, rhs);
        std::copy(rhs.begin(), rhs.end(), q[k - 1].begin());
    }
    return q;
}

/// Adjoint of the optimal-control problem: -p_t - A p - F'(ybar) p = -ybar with p(T) = 0.
inline AdjointTrajectory solve_adjoint(const ProblemSpec& spec, const StateTrajectory& ybar) {
    const TimeGrid& tg = ybar.time_grid();
    StateTrajectory r(tg, ybar.dim());
    for (std::size_t k = 1; k <= tg.steps(); ++k) {
        const double w = state_cost_weight(tg, spec.theta, k);
        auto rk = r[k];
        const auto yk = ybar[k];
        for (std::size_t i = 0; i < rk.size(); ++i) {
            rk[i] = w * yk[i];
        }
    }
    return adjoint_sweep(spec, ybar, r);
}

/// Tangent solve v_t = A v + F'(ybar) v + B w + source, v(0) = v0.
/// `w` and `source` may be null (treated as zero).
inline StateTrajectory solve_linearized_state(const ProblemSpec& spec, const StateTrajectory& ybar,
                                              std::span<const double> v0, const ControlTrajectory* w,
                                              const ForcingTrajectory* source = nullptr) {
    const TimeGrid& tg = ybar.time_grid();
    const std::size_t n = spec.state_dim();
    require_dims(v0.size(), n, "linearized initial state");
    if (w) {
        require(w->time_grid() == tg, ErrorCode::DimensionMismatch, "control on a different time grid");
        require_dims(w->dim(), spec.control_dim(), "control dimension");
    }
    if (source) {
        require(source->time_grid() == tg, ErrorCode::DimensionMismatch, "source on a different time grid");
        require_dims(source->dim(), n, "source dimension");
    }
    const double dt = tg.dt();
    const double theta = spec.theta;
    const bool linear = spec.nl.is_linear();
    StateTrajectory v(tg, n);
    std::copy(v0.begin(), v0.end(), v[0].begin());
    detail::ShiftedSystem system(spec.op);
    std::vector<double> d(n), tmp(n), rhs(n);
    for (std::size_t k = 0; k < tg.steps(); ++k) {
        const auto vk = v[k];
        std::copy(vk.begin(), vk.end(), rhs.begin());
        if (theta < 1.0) {
            if (!linear) {
                detail::derivative_weights(spec, ybar[k], d);
            }
            detail::apply_linearized(spec.op, linear ? std::span<const double>{} : std::span<const double>{d}, vk,
                                     tmp);
            axpy(dt * (1.0 - theta), tmp, rhs);
        }
        if (w) {
            spec.control.apply_add((*w)[k], dt, rhs);
        }
        if (source) {
            axpy(dt, (*source)[k], rhs);
        }
        if (!linear) {
            detail::derivative_weights(spec, ybar[k + 1], d);
        }
        system.solve(dt * theta, linear ? std::span<const double>{} : std::span<const double>{d}, rhs);
        std::copy(rhs.begin(), rhs.end(), v[k + 1].begin());
    }
    return v;
}

/// max_k || y_{k+1} - y_k - dt [theta G(y_{k+1}) + (1-theta) G(y_k) + B u_k] ||_Y / dt
inline double state_scheme_residual(const ProblemSpec& spec, const StateTrajectory& y, const ControlTrajectory& u) {
    require(y.time_grid() == u.time_grid(), ErrorCode::DimensionMismatch, "state and control grids differ");
    const TimeGrid& tg = y.time_grid();
    const std::size_t n = spec.state_dim();
    const double dt = tg.dt();
    std::vector<double> g0(n), g1(n), r(n);
    double worst = 0.0;
    for (std::size_t k = 0; k < tg.steps(); ++k) {
        detail::eval_rhs_operator(spec, y[k], g0);
        detail::eval_rhs_operator(spec, y[k + 1], g1);
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = y[k + 1][i] - y[k][i] - dt * (spec.theta * g1[i] + (1.0 - spec.theta) * g0[i]);
        }
        spec.control.apply_add(u[k], -dt, r);
        worst = std::max(worst, state_norm(spec, r) / dt);
    }
    return worst;
}

/// Residual of the backward sweep for the adjoint of the cost, in the same units.
inline double adjoint_scheme_residual(const ProblemSpec& spec, const StateTrajectory& ybar,
                                      const AdjointTrajectory& p) {
    require(ybar.time_grid() == p.time_grid(), ErrorCode::DimensionMismatch, "state and adjoint grids differ");
    const TimeGrid& tg = ybar.time_grid();
    const std::size_t n = spec.state_dim();
    const double dt = tg.dt();
    std::vector<double> d(n), a0(n), a1(n), r(n);
    double worst = norm_inf(p[tg.steps()]) > 0.0 ? state_norm(spec, p[tg.steps()]) / dt : 0.0;
    for (std::size_t k = tg.steps(); k >= 1; --k) {
        detail::derivative_weights(spec, ybar[k], d);
        detail::apply_linearized(spec.op, d, p[k - 1], a0);
        detail::apply_linearized(spec.op, d, p[k], a1);
        const double w = state_cost_weight(tg, spec.theta, k);
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = p[k - 1][i] - dt * spec.theta * a0[i] - p[k][i] - dt * (1.0 - spec.theta) * a1[i] +
                   w * ybar[k][i];
        }
        worst = std::max(worst, state_norm(spec, r) / dt);
    }
    return worst;
}

}  // namespace parastab
