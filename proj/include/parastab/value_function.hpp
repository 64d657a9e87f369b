#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "parastab/norms.hpp"
#include "parastab/optimizer.hpp"
#include "parastab/parallel.hpp"
#include "parastab/sampling.hpp"
#include "parastab/second_order.hpp"

namespace parastab {

/// Truncation of the infinite horizon. With `auto_tail`, T and n_steps double (dt fixed)
/// until the fitted tail C e^{-omega T} of the optimal state is below tail_tol |y0|_Y.
struct HorizonPolicy {
    bool auto_tail = true;
    double T = 4.0;
    std::size_t n_steps = 200;
    double tail_tol = 1e-6;
    std::size_t max_steps = 16384;
};

struct SolveConfig {
    OptimizerConfig optimizer;
    HorizonPolicy horizon;
};

struct ValueSolution {
    TimeGrid tg;
    OptimalTriple triple;
    double V = 0.0;
    GridFunction grad;
    std::optional<TailFit> tail;
    int doublings = 0;
};

/// Optimal control on a fixed time grid, warm-started from `warm` when given.
inline ValueSolution solve_value_on(const ProblemSpec& spec, std::span<const double> y0, const TimeGrid& tg,
                                    const OptimizerConfig& cfg, const ControlTrajectory* warm = nullptr) {
    ValueSolution s;
    s.tg = tg;
    s.triple = optimize(spec, y0, tg, cfg, warm);
    s.V = s.triple.cost;
    s.grad = initial_state_gradient(spec, s.triple.y, s.triple.p);
    return s;
}

/// Control on a longer grid with the same dt: old values first, zeros after.
inline ControlTrajectory extend_control(const ControlTrajectory& u, const TimeGrid& tg) {
    ControlTrajectory out(tg, u.dim());
    const std::size_t rows = std::min(u.size(), out.size());
    std::copy(u.values().begin(), u.values().begin() + static_cast<std::ptrdiff_t>(rows * u.dim()),
              out.values().begin());
    return out;
}

inline ValueSolution solve_value(const ProblemSpec& spec, std::span<const double> y0, const SolveConfig& cfg) {
    const HorizonPolicy& hp = cfg.horizon;
    require(hp.T > 0.0 && hp.n_steps >= 1, ErrorCode::InvalidArgument, "horizon needs T > 0 and n_steps >= 1");
    require(hp.tail_tol > 0.0, ErrorCode::InvalidArgument, "tail_tol must be > 0");
    TimeGrid tg(hp.T, hp.n_steps);
    ValueSolution s = solve_value_on(spec, y0, tg, cfg.optimizer);
    if (!hp.auto_tail) {
        return s;
    }
    const double y0_norm = norm_Y(spec.grid, y0);
    for (;;) {
        if (y0_norm == 0.0) {
            return s;
        }
        try {
            const TailFit fit = tail_decay_fit(spec.grid, s.triple.y, 0.5 * tg.horizon());
            s.tail = fit;
            if (fit.omega > 0.0 && fit.C * std::exp(-fit.omega * tg.horizon()) <= hp.tail_tol * y0_norm) {
                return s;
            }
        } catch (const Error& e) {
            // The tail already sits at the round-off floor.
            if (e.code() == ErrorCode::FitUnreliable) {
                return s;
            }
            throw;
        }
        require(2 * tg.steps() <= hp.max_steps, ErrorCode::MaxIterations,
                "horizon doubling exceeded max_steps = " + std::to_string(hp.max_steps));
        const TimeGrid longer(2.0 * tg.horizon(), 2 * tg.steps());
        const ControlTrajectory warm = extend_control(s.triple.u, longer);
        const int doublings = s.doublings + 1;
        s = solve_value_on(spec, y0, longer, cfg.optimizer, &warm);
        s.doublings = doublings;
        tg = longer;
    }
}

inline double value(const ProblemSpec& spec, std::span<const double> y0, const SolveConfig& cfg = {}) {
    return solve_value(spec, y0, cfg).V;
}

/// Gradient of the discrete value in the h-weighted pairing; equals -p(0) for implicit Euler.
inline GridFunction value_gradient(const ProblemSpec& spec, std::span<const double> y0, const SolveConfig& cfg = {}) {
    return solve_value(spec, y0, cfg).grad;
}

// -- finite-difference certificate ----------------------------------------------

struct FdRow {
    std::size_t direction = 0;
    double eps = 0.0;
    double fd = 0.0;
    double inner = 0.0;
    double abs_err = 0.0;
    /// Round-off level of the central difference at this eps.
    double noise = 0.0;
};

struct FdReport {
    double V = 0.0;
    std::vector<FdRow> rows;
    /// Per direction, the order between the two smallest eps; +inf when the error at the
    /// smallest eps is already at round-off.
    std::vector<double> orders;
    double observed_order = std::numeric_limits<double>::infinity();
};

inline double convergence_order(double eps_big, double err_big, double eps_small, double err_small, double noise) {
    if (err_small <= noise) {
        return std::numeric_limits<double>::infinity();
    }
    return std::log(err_big / err_small) / std::log(eps_big / eps_small);
}

/// Central differences of the value along each direction against <grad, delta>, with all
/// perturbed solves on the base time grid and warm-started from the base control.
inline FdReport fd_gradient_check(const ProblemSpec& spec, const ValueSolution& base, std::span<const double> y0,
                                  const std::vector<GridFunction>& directions, const std::vector<double>& eps_list,
                                  const OptimizerConfig& cfg) {
    require(!eps_list.empty(), ErrorCode::InvalidArgument, "eps_list must not be empty");
    for (double e : eps_list) {
        require(e > 0.0, ErrorCode::InvalidArgument, "eps values must be > 0");
    }
    for (const auto& d : directions) {
        require_dims(d.size(), spec.state_dim(), "direction");
    }
    FdReport rep;
    rep.V = base.V;
    const std::size_t n_eps = eps_list.size();
    rep.rows.resize(directions.size() * n_eps);
    parallel_for(rep.rows.size(), [&](std::size_t idx) {
        const std::size_t j = idx / n_eps;
        const double eps = eps_list[idx % n_eps];
        const GridFunction& d = directions[j];
        FdRow row;
        row.direction = j;
        row.eps = eps;
        row.inner = state_inner(spec, base.grad, d);
        if (norm_inf(d) > 0.0) {
            GridFunction yp(y0.begin(), y0.end()), ym(y0.begin(), y0.end());
            axpy(eps, d, yp);
            axpy(-eps, d, ym);
            const double vp = solve_value_on(spec, yp, base.tg, cfg, &base.triple.u).V;
            const double vm = solve_value_on(spec, ym, base.tg, cfg, &base.triple.u).V;
            row.fd = (vp - vm) / (2.0 * eps);
            row.noise = 1e3 * std::numeric_limits<double>::epsilon() * std::max(std::abs(vp), std::abs(vm)) / eps;
        }
        row.abs_err = std::abs(row.fd - row.inner);
        rep.rows[idx] = row;
    });
    if (n_eps >= 2) {
        std::vector<std::size_t> order(n_eps);
        for (std::size_t i = 0; i < n_eps; ++i) {
            order[i] = i;
        }
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return eps_list[a] > eps_list[b]; });
        const std::size_t big = order[n_eps - 2];
        const std::size_t small = order[n_eps - 1];
        for (std::size_t j = 0; j < directions.size(); ++j) {
            const FdRow& rb = rep.rows[j * n_eps + big];
            const FdRow& rs = rep.rows[j * n_eps + small];
            const double o = convergence_order(rb.eps, rb.abs_err, rs.eps, rs.abs_err, rs.noise);
            rep.orders.push_back(o);
            rep.observed_order = std::min(rep.observed_order, o);
        }
    }
    return rep;
}

// -- Lipschitz stability of the solution map ----------------------------------------

/// Pairs y0_hat, y0_tilde around y0 within the given radius (same construction as the KKT
/// probe); ratio = (|dy|_W + |du|_{U cap C} + |dp|_W) / |dy0|_Y.
inline RatioTable lipschitz_probe(const ProblemSpec& spec, const ValueSolution& base, std::span<const double> y0,
                                  std::size_t n_pairs, double radius, const OptimizerConfig& cfg,
                                  const ProbeOptions& probe = {}) {
    require(radius > 0.0, ErrorCode::InvalidArgument, "radius must be > 0");
    const SpatialGrid& grid = spec.grid;
    auto shared_rng = sample_rng(probe.seed, std::numeric_limits<std::uint64_t>::max());
    const GridFunction shared = random_direction(grid, shared_rng);
    std::vector<RatioRow> rows(n_pairs);
    parallel_for(n_pairs, [&](std::size_t i) {
        auto rng = sample_rng(probe.seed, i);
        GridFunction center(y0.begin(), y0.end());
        axpy(0.5 * radius * uniform01(rng), random_direction(grid, rng), center);
        const GridFunction dir = probe.mode == PairMode::Shared ? shared : random_direction(grid, rng);
        const double s = 0.25 * radius * (0.1 + 0.9 * uniform01(rng));
        GridFunction a = center, b = center;
        axpy(s, dir, a);
        axpy(-s, dir, b);
        const ValueSolution sa = solve_value_on(spec, a, base.tg, cfg, &base.triple.u);
        const ValueSolution sb = solve_value_on(spec, b, base.tg, cfg, &base.triple.u);
        RatioRow row;
        row.pair_id = i;
        GridFunction d0 = a;
        axpy(-1.0, b, d0);
        row.norm_dbeta = norm_Y(grid, d0);
        row.norm_ddelta = norm_W(grid, sa.triple.y - sb.triple.y) +
                          control_norm_UC(spec, sa.triple.u - sb.triple.u) +
                          norm_W(grid, sa.triple.p - sb.triple.p);
        row.ratio = row.norm_dbeta > 0.0 ? row.norm_ddelta / row.norm_dbeta : std::numeric_limits<double>::quiet_NaN();
        rows[i] = row;
    });
    return summarize_ratios(std::move(rows));
}

// -- dynamic programming ---------------------------------------------------------

struct DpReport {
    double tau = 0.0;
    double V0 = 0.0;
    double running_cost = 0.0;
    double V_tau = 0.0;
    double gap = 0.0;
    /// Tail of the solution from y(tau) on [T - tau, T]: the truncation error of the comparison.
    double tail_term = 0.0;
    /// Optimizer tolerance times the size of the optimal pair.
    double solver_term = 0.0;
    double budget = 0.0;
};

/// |V(y0) - (running cost on [0, tau] + V(y(tau)))| with tau snapped to the time grid and
/// V(y(tau)) solved on the same grid.
inline DpReport dynamic_programming_check(const ProblemSpec& spec, const ValueSolution& base,
                                          std::span<const double> y0, double tau, const OptimizerConfig& cfg) {
    const TimeGrid& tg = base.tg;
    require(tau > 0.0 && tau <= tg.horizon(), ErrorCode::InvalidArgument, "tau must lie in (0, T]");
    const std::size_t kt = std::max<std::size_t>(1, tg.index_of(tau));
    const double dt = tg.dt();
    const double theta = spec.theta;
    const OptimalTriple& t = base.triple;
    DpReport rep;
    rep.tau = tg.time(kt);
    rep.V0 = base.V;
    double running = 0.0;
    for (std::size_t k = 0; k <= kt; ++k) {
        const double w = k == 0 ? (1.0 - theta) * dt : (k == kt ? theta * dt : dt);
        running += 0.5 * w * state_inner(spec, t.y[k], t.y[k]);
    }
    for (std::size_t k = 0; k < kt; ++k) {
        running += 0.5 * spec.alpha * dt * control_inner(spec, t.u[k], t.u[k]);
    }
    rep.running_cost = running;

    ControlTrajectory warm(tg, spec.control_dim());
    for (std::size_t k = 0; k + kt < tg.steps(); ++k) {
        std::copy(t.u[k + kt].begin(), t.u[k + kt].end(), warm[k].begin());
    }
    const ValueSolution from_tau = solve_value_on(spec, t.y[kt], tg, cfg, &warm);
    rep.V_tau = from_tau.V;
    rep.gap = std::abs(rep.V0 - (rep.running_cost + rep.V_tau));

    const std::size_t k_tail = tg.steps() - kt;
    double tail = 0.0;
    for (std::size_t k = k_tail; k <= tg.steps(); ++k) {
        tail += 0.5 * state_cost_weight(tg, theta, k) * state_inner(spec, from_tau.triple.y[k], from_tau.triple.y[k]);
    }
    for (std::size_t k = k_tail; k < tg.steps(); ++k) {
        tail += 0.5 * spec.alpha * dt * control_inner(spec, from_tau.triple.u[k], from_tau.triple.u[k]);
    }
    rep.tail_term = tail;
    const double scale = cfg.tol_opt * std::max(1.0, norm_Y(spec.grid, y0));
    rep.solver_term = scale * std::max(1.0, control_norm(spec, t.u) + norm_L2Y(spec.grid, t.p));
    rep.budget = rep.tail_term + rep.solver_term;
    return rep;
}

// -- HJB residual and feedback consistency ----------------------------------------

struct HjbReport {
    double residual = 0.0;
    double drift_term = 0.0;
    double state_term = 0.0;
    double control_term = 0.0;
    double coupling_term = 0.0;
    double feedback_consistency = 0.0;
};

/// With g the value gradient and u* = P(-(1/alpha) B* g):
/// |<g, A y0 + F(y0)> + 1/2 |y0|^2 + alpha/2 |u*|^2 + <B* g, u*>|, and |ubar(0) - u*|.
inline HjbReport hjb_residual(const ProblemSpec& spec, const ValueSolution& base, std::span<const double> y0) {
    const std::size_t n = spec.state_dim();
    require_dims(y0.size(), n, "initial state");
    std::vector<double> drift(n);
    detail::eval_rhs_operator(spec, y0, drift);
    GridFunction bg = spec.control.adjoint(base.grad);
    GridFunction ustar = scaled(-1.0 / spec.alpha, bg);
    project_ball(spec, ustar, spec.eta);
    HjbReport rep;
    rep.drift_term = state_inner(spec, base.grad, drift);
    rep.state_term = 0.5 * state_inner(spec, y0, y0);
    rep.control_term = 0.5 * spec.alpha * control_inner(spec, ustar, ustar);
    rep.coupling_term = control_inner(spec, bg, ustar);
    rep.residual = std::abs(rep.drift_term + rep.state_term + rep.control_term + rep.coupling_term);
    GridFunction diff(base.triple.u[0].begin(), base.triple.u[0].end());
    axpy(-1.0, ustar, diff);
    rep.feedback_consistency = control_norm(spec, diff);
    return rep;
}

inline double feedback_consistency(const ProblemSpec& spec, const ValueSolution& base, std::span<const double> y0) {
    return hjb_residual(spec, base, y0).feedback_consistency;
}

}  // namespace parastab
