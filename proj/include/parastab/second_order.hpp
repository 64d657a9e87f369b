#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "parastab/optimizer.hpp"
#include "parastab/parallel.hpp"
#include "parastab/sampling.hpp"

namespace parastab {

namespace detail {

/// Lagrangian curvature along the state at node k >= 1:
/// -dt f''(ybar_k) (theta p_{k-1} + (1 - theta) p_k), applied pointwise.
inline void curvature_weights(const ProblemSpec& spec, const StateTrajectory& ybar, const AdjointTrajectory& p,
                              std::size_t k, std::span<double> out) {
    const double dt = ybar.time_grid().dt();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double pm = spec.theta * p[k - 1][i] + (1.0 - spec.theta) * p[k][i];
        out[i] = -dt * spec.nl.d2f(ybar[k][i]) * pm;
    }
}

/// r_k = w_k v_k + curvature_k v_k on nodes k = 1..N.
inline StateTrajectory hessian_source(const ProblemSpec& spec, const StateTrajectory& ybar,
                                      const AdjointTrajectory& p, const StateTrajectory& v) {
    const TimeGrid& tg = ybar.time_grid();
    StateTrajectory r(tg, v.dim());
    std::vector<double> c(v.dim(), 0.0);
    const bool linear = spec.nl.is_linear();
    for (std::size_t k = 1; k <= tg.steps(); ++k) {
        const double w = state_cost_weight(tg, spec.theta, k);
        if (!linear) {
            curvature_weights(spec, ybar, p, k, c);
        }
        for (std::size_t i = 0; i < v.dim(); ++i) {
            r[k][i] = (w + c[i]) * v[k][i];
        }
    }
    return r;
}

}  // namespace detail

/// Reduced Hessian of the discrete cost at the triple applied to w (Riesz form in U).
inline ControlTrajectory hessian_vector(const ProblemSpec& spec, const OptimalTriple& triple,
                                        const ControlTrajectory& w, StateTrajectory* tangent = nullptr) {
    const std::vector<double> zero(spec.state_dim(), 0.0);
    StateTrajectory v = solve_linearized_state(spec, triple.y, zero, &w);
    const AdjointTrajectory q = adjoint_sweep(spec, triple.y, detail::hessian_source(spec, triple.y, triple.p, v));
    ControlTrajectory out = gradient_from_adjoint(spec, w, q);
    if (tangent) {
        *tangent = std::move(v);
    }
    return out;
}

/// sum_k w_k |v_k|_Y^2, the state part of the discrete cost as a squared norm.
inline double state_cost_norm_sq(const ProblemSpec& spec, const StateTrajectory& v) {
    const TimeGrid& tg = v.time_grid();
    double s = 0.0;
    for (std::size_t k = 0; k <= tg.steps(); ++k) {
        s += state_cost_weight(tg, spec.theta, k) * state_inner(spec, v[k], v[k]);
    }
    return s;
}

struct CoercivityReport {
    std::size_t samples = 0;
    /// min <Hw, w> / (|v|^2 + |w|_U^2) over the samples (+inf when there are none).
    double min_rayleigh = std::numeric_limits<double>::infinity();
    /// min <Hw, w> / |w|_U^2.
    double gamma_bar_estimate = std::numeric_limits<double>::infinity();
};

/// Random control trajectory with smooth spatial profiles and unit U norm.
inline ControlTrajectory random_control(const ProblemSpec& spec, const TimeGrid& tg, std::mt19937_64& rng) {
    ControlTrajectory w(tg, spec.control_dim());
    std::normal_distribution<double> normal(0.0, 1.0);
    if (spec.control.is_identity()) {
        const GridFunction a = random_direction(spec.grid, rng);
        const GridFunction b = random_direction(spec.grid, rng);
        const double r = 0.2 + 4.8 * uniform01(rng);
        const double cb = normal(rng);
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double t = tg.time(k);
            for (std::size_t i = 0; i < w.dim(); ++i) {
                w[k][i] = std::exp(-r * t) * a[i] + cb * std::cos(3.0 * t) * b[i];
            }
        }
    } else {
        for (double& x : w.values()) {
            x = normal(rng);
        }
    }
    w *= 1.0 / control_norm(spec, w);
    return w;
}

inline CoercivityReport coercivity_probe(const ProblemSpec& spec, const OptimalTriple& triple, std::size_t n_samples,
                                         std::uint64_t seed = 0) {
    CoercivityReport rep;
    rep.samples = n_samples;
    std::vector<double> rayleigh(n_samples), gamma(n_samples);
    parallel_for(n_samples, [&](std::size_t i) {
        auto rng = sample_rng(seed, i);
        const ControlTrajectory w = random_control(spec, triple.u.time_grid(), rng);
        StateTrajectory v;
        const ControlTrajectory hw = hessian_vector(spec, triple, w, &v);
        const double quad = control_inner(spec, hw, w);
        const double ww = control_inner(spec, w, w);
        rayleigh[i] = quad / (state_cost_norm_sq(spec, v) + ww);
        gamma[i] = quad / ww;
    });
    for (std::size_t i = 0; i < n_samples; ++i) {
        rep.min_rayleigh = std::min(rep.min_rayleigh, rayleigh[i]);
        rep.gamma_bar_estimate = std::min(rep.gamma_bar_estimate, gamma[i]);
    }
    return rep;
}

// -- linearized optimality system ------------------------------------------------

/// Right-hand side of the linearized optimality system:
/// beta1 adjoint source (state nodes), beta2 shift of the control relation,
/// beta3 state source (intervals), beta4 initial-condition shift.
struct KktPerturbation {
    StateTrajectory beta1;
    ControlTrajectory beta2;
    ForcingTrajectory beta3;
    GridFunction beta4;

    static KktPerturbation zero(const ProblemSpec& spec, const TimeGrid& tg) {
        return {StateTrajectory(tg, spec.state_dim()), ControlTrajectory(tg, spec.control_dim()),
                ForcingTrajectory(tg, spec.state_dim()), GridFunction(spec.state_dim(), 0.0)};
    }

    KktPerturbation& operator*=(double s) {
        beta1 *= s;
        beta2 *= s;
        beta3 *= s;
        for (double& v : beta4) {
            v *= s;
        }
        return *this;
    }

    friend KktPerturbation operator-(KktPerturbation a, const KktPerturbation& b) {
        a.beta1 -= b.beta1;
        a.beta2 -= b.beta2;
        a.beta3 -= b.beta3;
        axpy(-1.0, b.beta4, a.beta4);
        return a;
    }

    friend KktPerturbation operator+(KktPerturbation a, const KktPerturbation& b) {
        a.beta1 += b.beta1;
        a.beta2 += b.beta2;
        a.beta3 += b.beta3;
        axpy(1.0, b.beta4, a.beta4);
        return a;
    }
};

/// sqrt(|b1|^2_{L2Y} + |b2|^2_U + |b3|^2_{L2Y} + |b4|^2_Y)
inline double kkt_norm(const ProblemSpec& spec, const KktPerturbation& b) {
    const double n1 = norm_L2Y(spec.grid, b.beta1);
    const double n3 = norm_L2Y(spec.grid, b.beta3);
    const double n2 = control_norm(spec, b.beta2);
    const double n4 = norm_Y(spec.grid, b.beta4);
    return std::sqrt(n1 * n1 + n2 * n2 + n3 * n3 + n4 * n4);
}

struct KktSolution {
    StateTrajectory dy;
    ControlTrajectory du;
    AdjointTrajectory dp;
    int iterations = 0;
    double residual = 0.0;
};

struct KktOptions {
    double tol_kkt = 1e-10;
    int max_iter = 5000;
    /// Samples for the coercivity guard; 0 disables it.
    std::size_t coercivity_samples = 8;
    std::uint64_t seed = 0;
};

namespace detail {

/// Quadratic model whose minimizer over ubar + du in U_ad solves the linearized system:
///   alpha/2 |ubar + du|^2 - <B* pbar + beta2, du> + 1/2 sum_k <(w_k + c_k) dy_k, dy_k>
///   - sum_k w_k <beta1_k, dy_k>,
/// with dy the tangent response to (du, beta3, beta4). The variable is x = ubar + du.
class KktObjective {
public:
    KktObjective(const ProblemSpec& spec, const OptimalTriple& triple, const KktPerturbation& beta)
        : spec_(spec), triple_(triple), beta_(beta) {
        linear_ = adjoint_feedback(spec, triple.p, 1.0);
        linear_ += beta.beta2;
    }

    double value(const ControlTrajectory& x) {
        du_ = x - triple_.u;
        dy_ = solve_linearized_state(spec_, triple_.y, beta_.beta4, &du_, &beta_.beta3);
        const TimeGrid& tg = dy_.time_grid();
        r_ = detail::hessian_source(spec_, triple_.y, triple_.p, dy_);
        double quad = 0.0;
        for (std::size_t k = 1; k <= tg.steps(); ++k) {
            const double w = state_cost_weight(tg, spec_.theta, k);
            quad += 0.5 * state_inner(spec_, r_[k], dy_[k]) - w * state_inner(spec_, beta_.beta1[k], dy_[k]);
            axpy(-w, beta_.beta1[k], r_[k]);
        }
        return 0.5 * spec_.alpha * control_inner(spec_, x, x) - control_inner(spec_, linear_, du_) + quad;
    }

    ControlTrajectory gradient(const ControlTrajectory& x) {
        dp_ = adjoint_sweep(spec_, triple_.y, r_);
        ControlTrajectory g = gradient_from_adjoint(spec_, x, dp_);
        g -= linear_;
        return g;
    }

    ControlTrajectory project(const ControlTrajectory& x) const { return project_control(spec_, x); }
    double inner(const ControlTrajectory& a, const ControlTrajectory& b) const { return control_inner(spec_, a, b); }
    double stationarity(const ControlTrajectory& x, const ControlTrajectory& g) const {
        return natural_residual(spec_, x, g, 1.0);
    }

    const StateTrajectory& dy() const noexcept { return dy_; }
    const AdjointTrajectory& dp() const noexcept { return dp_; }

private:
    const ProblemSpec& spec_;
    const OptimalTriple& triple_;
    const KktPerturbation& beta_;
    ControlTrajectory linear_;
    ControlTrajectory du_;
    StateTrajectory dy_;
    StateTrajectory r_;
    AdjointTrajectory dp_;
};

}  // namespace detail

/// Solves the linearized optimality system at `triple` for the perturbation `beta`.
/// The returned (dy, du, dp) are increments relative to the base triple.
inline KktSolution solve_linearized_kkt(const ProblemSpec& spec, const OptimalTriple& triple,
                                        const KktPerturbation& beta, const KktOptions& opts = {}) {
    const TimeGrid& tg = triple.u.time_grid();
    require(beta.beta1.time_grid() == tg && beta.beta2.time_grid() == tg && beta.beta3.time_grid() == tg,
            ErrorCode::DimensionMismatch, "perturbation on a different time grid");
    require_dims(beta.beta1.dim(), spec.state_dim(), "beta1 dimension");
    require_dims(beta.beta2.dim(), spec.control_dim(), "beta2 dimension");
    require_dims(beta.beta3.dim(), spec.state_dim(), "beta3 dimension");
    require_dims(beta.beta4.size(), spec.state_dim(), "beta4 dimension");
    if (opts.coercivity_samples > 0 && !spec.nl.is_linear()) {
        const CoercivityReport c = coercivity_probe(spec, triple, opts.coercivity_samples, opts.seed);
        require(c.min_rayleigh > 0.0, ErrorCode::SubproblemNonconvex,
                "negative curvature " + std::to_string(c.min_rayleigh) + " in the linearized subproblem");
    }
    detail::KktObjective objective(spec, triple, beta);
    DescentOptions dopts;
    // Relative to the perturbation size, floored so round-off stays below the target.
    dopts.tol = opts.tol_kkt * std::min(1.0, std::max(kkt_norm(spec, beta), 1e-4));
    dopts.max_iter = opts.max_iter;
    dopts.initial_step = 1.0 / spec.alpha;
    DescentResult res = projected_descent(objective, triple.u, dopts);
    if (!res.converged) {
        throw Error(ErrorCode::MaxIterations,
                    "linearized system stopped at residual " + std::to_string(res.residual));
    }
    // Refresh the adjoint at the accepted iterate.
    objective.value(res.u);
    objective.gradient(res.u);
    return {objective.dy(), res.u - triple.u, objective.dp(), res.iterations, res.residual};
}

/// |dy|_W + |du|_U + |dp|_W
inline double kkt_solution_norm(const ProblemSpec& spec, const StateTrajectory& dy, const ControlTrajectory& du,
                                const AdjointTrajectory& dp) {
    return norm_W(spec.grid, dy) + control_norm(spec, du) + norm_W(spec.grid, dp);
}

enum class PairMode { Shared, Independent };

struct RatioRow {
    std::size_t pair_id = 0;
    double norm_dbeta = 0.0;
    double norm_ddelta = 0.0;
    /// NaN for excluded pairs (identical inputs).
    double ratio = 0.0;
};

struct RatioTable {
    std::vector<RatioRow> rows;
    double max_ratio = 0.0;
    double min_ratio = 0.0;
    std::size_t excluded = 0;
};

inline RatioTable summarize_ratios(std::vector<RatioRow> rows) {
    RatioTable t;
    t.rows = std::move(rows);
    t.min_ratio = std::numeric_limits<double>::infinity();
    for (const auto& r : t.rows) {
        if (std::isnan(r.ratio)) {
            ++t.excluded;
            continue;
        }
        t.max_ratio = std::max(t.max_ratio, r.ratio);
        t.min_ratio = std::min(t.min_ratio, r.ratio);
    }
    if (t.excluded == t.rows.size()) {
        t.min_ratio = 0.0;
    }
    return t;
}

/// Random perturbation with unit kkt_norm.
inline KktPerturbation random_perturbation(const ProblemSpec& spec, const TimeGrid& tg, std::mt19937_64& rng) {
    KktPerturbation b = KktPerturbation::zero(spec, tg);
    b.beta1 = random_trajectory<StateTag>(spec.grid, tg, rng);
    // The node-0 adjoint source never enters the system.
    std::fill(b.beta1[0].begin(), b.beta1[0].end(), 0.0);
    b.beta2 = random_control(spec, tg, rng);
    b.beta3 = random_trajectory<ForcingTag>(spec.grid, tg, rng);
    b.beta4 = random_direction(spec.grid, rng);
    b *= 1.0 / kkt_norm(spec, b);
    return b;
}

struct ProbeOptions {
    std::uint64_t seed = 0;
    PairMode mode = PairMode::Shared;
};

/// Pairs (beta, beta_hat) in the ball of the given radius: beta = c + s d / 2, beta_hat = c - s d / 2
/// with |c| <= radius / 2 and 0 < s <= radius / 2. In Shared mode every pair uses the same unit
/// direction d, otherwise d is drawn per pair.
inline RatioTable strong_regularity_probe(const ProblemSpec& spec, const OptimalTriple& triple, std::size_t n_pairs,
                                          double radius, const ProbeOptions& probe = {},
                                          const KktOptions& opts = {}) {
    require(radius > 0.0, ErrorCode::InvalidArgument, "radius must be > 0");
    const TimeGrid& tg = triple.u.time_grid();
    KktOptions inner = opts;
    if (inner.coercivity_samples > 0 && !spec.nl.is_linear()) {
        const CoercivityReport c = coercivity_probe(spec, triple, inner.coercivity_samples, inner.seed);
        require(c.min_rayleigh > 0.0, ErrorCode::SubproblemNonconvex,
                "negative curvature " + std::to_string(c.min_rayleigh) + " in the linearized subproblem");
    }
    inner.coercivity_samples = 0;
    auto shared_rng = sample_rng(probe.seed, std::numeric_limits<std::uint64_t>::max());
    const KktPerturbation shared = random_perturbation(spec, tg, shared_rng);
    std::vector<RatioRow> rows(n_pairs);
    parallel_for(n_pairs, [&](std::size_t i) {
        auto rng = sample_rng(probe.seed, i);
        KktPerturbation center = random_perturbation(spec, tg, rng);
        center *= 0.5 * radius * uniform01(rng);
        KktPerturbation dir = probe.mode == PairMode::Shared ? shared : random_perturbation(spec, tg, rng);
        dir *= 0.25 * radius * (0.1 + 0.9 * uniform01(rng));
        const KktPerturbation b1 = center + dir;
        const KktPerturbation b2 = center - dir;
        const KktSolution s1 = solve_linearized_kkt(spec, triple, b1, inner);
        const KktSolution s2 = solve_linearized_kkt(spec, triple, b2, inner);
        RatioRow row;
        row.pair_id = i;
        row.norm_dbeta = kkt_norm(spec, b1 - b2);
        row.norm_ddelta = kkt_solution_norm(spec, s1.dy - s2.dy, s1.du - s2.du, s1.dp - s2.dp);
        row.ratio = row.norm_dbeta > 0.0 ? row.norm_ddelta / row.norm_dbeta : std::numeric_limits<double>::quiet_NaN();
        rows[i] = row;
    });
    return summarize_ratios(std::move(rows));
}

}  // namespace parastab
