#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

#include "parastab/dense.hpp"
#include "parastab/norms.hpp"
#include "parastab/optimizer.hpp"
#include "parastab/parallel.hpp"
#include "parastab/riccati.hpp"
#include "parastab/sampling.hpp"

namespace parastab {

enum class GainMethod { Zero, Shift, Riccati };

inline constexpr std::string_view to_string(GainMethod m) {
    switch (m) {
        case GainMethod::Zero: return "zero";
        case GainMethod::Shift: return "shift";
        case GainMethod::Riccati: return "riccati";
    }
    return "zero";
}

inline std::optional<GainMethod> parse_gain_method(std::string_view name) {
    if (name == "zero") return GainMethod::Zero;
    if (name == "shift") return GainMethod::Shift;
    if (name == "riccati") return GainMethod::Riccati;
    return std::nullopt;
}

/// State feedback u = -K y with K : state dofs -> control dofs.
struct FeedbackGain {
    Eigen::MatrixXd K;
    GainMethod method = GainMethod::Zero;
    /// Spectral abscissa of A - B K, negative by construction.
    double closed_loop_abscissa = 0.0;
};

/// |K|_{L(Y, U)} in the weighted pairings.
inline double gain_norm(const ProblemSpec& spec, const FeedbackGain& gain) {
    return std::sqrt(spec.control.weight() / spec.h()) * spectral_norm(gain.K);
}

inline Eigen::MatrixXd closed_loop_matrix(const ProblemSpec& spec, const Eigen::MatrixXd& k) {
    return spec.op.to_dense() - spec.control.to_dense() * k;
}

inline FeedbackGain build_feedback_gain(const ProblemSpec& spec, GainMethod method, double margin = 0.5) {
    spec.validate();
    const Eigen::MatrixXd a = spec.op.to_dense();
    const Eigen::MatrixXd b = spec.control.to_dense();
    FeedbackGain gain;
    gain.method = method;
    switch (method) {
        case GainMethod::Zero:
            gain.K = Eigen::MatrixXd::Zero(b.cols(), a.rows());
            break;
        case GainMethod::Shift:
            gain.K = (spectral_abscissa(a) + margin) * pseudo_inverse(b);
            break;
        case GainMethod::Riccati:
            gain.K = solve_riccati(spec).K;
            break;
    }
    gain.closed_loop_abscissa = spectral_abscissa(a - b * gain.K);
    require(gain.closed_loop_abscissa < 0.0, ErrorCode::NotStabilizable,
            std::string("method ") + std::string(to_string(method)) + " leaves abscissa " +
                std::to_string(gain.closed_loop_abscissa));
    return gain;
}

namespace detail {

/// Theta-scheme integration of y' = M y + F(y) + f with dense M.
/// The nonlinearity is skipped when `with_nonlinearity` is false.
inline StateTrajectory integrate_dense(const ProblemSpec& spec, const Eigen::MatrixXd& m, std::span<const double> y0,
                                       const TimeGrid& tg, const ForcingTrajectory* forcing, bool with_nonlinearity) {
    const Eigen::Index n = m.rows();
    require_dims(y0.size(), static_cast<std::size_t>(n), "initial state");
    const double dt = tg.dt();
    const double theta = spec.theta;
    const bool nonlinear = with_nonlinearity && !spec.nl.is_linear();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    const Eigen::PartialPivLU<Eigen::MatrixXd> linear_lu(eye - dt * theta * m);
    StateTrajectory y(tg, static_cast<std::size_t>(n));
    std::copy(y0.begin(), y0.end(), y[0].begin());
    Eigen::VectorXd rhs(n), z(n), fz(n), res(n);
    auto eval_f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        for (Eigen::Index i = 0; i < n; ++i) {
            out(i) = spec.nl.f(x(i));
        }
    };
    // A root counts only on the branch continuing the state: sym(I - dt theta (M + F'(z))) > 0.
    auto on_branch = [&](const Eigen::VectorXd& x) {
        Eigen::MatrixXd j = eye - dt * theta * m;
        for (Eigen::Index i = 0; i < n; ++i) {
            j(i, i) -= dt * theta * spec.nl.df(x(i));
        }
        const Eigen::MatrixXd sym = 0.5 * (j + j.transpose());
        return Eigen::LLT<Eigen::MatrixXd>(sym).info() == Eigen::Success;
    };
    for (std::size_t k = 0; k < tg.steps(); ++k) {
        const Eigen::Map<const Eigen::VectorXd> yk(y[k].data(), n);
        rhs = yk;
        if (theta < 1.0) {
            rhs += dt * (1.0 - theta) * (m * yk);
            if (nonlinear) {
                eval_f(yk, fz);
                rhs += dt * (1.0 - theta) * fz;
            }
        }
        if (forcing) {
            rhs += dt * Eigen::Map<const Eigen::VectorXd>((*forcing)[k].data(), n);
        }
        if (!nonlinear) {
            z = linear_lu.solve(rhs);
        } else {
            z = yk;
            bool done = false;
            for (int it = 0; it < spec.step.max_newton && !done; ++it) {
                eval_f(z, fz);
                res = z - dt * theta * (m * z + fz) - rhs;
                Eigen::MatrixXd jac = eye - dt * theta * m;
                for (Eigen::Index i = 0; i < n; ++i) {
                    jac(i, i) -= dt * theta * spec.nl.df(z(i));
                }
                const Eigen::VectorXd delta = jac.partialPivLu().solve(-res);
                z += delta;
                if (!z.allFinite()) {
                    break;
                }
                done = delta.lpNorm<Eigen::Infinity>() <= spec.step.tol_step * z.lpNorm<Eigen::Infinity>();
            }
            done = done && on_branch(z);
            if (!done) {
                z = yk;
                for (int it = 0; it < spec.step.max_fixed_point && !done; ++it) {
                    eval_f(z, fz);
                    const Eigen::VectorXd next = linear_lu.solve(rhs + dt * theta * fz);
                    const double change = (next - z).lpNorm<Eigen::Infinity>();
                    z = next;
                    if (!z.allFinite()) {
                        break;
                    }
                    done = change <= spec.step.tol_step * z.lpNorm<Eigen::Infinity>();
                }
                done = done && on_branch(z);
            }
            require(done, ErrorCode::NonlinearStepDivergence,
                    "closed-loop step " + std::to_string(k) + " did not converge");
        }
        std::copy(z.data(), z.data() + n, y[k + 1].begin());
    }
    return y;
}

}  // namespace detail

struct ClosedLoopResult {
    StateTrajectory y;
    ControlTrajectory u;
    bool admissible = true;
    double sup_control = 0.0;
    double cost = 0.0;
    double w_norm = 0.0;
};

/// Simulates y' = (A - B K) y + F(y); u_k = -K (theta y_{k+1} + (1 - theta) y_k) is the
/// piecewise-constant control that reproduces the same trajectory in the open-loop scheme.
inline ClosedLoopResult closed_loop_simulate(const ProblemSpec& spec, std::span<const double> y0,
                                             const FeedbackGain& gain, const TimeGrid& tg) {
    spec.validate();
    require(gain.K.rows() == static_cast<Eigen::Index>(spec.control_dim()) &&
                gain.K.cols() == static_cast<Eigen::Index>(spec.state_dim()),
            ErrorCode::DimensionMismatch, "gain dimensions");
    require(gain.closed_loop_abscissa < 0.0, ErrorCode::NotStabilizable, "gain is not stabilizing");
    ClosedLoopResult out;
    out.y = detail::integrate_dense(spec, closed_loop_matrix(spec, gain.K), y0, tg, nullptr, true);
    out.u = ControlTrajectory(tg, spec.control_dim());
    const Eigen::Index n = static_cast<Eigen::Index>(spec.state_dim());
    for (std::size_t k = 0; k < tg.steps(); ++k) {
        const Eigen::VectorXd mid = spec.theta * Eigen::Map<const Eigen::VectorXd>(out.y[k + 1].data(), n) +
                                    (1.0 - spec.theta) * Eigen::Map<const Eigen::VectorXd>(out.y[k].data(), n);
        const Eigen::VectorXd uk = -(gain.K * mid);
        std::copy(uk.data(), uk.data() + uk.size(), out.u[k].begin());
    }
    out.sup_control = control_sup_norm(spec, out.u);
    out.admissible = out.sup_control <= spec.eta;
    out.cost = cost_of(spec, out.y, out.u);
    out.w_norm = norm_W(spec.grid, out.y);
    return out;
}

// -- smallness radius ----------------------------------------------------------

struct SmallnessOptions {
    std::size_t n_samples = 64;
    /// Ball radius for the nonlinearity slope C.
    double delta = 0.1;
    std::uint64_t seed = 0;
};

struct SmallnessSamples {
    std::size_t C = 0;
    std::size_t M_K = 0;
    std::size_t norm_embed = 0;
};

/// Sampled lower bounds of the constants in the smallness radius, and the radii built from them.
/// Unbounded radii are +inf.
struct SmallnessReport {
    double C = 0.0;
    double M_K = 0.0;
    double norm_K = 0.0;
    double norm_embed = 0.0;
    double radius_stability = std::numeric_limits<double>::infinity();
    double radius_admissibility = std::numeric_limits<double>::infinity();
    double radius = std::numeric_limits<double>::infinity();
    SmallnessSamples samples;
};

namespace detail {

template <class Tag>
double l2_vdual(const SpatialGrid& grid, const Trajectory<Tag>& traj) {
    return std::sqrt(time_integral_sq(traj, [&](auto row) { return norm_Vdual(grid, row); }));
}

inline StateTrajectory apply_nonlinearity(const ProblemSpec& spec, const StateTrajectory& y) {
    StateTrajectory out(y.time_grid(), y.dim());
    for (std::size_t k = 0; k < y.size(); ++k) {
        for (std::size_t i = 0; i < y.dim(); ++i) {
            out[k][i] = spec.nl.f(y[k][i]);
        }
    }
    return out;
}

}  // namespace detail

inline SmallnessReport estimate_smallness(const ProblemSpec& spec, const FeedbackGain& gain, const TimeGrid& tg,
                                          const SmallnessOptions& opts = {}) {
    spec.validate();
    require(opts.delta > 0.0 && opts.delta <= 1.0, ErrorCode::InvalidArgument, "delta must lie in (0, 1]");
    const SpatialGrid& grid = spec.grid;
    SmallnessReport rep;
    rep.norm_K = gain_norm(spec, gain);

    // C: |F(y1) - F(y2)|_{L2(V*)} <= delta C |y1 - y2|_W on the delta-ball of W.
    if (!spec.nl.is_linear()) {
        std::vector<double> ratios(opts.n_samples, 0.0);
        parallel_for(opts.n_samples, [&](std::size_t i) {
            auto rng = sample_rng(opts.seed, i);
            StateTrajectory y1 = random_trajectory<StateTag>(grid, tg, rng);
            StateTrajectory y2 = random_trajectory<StateTag>(grid, tg, rng);
            if (i % 2 == 1) {
                // Nearby pair: the slope is largest along short chords.
                y2 = StateTrajectory::combine(y1, 0.05 * norm_W(grid, y1) / norm_W(grid, y2), y2);
            }
            y1 *= opts.delta * (0.2 + 0.8 * uniform01(rng)) / norm_W(grid, y1);
            y2 *= opts.delta * (0.2 + 0.8 * uniform01(rng)) / norm_W(grid, y2);
            const double dist = norm_W(grid, y1 - y2);
            if (dist > 0.0) {
                const StateTrajectory df = detail::apply_nonlinearity(spec, y1) - detail::apply_nonlinearity(spec, y2);
                ratios[i] = detail::l2_vdual(grid, df) / (opts.delta * dist);
            }
        });
        rep.C = ratios.empty() ? 0.0 : *std::max_element(ratios.begin(), ratios.end());
        rep.samples.C = opts.n_samples;
    }

    // M_K: |y|_W <= M_K (|y0|_Y + |f|_{L2(V*)}) for y' = (A - BK) y + f; the same
    // trajectories give the embedding constant sup_t |y(t)|_Y / |y|_W.
    const Eigen::MatrixXd m = closed_loop_matrix(spec, gain.K);
    const std::size_t n_modes = std::min<std::size_t>(grid.size(), 8);
    const std::size_t total = n_modes + opts.n_samples;
    std::vector<double> gains(total, 0.0), embeds(total, 0.0);
    parallel_for(total, [&](std::size_t i) {
        GridFunction y0;
        std::optional<ForcingTrajectory> f;
        double input = 0.0;
        if (i < n_modes) {
            y0 = eigenmode(grid, i + 1);
            input = norm_Y(grid, y0);
        } else {
            auto rng = sample_rng(opts.seed ^ 0x9e3779b97f4a7c15ULL, i);
            y0 = random_direction(grid, rng);
            f = random_trajectory<ForcingTag>(grid, tg, rng);
            *f *= 10.0 * uniform01(rng);
            input = norm_Y(grid, y0) + detail::l2_vdual(grid, *f);
        }
        const StateTrajectory y = detail::integrate_dense(spec, m, y0, tg, f ? &*f : nullptr, false);
        const double w = norm_W(grid, y);
        gains[i] = w / input;
        embeds[i] = w > 0.0 ? norm_sup_Y(grid, y) / w : 0.0;
    });
    rep.M_K = *std::max_element(gains.begin(), gains.end());
    rep.norm_embed = *std::max_element(embeds.begin(), embeds.end());
    rep.samples.M_K = total;
    rep.samples.norm_embed = total;

    if (rep.C > 0.0) {
        rep.radius_stability = 1.0 / (4.0 * rep.C * rep.M_K * rep.M_K);
    }
    const double denom = 2.0 * rep.M_K * rep.norm_K * rep.norm_embed;
    if (!spec.unconstrained() && denom > 0.0) {
        rep.radius_admissibility = spec.eta / denom;
    }
    rep.radius = std::min(rep.radius_stability, rep.radius_admissibility);
    return rep;
}

}  // namespace parastab
