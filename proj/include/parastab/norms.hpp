#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "parastab/problem.hpp"

namespace parastab {

// Discrete surrogates of the Gelfand triple V = H^1_0 in Y = L^2 in V*:
//   |y|_Y^2  = h sum y_i^2
//   |y|_V^2  = h sum_{i=0}^{n} ((y_{i+1} - y_i)/h)^2     (Dirichlet zeros at both ends)
//   |z|_V*^2 = < z, (-Delta_h)^{-1} z >_Y
// Time integrals of node values use the trapezoidal rule.

inline double norm_Y(const SpatialGrid& grid, std::span<const double> y) {
    return std::sqrt(grid.h() * dot(y, y));
}

inline double norm_V(const SpatialGrid& grid, std::span<const double> y) {
    require_dims(y.size(), grid.size(), "norm_V");
    const double h = grid.h();
    double s = 0.0;
    double prev = 0.0;
    for (double v : y) {
        s += (v - prev) * (v - prev);
        prev = v;
    }
    s += prev * prev;
    return std::sqrt(s / h);
}

inline double norm_Vdual(const SpatialGrid& grid, std::span<const double> z) {
    const GridFunction x = solve_negative_laplacian(grid, z);
    return std::sqrt(std::max(0.0, grid.h() * dot(x, z)));
}

namespace detail {
template <class Tag, class F>
double time_integral_sq(const Trajectory<Tag>& traj, F&& pointwise_norm) {
    const double dt = traj.time_grid().dt();
    double s = 0.0;
    const std::size_t rows = traj.size();
    for (std::size_t k = 0; k < rows; ++k) {
        const double v = pointwise_norm(traj[k]);
        double w = dt;
        if constexpr (Tag::layout == TimeLayout::Nodes) {
            if (k == 0 || k + 1 == rows) {
                w = 0.5 * dt;
            }
        }
        s += w * v * v;
    }
    return s;
}
}  // namespace detail

/// |y(t_k)|_Y
template <class Tag>
double norm_Y_at(const SpatialGrid& grid, const Trajectory<Tag>& traj, std::size_t k) {
    return norm_Y(grid, traj[k]);
}

/// |y|_{L^2(I;Y)}
template <class Tag>
double norm_L2Y(const SpatialGrid& grid, const Trajectory<Tag>& traj) {
    return std::sqrt(detail::time_integral_sq(traj, [&](auto row) { return norm_Y(grid, row); }));
}

/// |y|_{L^2(I;V)}
template <class Tag>
double norm_L2V(const SpatialGrid& grid, const Trajectory<Tag>& traj) {
    return std::sqrt(detail::time_integral_sq(traj, [&](auto row) { return norm_V(grid, row); }));
}

/// |D_t y|_{L^2(I;V*)} from forward differences on each interval.
template <class Tag>
    requires(Tag::layout == TimeLayout::Nodes)
double norm_dt_L2Vdual(const SpatialGrid& grid, const Trajectory<Tag>& traj) {
    const double dt = traj.time_grid().dt();
    std::vector<double> diff(traj.dim());
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
        for (std::size_t i = 0; i < diff.size(); ++i) {
            diff[i] = (traj[k + 1][i] - traj[k][i]) / dt;
        }
        const double v = norm_Vdual(grid, diff);
        s += dt * v * v;
    }
    return std::sqrt(s);
}

/// W_infinity surrogate: sqrt(|y|^2_{L^2(I;V)} + |D_t y|^2_{L^2(I;V*)}).
template <class Tag>
    requires(Tag::layout == TimeLayout::Nodes)
double norm_W(const SpatialGrid& grid, const Trajectory<Tag>& traj) {
    const double a = norm_L2V(grid, traj);
    const double b = norm_dt_L2Vdual(grid, traj);
    return std::sqrt(a * a + b * b);
}

/// max_k |y(t_k)|_Y, the C(I;Y) norm.
template <class Tag>
double norm_sup_Y(const SpatialGrid& grid, const Trajectory<Tag>& traj) {
    double m = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        m = std::max(m, norm_Y(grid, traj[k]));
    }
    return m;
}

enum class NormKind { L2_Omega_at_t, L2IY, L2IV, Winf_surrogate };

/// Dispatch over the norm kinds; `k` selects the time node for L2_Omega_at_t.
template <class Tag>
    requires(Tag::layout == TimeLayout::Nodes)
double norms(const SpatialGrid& grid, const Trajectory<Tag>& traj, NormKind kind, std::size_t k = 0) {
    switch (kind) {
        case NormKind::L2_Omega_at_t: return norm_Y_at(grid, traj, k);
        case NormKind::L2IY: return norm_L2Y(grid, traj);
        case NormKind::L2IV: return norm_L2V(grid, traj);
        case NormKind::Winf_surrogate: return norm_W(grid, traj);
    }
    return 0.0;
}

/// Control norms: |u|_U and sup_k |u_k|.
inline double control_sup_norm(const ProblemSpec& spec, const ControlTrajectory& u) {
    double m = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        m = std::max(m, control_norm(spec, u[k]));
    }
    return m;
}

/// |u|_{U cap C(I;U)} = |u|_U + sup_k |u_k|.
inline double control_norm_UC(const ProblemSpec& spec, const ControlTrajectory& u) {
    return control_norm(spec, u) + control_sup_norm(spec, u);
}

// -- tail decay fit ------------------------------------------------------------

struct TailFit {
    double C = 0.0;
    double omega = 0.0;
    double rms_fit_error = 0.0;
    std::size_t points = 0;
};

/// Least-squares fit of log |y(t)|_Y ~ log C - omega t over nodes with t >= t_a.
/// Throws FitUnreliable when a windowed norm falls to the round-off floor
/// (1e-14 times the largest norm on the trajectory) or when fewer than two nodes remain.
template <class Tag>
    requires(Tag::layout == TimeLayout::Nodes)
TailFit tail_decay_fit(const SpatialGrid& grid, const Trajectory<Tag>& traj, double t_a) {
    const double peak = norm_sup_Y(grid, traj);
    const double floor = std::max(1e-14 * peak, std::numeric_limits<double>::min());
    double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
    std::size_t count = 0;
    std::vector<std::pair<double, double>> pts;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double t = traj.time(k);
        if (t + 1e-12 * traj.time_grid().horizon() < t_a) {
            continue;
        }
        const double v = norm_Y(grid, traj[k]);
        if (!(v > floor)) {
            throw Error(ErrorCode::FitUnreliable, "windowed norm below the round-off floor");
        }
        const double l = std::log(v);
        pts.emplace_back(t, l);
        st += t;
        sl += l;
        stt += t * t;
        stl += t * l;
        ++count;
    }
    require(count >= 2, ErrorCode::FitUnreliable, "tail window needs at least two nodes");
    const double nn = static_cast<double>(count);
    const double denom = nn * stt - st * st;
    require(denom > 0.0, ErrorCode::FitUnreliable, "degenerate tail window");
    const double slope = (nn * stl - st * sl) / denom;
    const double intercept = (sl - slope * st) / nn;
    double sq = 0.0;
    for (const auto& [t, l] : pts) {
        const double e = l - (intercept + slope * t);
        sq += e * e;
    }
    return {std::exp(intercept), -slope, std::sqrt(sq / nn), count};
}

}  // namespace parastab
