#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>

#include <Eigen/Dense>

#include "parastab/nonlinearity.hpp"
#include "parastab/operator.hpp"
#include "parastab/trajectory.hpp"

namespace parastab {

/// Control operator B : R^m -> R^n with the control space carrying the inner product
/// <u, v> = weight * sum u_j v_j. The state space uses <y, z> = h * sum y_i z_i.
/// The adjoint B* is taken with respect to these two weighted inner products.
class ControlOperator {
public:
    ControlOperator() = default;

    /// B = I on the state dofs; the control space is a copy of the state space.
    static ControlOperator identity(const SpatialGrid& grid) {
        ControlOperator b;
        b.n_ = grid.size();
        b.m_ = grid.size();
        b.state_weight_ = grid.h();
        b.weight_ = grid.h();
        return b;
    }

    /// Dense n x m matrix with control-space weight `weight`.
    static ControlOperator dense(const SpatialGrid& grid, Eigen::MatrixXd matrix, double weight) {
        require(matrix.rows() == static_cast<Eigen::Index>(grid.size()), ErrorCode::DimensionMismatch,
                "control matrix must have n_interior rows");
        require(matrix.cols() >= 1, ErrorCode::InvalidArgument, "control matrix needs at least one column");
        require(weight > 0.0, ErrorCode::InvalidArgument, "control weight must be positive");
        ControlOperator b;
        b.n_ = grid.size();
        b.m_ = static_cast<std::size_t>(matrix.cols());
        b.state_weight_ = grid.h();
        b.weight_ = weight;
        b.matrix_ = std::move(matrix);
        return b;
    }

    bool is_identity() const noexcept { return !matrix_.has_value(); }
    std::size_t state_dim() const noexcept { return n_; }
    std::size_t control_dim() const noexcept { return m_; }
    double weight() const noexcept { return weight_; }
    double state_weight() const noexcept { return state_weight_; }

    /// y += scale * B u
    void apply_add(std::span<const double> u, double scale, std::span<double> y) const {
        require_dims(u.size(), m_, "B input");
        require_dims(y.size(), n_, "B output");
        if (!matrix_) {
            axpy(scale, u, y);
            return;
        }
        const auto& b = *matrix_;
        for (std::size_t i = 0; i < n_; ++i) {
            double v = 0.0;
            for (std::size_t j = 0; j < m_; ++j) {
                v += b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * u[j];
            }
            y[i] += scale * v;
        }
    }

    /// out = B* y
    void adjoint(std::span<const double> y, std::span<double> out) const {
        require_dims(y.size(), n_, "B* input");
        require_dims(out.size(), m_, "B* output");
        if (!matrix_) {
            std::copy(y.begin(), y.end(), out.begin());
            return;
        }
        const auto& b = *matrix_;
        const double ratio = state_weight_ / weight_;
        for (std::size_t j = 0; j < m_; ++j) {
            double v = 0.0;
            for (std::size_t i = 0; i < n_; ++i) {
                v += b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * y[i];
            }
            out[j] = ratio * v;
        }
    }

    GridFunction adjoint(std::span<const double> y) const {
        GridFunction out(m_);
        adjoint(y, out);
        return out;
    }

    Eigen::MatrixXd to_dense() const {
        if (matrix_) {
            return *matrix_;
        }
        return Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(m_));
    }

private:
    std::size_t n_ = 0;
    std::size_t m_ = 0;
    double state_weight_ = 1.0;
    double weight_ = 1.0;
    std::optional<Eigen::MatrixXd> matrix_;
};

/// Per-step nonlinear solve controls for the implicit stepping.
struct StepOptions {
    double tol_step = 1e-12;
    int max_newton = 25;
    int max_fixed_point = 200;
};

/// Discrete instance of the stabilization problem: operator, nonlinearity, control
/// operator, cost weight alpha and pointwise control-norm bound eta (may be +inf).
struct ProblemSpec {
    SpatialGrid grid;
    DiscreteOperator op;
    Nonlinearity nl;
    ControlOperator control;
    double alpha = 1.0;
    double eta = std::numeric_limits<double>::infinity();
    /// 1 = implicit Euler, 0.5 = Crank-Nicolson.
    double theta = 1.0;
    StepOptions step;

    std::size_t state_dim() const noexcept { return grid.size(); }
    std::size_t control_dim() const noexcept { return control.control_dim(); }
    double h() const noexcept { return grid.h(); }
    bool unconstrained() const noexcept { return std::isinf(eta); }

    void validate() const {
        require(alpha > 0.0 && std::isfinite(alpha), ErrorCode::InvalidArgument, "alpha must be > 0");
        require(eta > 0.0, ErrorCode::InvalidArgument, "eta must be > 0");
        require(theta >= 0.5 && theta <= 1.0, ErrorCode::InvalidArgument, "theta must lie in [0.5, 1]");
        require_dims(op.size(), grid.size(), "operator size");
        require_dims(control.state_dim(), grid.size(), "control operator rows");
        require(step.tol_step > 0.0 && step.max_newton > 0, ErrorCode::InvalidArgument,
                "step tolerances must be positive");
    }
};

inline ProblemSpec make_problem(const SpatialGrid& grid, double shift, Nonlinearity nl, double alpha,
                                double eta, double theta = 1.0) {
    ProblemSpec spec{grid, assemble_operator(grid, shift), nl, ControlOperator::identity(grid),
                     alpha, eta, theta, {}};
    spec.validate();
    return spec;
}

// -- weighted inner products -------------------------------------------------

inline double state_inner(const ProblemSpec& spec, std::span<const double> a, std::span<const double> b) {
    return spec.h() * dot(a, b);
}

inline double state_norm(const ProblemSpec& spec, std::span<const double> a) {
    return std::sqrt(state_inner(spec, a, a));
}

inline double control_inner(const ProblemSpec& spec, std::span<const double> a, std::span<const double> b) {
    return spec.control.weight() * dot(a, b);
}

inline double control_norm(const ProblemSpec& spec, std::span<const double> a) {
    return std::sqrt(control_inner(spec, a, a));
}

/// <u, v>_U = sum_k dt <u_k, v_k>
inline double control_inner(const ProblemSpec& spec, const ControlTrajectory& u, const ControlTrajectory& v) {
    u.check_compatible(v);
    return u.time_grid().dt() * control_inner(spec, u.values(), v.values());
}

inline double control_norm(const ProblemSpec& spec, const ControlTrajectory& u) {
    return std::sqrt(control_inner(spec, u, u));
}

/// Quadrature weights for the state cost that make the theta scheme's discrete adjoint exact:
/// (1 - theta) dt at t_0, dt inside, theta dt at t_N.
inline double state_cost_weight(const TimeGrid& tg, double theta, std::size_t k) {
    const double dt = tg.dt();
    if (k == 0) {
        return (1.0 - theta) * dt;
    }
    if (k == tg.steps()) {
        return theta * dt;
    }
    return dt;
}

}  // namespace parastab
