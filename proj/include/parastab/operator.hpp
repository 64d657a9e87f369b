#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "parastab/grid.hpp"
#include "parastab/linalg.hpp"

namespace parastab {

/// Symmetric tridiagonal operator A = Delta_h + c I with homogeneous Dirichlet data.
class DiscreteOperator {
public:
    DiscreteOperator() = default;

    DiscreteOperator(const SpatialGrid& grid, double shift)
        : grid_(grid), shift_(shift) {
        const std::size_t n = grid.size();
        const double inv_h2 = 1.0 / (grid.h() * grid.h());
        sub_.assign(n, inv_h2);
        sup_.assign(n, inv_h2);
        diag_.assign(n, -2.0 * inv_h2 + shift);
        sub_[0] = 0.0;
        sup_[n - 1] = 0.0;
    }

    std::size_t size() const noexcept { return diag_.size(); }
    double shift() const noexcept { return shift_; }
    const SpatialGrid& grid() const noexcept { return grid_; }

    std::span<const double> sub() const noexcept { return sub_; }
    std::span<const double> diag() const noexcept { return diag_; }
    std::span<const double> sup() const noexcept { return sup_; }

    /// out = A x
    void apply(std::span<const double> x, std::span<double> out) const {
        const std::size_t n = size();
        require_dims(x.size(), n, "DiscreteOperator::apply input");
        require_dims(out.size(), n, "DiscreteOperator::apply output");
        for (std::size_t i = 0; i < n; ++i) {
            double v = diag_[i] * x[i];
            if (i > 0) {
                v += sub_[i] * x[i - 1];
            }
            if (i + 1 < n) {
                v += sup_[i] * x[i + 1];
            }
            out[i] = v;
        }
    }

    GridFunction apply(std::span<const double> x) const {
        GridFunction out(size());
        apply(x, out);
        return out;
    }

    Eigen::MatrixXd to_dense() const {
        const auto n = static_cast<Eigen::Index>(size());
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            a(i, i) = diag_[static_cast<std::size_t>(i)];
            if (i > 0) {
                a(i, i - 1) = sub_[static_cast<std::size_t>(i)];
            }
            if (i + 1 < n) {
                a(i, i + 1) = sup_[static_cast<std::size_t>(i)];
            }
        }
        return a;
    }

private:
    SpatialGrid grid_;
    double shift_ = 0.0;
    std::vector<double> sub_, diag_, sup_;
};

inline DiscreteOperator assemble_operator(const SpatialGrid& grid, double shift) {
    return DiscreteOperator(grid, shift);
}

/// Closed-form eigenvalues of Delta_h + shift on a uniform Dirichlet grid, ascending order.
inline std::vector<double> stencil_eigenvalues(const SpatialGrid& grid, double shift) {
    const std::size_t n = grid.size();
    const double h = grid.h();
    std::vector<double> lambda(n);
    for (std::size_t k = 1; k <= n; ++k) {
        const double s = std::sin(static_cast<double>(k) * M_PI * h / (2.0 * grid.length()));
        lambda[n - k] = shift - 4.0 / (h * h) * s * s;
    }
    return lambda;
}

/// Solves (-Delta_h) x = z; used to realize the discrete dual norm.
inline GridFunction solve_negative_laplacian(const SpatialGrid& grid, std::span<const double> z) {
    const std::size_t n = grid.size();
    require_dims(z.size(), n, "solve_negative_laplacian");
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    std::vector<double> sub(n, -inv_h2), diag(n, 2.0 * inv_h2), sup(n, -inv_h2), work(n);
    GridFunction x(z.begin(), z.end());
    thomas_solve(sub, diag, sup, x, work);
    return x;
}

}  // namespace parastab
