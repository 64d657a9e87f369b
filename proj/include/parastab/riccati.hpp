#pragma once

#include <cmath>
#include <optional>

#include <Eigen/Dense>

#include "parastab/dense.hpp"
#include "parastab/problem.hpp"

namespace parastab {

/// Stabilizing solution of A^T P + P A - (1/alpha) P B B^T P + weight I = 0 and the
/// gain K = (1/alpha) B^T P.
struct RiccatiSolution {
    Eigen::MatrixXd P;
    Eigen::MatrixXd K;
    int iterations = 0;
    double residual = 0.0;
};

struct RiccatiOptions {
    double tol = 1e-10;
    int max_iter = 60;
    double margin = 0.5;
};

inline double riccati_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double alpha, double weight,
                               const Eigen::MatrixXd& p) {
    const Eigen::Index n = a.rows();
    const Eigen::MatrixXd r = a.transpose() * p + p * a - (p * b) * (b.transpose() * p) / alpha +
                              weight * Eigen::MatrixXd::Identity(n, n);
    return r.norm();
}

/// Newton-Kleinman iteration. `k0` must stabilize A - B k0; when absent, K = 0 is used for
/// stable A and K = kappa B^+ (kappa = abscissa(A) + margin) otherwise.
inline RiccatiSolution solve_riccati(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double alpha, double weight,
                                     std::optional<Eigen::MatrixXd> k0 = std::nullopt,
                                     const RiccatiOptions& opts = {}) {
    const Eigen::Index n = a.rows();
    require(a.cols() == n && b.rows() == n, ErrorCode::DimensionMismatch, "Riccati dimensions");
    require(alpha > 0.0, ErrorCode::InvalidArgument, "alpha must be > 0");
    require(weight >= 0.0, ErrorCode::InvalidArgument, "state weight must be >= 0");
    Eigen::MatrixXd k;
    if (k0) {
        k = *k0;
    } else {
        const double abscissa = spectral_abscissa(a);
        k = abscissa < 0.0 ? Eigen::MatrixXd::Zero(b.cols(), n) : Eigen::MatrixXd((abscissa + opts.margin) * pseudo_inverse(b));
    }
    require(k.rows() == b.cols() && k.cols() == n, ErrorCode::DimensionMismatch, "initial gain dimensions");
    require(spectral_abscissa(a - b * k) < 0.0, ErrorCode::NotStabilizable, "no stabilizing initial gain");

    const Eigen::MatrixXd m = weight * Eigen::MatrixXd::Identity(n, n);
    const double target = opts.tol * std::max(1.0, m.norm());
    RiccatiSolution sol;
    sol.P = Eigen::MatrixXd::Zero(n, n);
    double best = std::numeric_limits<double>::infinity();
    int stalled = 0;
    bool polish = false;
    for (int it = 1; it <= opts.max_iter; ++it) {
        const Eigen::MatrixXd closed = a - b * k;
        const Eigen::MatrixXd p = solve_lyapunov(closed, m + alpha * k.transpose() * k);
        k = b.transpose() * p / alpha;
        const double res = riccati_residual(a, b, alpha, weight, p);
        sol.iterations = it;
        if (res < best) {
            best = res;
            sol.P = p;
            sol.K = k;
            sol.residual = res;
            stalled = 0;
        } else if (++stalled >= 3) {
            break;
        }
        if (res <= target) {
            // one extra step takes the quadratic convergence down to round-off
            if (polish) {
                break;
            }
            polish = true;
        }
    }
    if (!(sol.residual <= target)) {
        throw Error(ErrorCode::MaxIterations, "Newton-Kleinman stopped at residual " + std::to_string(sol.residual));
    }
    return sol;
}

/// LQR data for the linearization of `spec` at zero in the weighted pairings: V(y0) = h/2 y0^T P y0,
/// gradient P y0, optimal feedback u = -K y with K = (1/alpha) B* P.
inline RiccatiSolution solve_riccati(const ProblemSpec& spec, const RiccatiOptions& opts = {}) {
    const double s = std::sqrt(spec.h() / spec.control.weight());
    const Eigen::MatrixXd b = s * spec.control.to_dense();
    RiccatiSolution sol = solve_riccati(spec.op.to_dense(), b, spec.alpha, 1.0, std::nullopt, opts);
    sol.K *= s;
    return sol;
}

}  // namespace parastab
