#pragma once

#include <complex>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "parastab/error.hpp"
#include "parastab/operator.hpp"

namespace parastab {

/// Largest real part of the eigenvalues of a square matrix.
inline double spectral_abscissa(const Eigen::MatrixXd& m) {
    require(m.rows() == m.cols() && m.rows() > 0, ErrorCode::DimensionMismatch, "abscissa needs a square matrix");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * scale) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        require(es.info() == Eigen::Success, ErrorCode::EigensolverFailure, "symmetric eigensolver failed");
        return es.eigenvalues().maxCoeff();
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    require(es.info() == Eigen::Success, ErrorCode::EigensolverFailure, "general eigensolver failed");
    return es.eigenvalues().real().maxCoeff();
}

inline double spectral_abscissa(const DiscreteOperator& op) { return spectral_abscissa(op.to_dense()); }

/// Solves A^T X + X A = -Q (Bartels-Stewart on the complex Schur form of A).
/// Requires lambda_i + conj(lambda_j) != 0 for all eigenvalue pairs.
inline Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q) {
    using Complex = std::complex<double>;
    const Eigen::Index n = a.rows();
    require(a.cols() == n && q.rows() == n && q.cols() == n, ErrorCode::DimensionMismatch, "lyapunov dimensions");
    Eigen::ComplexSchur<Eigen::MatrixXd> schur(a);
    require(schur.info() == Eigen::Success, ErrorCode::EigensolverFailure, "Schur decomposition failed");
    const Eigen::MatrixXcd& t = schur.matrixT();
    const Eigen::MatrixXcd& u = schur.matrixU();
    // T^H Y + Y T = -U^H Q U, Y = U^H X U.
    const Eigen::MatrixXcd c = -(u.adjoint() * q.cast<Complex>() * u);
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    const double tiny = std::numeric_limits<double>::epsilon() * std::max(1.0, t.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXcd rhs = c.col(j);
        for (Eigen::Index i = 0; i < j; ++i) {
            rhs -= t(i, j) * y.col(i);
        }
        // (T^H + t_jj I) is lower triangular: forward substitution.
        for (Eigen::Index r = 0; r < n; ++r) {
            Complex s = rhs(r);
            for (Eigen::Index k = 0; k < r; ++k) {
                s -= std::conj(t(k, r)) * y(k, j);
            }
            const Complex d = std::conj(t(r, r)) + t(j, j);
            require(std::abs(d) > tiny, ErrorCode::NotStabilizable, "Lyapunov operator is singular");
            y(r, j) = s / d;
        }
    }
    const Eigen::MatrixXd x = (u * y * u.adjoint()).real();
    return 0.5 * (x + x.transpose());
}

/// Moore-Penrose pseudo-inverse via complete orthogonal decomposition.
inline Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m) {
    return Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(m).pseudoInverse();
}

/// Largest singular value.
inline double spectral_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

}  // namespace parastab
