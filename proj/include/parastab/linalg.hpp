#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "parastab/error.hpp"

namespace parastab {

using GridFunction = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
    require_dims(b.size(), a.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

/// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    require_dims(y.size(), x.size(), "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] += a * x[i];
    }
}

inline double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

inline GridFunction scaled(double a, std::span<const double> x) {
    GridFunction out(x.begin(), x.end());
    for (double& v : out) {
        v *= a;
    }
    return out;
}

inline GridFunction sum(std::span<const double> a, std::span<const double> b, double b_scale = 1.0) {
    require_dims(b.size(), a.size(), "sum");
    GridFunction out(a.begin(), a.end());
    axpy(b_scale, b, out);
    return out;
}

/// Solves a tridiagonal system in place (Thomas algorithm, no pivoting).
///
/// `sub[i]` couples row i to i-1 (sub[0] unused), `sup[i]` couples row i to i+1
/// (sup[n-1] unused). `rhs` is overwritten with the solution. `work` must hold n entries.
inline void thomas_solve(std::span<const double> sub, std::span<const double> diag,
                         std::span<const double> sup, std::span<double> rhs, std::span<double> work) {
    const std::size_t n = diag.size();
    require(sub.size() == n && sup.size() == n && rhs.size() == n && work.size() >= n,
            ErrorCode::DimensionMismatch, "thomas_solve: inconsistent sizes");
    double beta = diag[0];
    require(beta != 0.0, ErrorCode::InvalidArgument, "thomas_solve: zero pivot");
    rhs[0] /= beta;
    for (std::size_t i = 1; i < n; ++i) {
        work[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * work[i];
        require(beta != 0.0, ErrorCode::InvalidArgument, "thomas_solve: zero pivot");
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for (std::size_t i = n - 1; i-- > 0;) {
        rhs[i] -= work[i + 1] * rhs[i + 1];
    }
}

}  // namespace parastab
