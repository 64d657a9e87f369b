#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "parastab/optimizer.hpp"
#include "parastab/parallel.hpp"
#include "parastab/riccati.hpp"

namespace parastab {

/// V = h/2 y0^T P y0 and gradient P y0 (h-weighted pairing).
inline std::pair<double, GridFunction> lqr_value_and_gradient(const Eigen::MatrixXd& P, double h,
                                                              std::span<const double> y0) {
    require(P.rows() == P.cols() && P.rows() == static_cast<Eigen::Index>(y0.size()), ErrorCode::DimensionMismatch,
            "P and y0 dimensions");
    const Eigen::Map<const Eigen::VectorXd> y(y0.data(), static_cast<Eigen::Index>(y0.size()));
    const Eigen::VectorXd g = P * y;
    return {0.5 * h * y.dot(g), GridFunction(g.data(), g.data() + g.size())};
}

struct BruteForceOptions {
    std::size_t points = 21;
    bool refine = true;
    double max_enumeration = 1e7;
    /// Per-coordinate search range; defaults to [-eta, eta].
    std::optional<std::pair<double, double>> range;
};

struct BruteForceResult {
    ControlTrajectory best_u;
    double best_J = std::numeric_limits<double>::infinity();
    std::size_t evaluated = 0;
    double cell = 0.0;
    double refined_cell = 0.0;
};

namespace detail {

/// Exhaustive scan of the product of per-coordinate candidate lists. Ties keep the
/// lexicographically first candidate.
inline BruteForceResult enumerate_controls(const ProblemSpec& spec, std::span<const double> y0, const TimeGrid& tg,
                                           const std::vector<std::vector<double>>& candidates, double max_enum) {
    const std::size_t dims = candidates.size();
    double total = 1.0;
    for (const auto& c : candidates) {
        require(!c.empty(), ErrorCode::InvalidArgument, "empty candidate list");
        total *= static_cast<double>(c.size());
    }
    require(total <= max_enum, ErrorCode::EnumerationTooLarge,
            "enumeration of " + std::to_string(total) + " controls exceeds " + std::to_string(max_enum));
    const std::size_t lead = candidates[0].size();
    std::vector<BruteForceResult> partial(lead);
    parallel_for(lead, [&](std::size_t i0) {
        BruteForceResult best;
        ControlTrajectory u(tg, spec.control_dim());
        std::vector<std::size_t> idx(dims, 0);
        idx[0] = i0;
        for (;;) {
            for (std::size_t d = 0; d < dims; ++d) {
                u.values()[d] = candidates[d][idx[d]];
            }
            bool feasible = true;
            for (std::size_t k = 0; k < u.size() && feasible; ++k) {
                feasible = control_norm(spec, u[k]) <= spec.eta * (1.0 + 1e-12);
            }
            if (feasible) {
                const double j = reduced_cost(spec, y0, u);
                ++best.evaluated;
                if (j < best.best_J) {
                    best.best_J = j;
                    best.best_u = u;
                }
            }
            std::size_t d = dims;
            bool carry = true;
            while (carry && d > 1) {
                --d;
                if (++idx[d] < candidates[d].size()) {
                    carry = false;
                } else {
                    idx[d] = 0;
                }
            }
            if (carry) {
                break;
            }
        }
        partial[i0] = std::move(best);
    });
    BruteForceResult out;
    for (auto& p : partial) {
        out.evaluated += p.evaluated;
        if (p.best_J < out.best_J) {
            out.best_J = p.best_J;
            out.best_u = std::move(p.best_u);
        }
    }
    return out;
}

}  // namespace detail

/// Exhaustive search over per-node controls on a uniform grid, followed by one 2x refinement
/// around the first argmin.
inline BruteForceResult brute_force_tiny(const ProblemSpec& spec, std::span<const double> y0, const TimeGrid& tg,
                                         const BruteForceOptions& opts = {}) {
    spec.validate();
    require_dims(y0.size(), spec.state_dim(), "initial state");
    require(opts.points >= 2, ErrorCode::InvalidArgument, "control grid needs at least two points");
    double lo = -spec.eta, hi = spec.eta;
    if (opts.range) {
        lo = opts.range->first;
        hi = opts.range->second;
    }
    require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, ErrorCode::InvalidArgument,
            "brute force needs a finite control range");
    const std::size_t dims = tg.steps() * spec.control_dim();
    const double cell = (hi - lo) / static_cast<double>(opts.points - 1);
    std::vector<double> grid(opts.points);
    for (std::size_t i = 0; i < opts.points; ++i) {
        grid[i] = i + 1 == opts.points ? hi : lo + static_cast<double>(i) * cell;
    }
    BruteForceResult coarse =
        detail::enumerate_controls(spec, y0, tg, std::vector<std::vector<double>>(dims, grid), opts.max_enumeration);
    coarse.cell = cell;
    coarse.refined_cell = cell;
    if (!opts.refine) {
        return coarse;
    }
    std::vector<std::vector<double>> fine(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        const double c = coarse.best_u.values()[d];
        for (double off : {-cell, -0.5 * cell, 0.0, 0.5 * cell, cell}) {
            const double v = c + off;
            if (v >= lo - 1e-15 && v <= hi + 1e-15) {
                fine[d].push_back(std::clamp(v, lo, hi));
            }
        }
    }
    BruteForceResult refined = detail::enumerate_controls(spec, y0, tg, fine, opts.max_enumeration);
    refined.evaluated += coarse.evaluated;
    refined.cell = cell;
    refined.refined_cell = 0.5 * cell;
    if (!(refined.best_J <= coarse.best_J)) {
        refined.best_J = coarse.best_J;
        refined.best_u = coarse.best_u;
    }
    return refined;
}

}  // namespace parastab
