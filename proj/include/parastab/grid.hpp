#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "parastab/error.hpp"

namespace parastab {

/// Uniform grid of interior nodes on (0, length); Dirichlet boundary nodes are implicit.
class SpatialGrid {
public:
    SpatialGrid() = default;

    SpatialGrid(std::size_t n_interior, double length) : n_(n_interior), length_(length) {
        require(n_interior >= 1, ErrorCode::InvalidArgument, "spatial grid needs n_interior >= 1");
        require(std::isfinite(length) && length > 0.0, ErrorCode::InvalidArgument,
                "spatial grid needs length > 0");
    }

    std::size_t size() const noexcept { return n_; }
    double length() const noexcept { return length_; }
    double h() const noexcept { return length_ / static_cast<double>(n_ + 1); }

    /// Position of interior node i (0-based), i.e. x_{i+1} = (i+1) h.
    double node(std::size_t i) const noexcept { return static_cast<double>(i + 1) * h(); }

    std::vector<double> nodes() const {
        std::vector<double> x(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            x[i] = node(i);
        }
        return x;
    }

    bool operator==(const SpatialGrid&) const = default;

private:
    std::size_t n_ = 1;
    double length_ = 1.0;
};

inline SpatialGrid build_grid(std::size_t n_interior, double length) {
    return SpatialGrid(n_interior, length);
}

/// Uniform time grid 0 = t_0 < ... < t_N = T.
class TimeGrid {
public:
    TimeGrid() = default;

    TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_steps_(n_steps) {
        require(std::isfinite(horizon) && horizon > 0.0, ErrorCode::InvalidArgument,
                "time grid needs T > 0");
        require(n_steps >= 1, ErrorCode::InvalidArgument, "time grid needs n_steps >= 1");
    }

    double horizon() const noexcept { return horizon_; }
    std::size_t steps() const noexcept { return n_steps_; }
    double dt() const noexcept { return horizon_ / static_cast<double>(n_steps_); }

    double time(std::size_t k) const noexcept {
        return k == n_steps_ ? horizon_ : static_cast<double>(k) * dt();
    }

    /// Node index closest to t, clamped to [0, N].
    std::size_t index_of(double t) const noexcept {
        if (t <= 0.0) {
            return 0;
        }
        const double k = std::round(t / dt());
        return k >= static_cast<double>(n_steps_) ? n_steps_ : static_cast<std::size_t>(k);
    }

    bool operator==(const TimeGrid&) const = default;

private:
    double horizon_ = 1.0;
    std::size_t n_steps_ = 1;
};

}  // namespace parastab
