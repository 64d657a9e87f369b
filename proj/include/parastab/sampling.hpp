#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "parastab/grid.hpp"
#include "parastab/linalg.hpp"
#include "parastab/trajectory.hpp"

namespace parastab {

/// Independent generator for sample `index` of a run seeded with `seed`.
inline std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

/// sin(k pi x / L) at the grid nodes, scaled by `amplitude`.
inline GridFunction eigenmode(const SpatialGrid& grid, std::size_t k, double amplitude = 1.0) {
    GridFunction y(grid.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = amplitude * std::sin(static_cast<double>(k) * std::numbers::pi * grid.node(i) / grid.length());
    }
    return y;
}

/// Random smooth grid function: Gaussian combination of the first `modes` eigenmodes,
/// normalized to unit h-weighted norm.
inline GridFunction random_direction(const SpatialGrid& grid, std::mt19937_64& rng, std::size_t modes = 4) {
    std::normal_distribution<double> normal(0.0, 1.0);
    GridFunction d(grid.size(), 0.0);
    const std::size_t m = std::max<std::size_t>(1, std::min(modes, grid.size()));
    for (std::size_t k = 1; k <= m; ++k) {
        axpy(normal(rng) / static_cast<double>(k), eigenmode(grid, k), d);
    }
    const double nrm = std::sqrt(grid.h() * dot(d, d));
    for (double& v : d) {
        v /= nrm;
    }
    return d;
}

/// Uniform draw from [0, 1).
inline double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// Random trajectory a(x) e^{-r t} + b(x) e^{-s t} with smooth a, b.
template <class Tag>
Trajectory<Tag> random_trajectory(const SpatialGrid& grid, const TimeGrid& tg, std::mt19937_64& rng) {
    const GridFunction a = random_direction(grid, rng);
    const GridFunction b = random_direction(grid, rng);
    const double r = 0.2 + 4.8 * uniform01(rng);
    const double s = 0.2 + 4.8 * uniform01(rng);
    const double cb = 2.0 * uniform01(rng) - 1.0;
    Trajectory<Tag> out(tg, grid.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double t = tg.time(k);
        const double ea = std::exp(-r * t);
        const double eb = cb * std::exp(-s * t);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            out[k][i] = ea * a[i] + eb * b[i];
        }
    }
    return out;
}

}  // namespace parastab
