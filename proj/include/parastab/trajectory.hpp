#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "parastab/grid.hpp"
#include "parastab/linalg.hpp"

namespace parastab {

/// Nodes: values at t_0..t_N. Intervals: one value per [t_k, t_{k+1}), k = 0..N-1.
enum class TimeLayout : std::uint8_t { Nodes = 0, Intervals = 1 };

/// Time-indexed grid functions stored row-major (one row per time index).
///
/// The tag keeps state, adjoint, control and forcing trajectories apart at compile time.
template <class Tag>
class Trajectory {
public:
    static constexpr TimeLayout layout = Tag::layout;

    Trajectory() = default;

    Trajectory(const TimeGrid& tg, std::size_t dim)
        : grid_(tg), dim_(dim), values_(rows_for(tg) * dim, 0.0) {}

    const TimeGrid& time_grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return rows_for(grid_); }
    std::size_t dim() const noexcept { return dim_; }

    double time(std::size_t k) const noexcept { return grid_.time(k); }

    std::span<double> operator[](std::size_t k) noexcept { return {values_.data() + k * dim_, dim_}; }
    std::span<const double> operator[](std::size_t k) const noexcept {
        return {values_.data() + k * dim_, dim_};
    }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    bool is_finite() const { return all_finite(values_); }

    Trajectory& operator+=(const Trajectory& other) {
        check_compatible(other);
        axpy(1.0, other.values_, values_);
        return *this;
    }

    Trajectory& operator-=(const Trajectory& other) {
        check_compatible(other);
        axpy(-1.0, other.values_, values_);
        return *this;
    }

    Trajectory& operator*=(double a) {
        for (double& v : values_) {
            v *= a;
        }
        return *this;
    }

    friend Trajectory operator+(Trajectory a, const Trajectory& b) { return a += b; }
    friend Trajectory operator-(Trajectory a, const Trajectory& b) { return a -= b; }
    friend Trajectory operator*(double s, Trajectory a) { return a *= s; }

    /// a + s * b
    static Trajectory combine(const Trajectory& a, double s, const Trajectory& b) {
        a.check_compatible(b);
        Trajectory out = a;
        axpy(s, b.values_, out.values_);
        return out;
    }

    void check_compatible(const Trajectory& other) const {
        require(grid_ == other.grid_, ErrorCode::DimensionMismatch, "trajectories on different time grids");
        require_dims(other.dim_, dim_, "trajectory dimension");
    }

    bool operator==(const Trajectory&) const = default;

private:
    static std::size_t rows_for(const TimeGrid& tg) noexcept {
        return layout == TimeLayout::Nodes ? tg.steps() + 1 : tg.steps();
    }

    TimeGrid grid_;
    std::size_t dim_ = 0;
    std::vector<double> values_;
};

struct StateTag {
    static constexpr TimeLayout layout = TimeLayout::Nodes;
};
struct AdjointTag {
    static constexpr TimeLayout layout = TimeLayout::Nodes;
};
struct ControlTag {
    static constexpr TimeLayout layout = TimeLayout::Intervals;
};
struct ForcingTag {
    static constexpr TimeLayout layout = TimeLayout::Intervals;
};

/// y[k], k = 0..N.
using StateTrajectory = Trajectory<StateTag>;
/// p[k], k = 0..N with p[N] = 0; p[k] pairs with the control on [t_k, t_{k+1}).
using AdjointTrajectory = Trajectory<AdjointTag>;
/// u[k] held constant on [t_k, t_{k+1}), k = 0..N-1.
using ControlTrajectory = Trajectory<ControlTag>;
/// State-space source held constant on each interval.
using ForcingTrajectory = Trajectory<ForcingTag>;

template <class To, class From>
    requires(To::layout == From::layout)
To retag(const From& from) {
    To out(from.time_grid(), from.dim());
    std::copy(from.values().begin(), from.values().end(), out.values().begin());
    return out;
}

// -- serialization -----------------------------------------------------------

/// CSV with header `t,x_1..x_n` (or `t,dof_1..dof_m`), one row per time index,
/// values at 17 significant digits.
template <class Tag>
std::string to_csv(const Trajectory<Tag>& traj, std::string_view column_prefix = "x_") {
    std::string out = "t";
    for (std::size_t j = 0; j < traj.dim(); ++j) {
        out += fmt::format(",{}{}", column_prefix, j + 1);
    }
    out += '\n';
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out += fmt::format("{:.17g}", traj.time(k));
        for (double v : traj[k]) {
            out += fmt::format(",{:.17g}", v);
        }
        out += '\n';
    }
    return out;
}

namespace detail {
inline constexpr char kTrajectoryMagic[8] = {'P', 'S', 'T', 'R', 'A', 'J', '0', '1'};

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    require(static_cast<bool>(is), ErrorCode::Io, "truncated trajectory file");
    return v;
}
}  // namespace detail

/// Binary layout: magic, layout byte, n_interior, length, n_steps, T, dim, then
/// size()*dim doubles in row-major order (native byte order).
template <class Tag>
void write_binary(std::ostream& os, const Trajectory<Tag>& traj, const SpatialGrid& grid) {
    os.write(detail::kTrajectoryMagic, sizeof(detail::kTrajectoryMagic));
    detail::write_pod(os, static_cast<std::uint8_t>(Tag::layout));
    detail::write_pod(os, static_cast<std::uint64_t>(grid.size()));
    detail::write_pod(os, grid.length());
    detail::write_pod(os, static_cast<std::uint64_t>(traj.time_grid().steps()));
    detail::write_pod(os, traj.time_grid().horizon());
    detail::write_pod(os, static_cast<std::uint64_t>(traj.dim()));
    os.write(reinterpret_cast<const char*>(traj.values().data()),
             static_cast<std::streamsize>(traj.values().size() * sizeof(double)));
    require(static_cast<bool>(os), ErrorCode::Io, "failed writing trajectory");
}

template <class Tag>
struct BinaryTrajectory {
    SpatialGrid grid;
    Trajectory<Tag> trajectory;
};

template <class Tag>
BinaryTrajectory<Tag> read_binary(std::istream& is) {
    char magic[sizeof(detail::kTrajectoryMagic)];
    is.read(magic, sizeof(magic));
    require(static_cast<bool>(is) && std::memcmp(magic, detail::kTrajectoryMagic, sizeof(magic)) == 0,
            ErrorCode::Io, "not a trajectory file");
    const auto layout = detail::read_pod<std::uint8_t>(is);
    require(layout == static_cast<std::uint8_t>(Tag::layout), ErrorCode::Io, "trajectory layout mismatch");
    const auto n_interior = detail::read_pod<std::uint64_t>(is);
    const auto length = detail::read_pod<double>(is);
    const auto n_steps = detail::read_pod<std::uint64_t>(is);
    const auto horizon = detail::read_pod<double>(is);
    const auto dim = detail::read_pod<std::uint64_t>(is);
    BinaryTrajectory<Tag> out{SpatialGrid(n_interior, length),
                              Trajectory<Tag>(TimeGrid(horizon, n_steps), dim)};
    auto values = out.trajectory.values();
    is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    require(static_cast<bool>(is), ErrorCode::Io, "truncated trajectory payload");
    return out;
}

}  // namespace parastab
