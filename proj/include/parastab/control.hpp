#pragma once

#include <cmath>
#include <span>

#include "parastab/problem.hpp"

namespace parastab {

/// Radial projection of one control vector onto the ball |v| <= eta (in place).
inline void project_ball(const ProblemSpec& spec, std::span<double> v, double eta) {
    if (std::isinf(eta)) {
        return;
    }
    const double nv = control_norm(spec, v);
    if (!(nv > eta)) {
        return;
    }
    // The factor eta / |v| may round to a norm just above eta; shrink it by ulps so that the
    // result lies in the ball and a second projection is the identity.
    const GridFunction orig(v.begin(), v.end());
    double s = eta / nv;
    for (;;) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = s * orig[i];
        }
        if (control_norm(spec, v) <= eta) {
            return;
        }
        s = std::nextafter(s, 0.0);
    }
}

/// u[k] = v[k] min(1, eta / |v[k]|) at every time index (up to a few ulps of the factor).
/// Exactly idempotent and nonexpansive in U.
inline ControlTrajectory project_control(const ProblemSpec& spec, ControlTrajectory v, double eta) {
    require(eta > 0.0, ErrorCode::InvalidArgument, "eta must be > 0");
    require_dims(v.dim(), spec.control_dim(), "control dimension");
    for (std::size_t k = 0; k < v.size(); ++k) {
        project_ball(spec, v[k], eta);
    }
    return v;
}

inline ControlTrajectory project_control(const ProblemSpec& spec, ControlTrajectory v) {
    return project_control(spec, std::move(v), spec.eta);
}

/// Control trajectory B* p[k] / alpha, k = 0..N-1 (the unconstrained feedback value).
template <class Tag>
ControlTrajectory adjoint_feedback(const ProblemSpec& spec, const Trajectory<Tag>& p, double scale) {
    ControlTrajectory out(p.time_grid(), spec.control_dim());
    for (std::size_t k = 0; k < out.size(); ++k) {
        spec.control.adjoint(p[k], out[k]);
        for (double& x : out[k]) {
            x *= scale;
        }
    }
    return out;
}

}  // namespace parastab
