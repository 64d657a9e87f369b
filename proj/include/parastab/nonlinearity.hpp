#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "parastab/linalg.hpp"

namespace parastab {

enum class NonlinearityKind { Linear, Fisher, Schlogl, LipschitzC2 };

inline constexpr std::string_view to_string(NonlinearityKind kind) {
    switch (kind) {
        case NonlinearityKind::Linear: return "linear";
        case NonlinearityKind::Fisher: return "fisher";
        case NonlinearityKind::Schlogl: return "schlogl";
        case NonlinearityKind::LipschitzC2: return "lipschitz_c2";
    }
    return "linear";
}

inline std::optional<NonlinearityKind> parse_nonlinearity_kind(std::string_view name) {
    if (name == "linear") return NonlinearityKind::Linear;
    if (name == "fisher") return NonlinearityKind::Fisher;
    if (name == "schlogl") return NonlinearityKind::Schlogl;
    if (name == "lipschitz_c2") return NonlinearityKind::LipschitzC2;
    return std::nullopt;
}

/// Pointwise nonlinearity f with f(0) = f'(0) = 0, acting as a substitution operator.
///
/// Fisher keeps only -s^2; its linear growth term lives in the operator shift.
/// LipschitzC2 is gamma (s - sin s), whose second derivative gamma sin s is bounded
/// and globally Lipschitz.
class Nonlinearity {
public:
    Nonlinearity() = default;
    explicit Nonlinearity(NonlinearityKind kind, double gamma = 1.0) : kind_(kind), gamma_(gamma) {}

    NonlinearityKind kind() const noexcept { return kind_; }
    double gamma() const noexcept { return gamma_; }
    bool is_linear() const noexcept { return kind_ == NonlinearityKind::Linear; }

    double f(double s) const noexcept {
        switch (kind_) {
            case NonlinearityKind::Linear: return 0.0;
            case NonlinearityKind::Fisher: return -s * s;
            case NonlinearityKind::Schlogl: return s * s * s;
            case NonlinearityKind::LipschitzC2: return gamma_ * (s - std::sin(s));
        }
        return 0.0;
    }

    double df(double s) const noexcept {
        switch (kind_) {
            case NonlinearityKind::Linear: return 0.0;
            case NonlinearityKind::Fisher: return -2.0 * s;
            case NonlinearityKind::Schlogl: return 3.0 * s * s;
            case NonlinearityKind::LipschitzC2: return gamma_ * (1.0 - std::cos(s));
        }
        return 0.0;
    }

    double d2f(double s) const noexcept {
        switch (kind_) {
            case NonlinearityKind::Linear: return 0.0;
            case NonlinearityKind::Fisher: return -2.0;
            case NonlinearityKind::Schlogl: return 6.0 * s;
            case NonlinearityKind::LipschitzC2: return gamma_ * std::sin(s);
        }
        return 0.0;
    }

private:
    NonlinearityKind kind_ = NonlinearityKind::Linear;
    double gamma_ = 1.0;
};

/// Applies f (order 0), f' (order 1) or f'' (order 2) node by node. For orders 1 and 2
/// the result is the diagonal of the derivative operator (the pointwise weight).
inline GridFunction nonlinearity_apply(const Nonlinearity& nl, std::span<const double> y, int order) {
    require(order >= 0 && order <= 2, ErrorCode::InvalidArgument, "nonlinearity order must be 0, 1 or 2");
    GridFunction out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        out[i] = order == 0 ? nl.f(y[i]) : order == 1 ? nl.df(y[i]) : nl.d2f(y[i]);
    }
    return out;
}

}  // namespace parastab
