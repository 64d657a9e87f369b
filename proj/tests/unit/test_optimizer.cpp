#include <gtest/gtest.h>

#include <numbers>

#include <Eigen/Dense>

#include "support.hpp"

using namespace parastab;
using namespace parastab::testing;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

OptimalTriple triple_at(const ProblemSpec& spec, std::span<const double> y0, const ControlTrajectory& u) {
    OptimalTriple t;
    t.u = u;
    t.y = solve_state(spec, y0, u);
    t.p = solve_adjoint(spec, t.y);
    t.cost = cost_of(spec, t.y, u);
    return t;
}

}  // namespace

TEST(Projection, Examples) {
    const ProblemSpec spec = problem(1, 2.0, 0.0, NonlinearityKind::Linear, 1.0, 1.0);  // h = 1
    const TimeGrid tg(1.0, 3);
    ControlTrajectory v(tg, 1);
    for (double& x : v.values()) x = 0.3;
    EXPECT_EQ(project_control(spec, v), v);
    for (double& x : v.values()) x = 2.0;
    const ControlTrajectory pv = project_control(spec, v);
    for (double x : pv.values()) EXPECT_DOUBLE_EQ(x, 1.0);
    EXPECT_THROW(project_control(spec, v, 0.0), Error);
}

TEST(Projection, PointwiseOracleIdempotentNonexpansive) {
    const ProblemSpec spec = problem(6, 1.0, 0.0, NonlinearityKind::Linear, 1.0, 0.4);
    const TimeGrid tg(1.0, 10);
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const ControlTrajectory v = random_traj<ControlTag>(tg, 6, rng);
        const ControlTrajectory w = random_traj<ControlTag>(tg, 6, rng);
        const ControlTrajectory pv = project_control(spec, v);
        for (std::size_t k = 0; k < v.size(); ++k) {
            const double nv = std::sqrt(spec.h() * dot(v[k], v[k]));
            const double s = std::min(1.0, 0.4 / nv);
            for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(pv[k][j], s * v[k][j], 2e-15 * std::abs(s * v[k][j]));
            EXPECT_LE(control_norm(spec, pv[k]), 0.4);
        }
        EXPECT_EQ(project_control(spec, pv), pv);
        EXPECT_LE(control_norm(spec, pv - project_control(spec, w)), control_norm(spec, v - w));
    }
}

TEST(ReducedCost, ZeroAndAlphaScaling) {
    ProblemSpec spec = problem(5, 1.0, 1.0, NonlinearityKind::Fisher);
    const TimeGrid tg(1.0, 8);
    EXPECT_EQ(reduced_cost(spec, GridFunction(5, 0.0), ControlTrajectory(tg, 5)), 0.0);
    std::mt19937_64 rng(1);
    const ControlTrajectory u = random_traj<ControlTag>(tg, 5, rng);
    const GridFunction y0 = eigenmode(spec.grid, 1, 0.2);
    const double j1 = reduced_cost(spec, y0, u);
    spec.alpha = 2.0;
    const double j2 = reduced_cost(spec, y0, u);
    const double control_term = 0.5 * control_inner(spec, u, u);
    EXPECT_NEAR(j2 - j1, control_term, 1e-14 * j2);
}

TEST(ReducedGradient, ZeroAtOrigin) {
    const ProblemSpec spec = problem(5, 1.0, 1.0, NonlinearityKind::Schlogl);
    const TimeGrid tg(1.0, 8);
    const ControlTrajectory g = reduced_gradient(spec, GridFunction(5, 0.0), ControlTrajectory(tg, 5));
    for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(ReducedGradient, CentralDifferencesSecondOrder) {
    for (double theta : {1.0, 0.5}) {
        const ProblemSpec spec = problem(9, 1.0, 1.0, NonlinearityKind::Fisher, 0.5, kInf, theta);
        const TimeGrid tg(1.0, 16);
        std::mt19937_64 rng(8);
        ControlTrajectory u = random_traj<ControlTag>(tg, 9, rng);
        u *= 0.3;
        const ControlTrajectory w = random_control(spec, tg, rng);
        const GridFunction y0 = eigenmode(spec.grid, 1, 0.8);
        const double gw = control_inner(spec, reduced_gradient(spec, y0, u), w);
        std::vector<double> errs;
        for (double eps : {1e-2, 1e-3}) {
            const double fd = (reduced_cost(spec, y0, ControlTrajectory::combine(u, eps, w)) -
                               reduced_cost(spec, y0, ControlTrajectory::combine(u, -eps, w))) /
                              (2 * eps);
            errs.push_back(std::abs(fd - gw));
        }
        EXPECT_GE(std::log10(errs[0] / errs[1]), 1.8) << "theta " << theta;
    }
}

TEST(ReducedGradient, AffineForLinearKind) {
    const ProblemSpec spec = problem(7, 1.0, 0.0, NonlinearityKind::Linear, 0.7);
    const TimeGrid tg(1.0, 10);
    std::mt19937_64 rng(3);
    const ControlTrajectory u1 = random_traj<ControlTag>(tg, 7, rng);
    const ControlTrajectory u2 = random_traj<ControlTag>(tg, 7, rng);
    const GridFunction a = random_vector(7, rng), b = random_vector(7, rng);
    const ControlTrajectory da = reduced_gradient(spec, a, u1) - reduced_gradient(spec, a, u2);
    const ControlTrajectory db = reduced_gradient(spec, b, u1) - reduced_gradient(spec, b, u2);
    for (std::size_t i = 0; i < da.values().size(); ++i) EXPECT_NEAR(da.values()[i], db.values()[i], 1e-11);
}

TEST(Optimize, ZeroInitialState) {
    const ProblemSpec spec = problem(5, 1.0, 1.0, NonlinearityKind::Fisher, 1.0, 0.5);
    const OptimalTriple t = optimize(spec, GridFunction(5, 0.0), TimeGrid(1.0, 10));
    EXPECT_TRUE(t.converged);
    EXPECT_EQ(t.cost, 0.0);
    for (double v : t.u.values()) EXPECT_EQ(v, 0.0);
    for (double v : t.y.values()) EXPECT_EQ(v, 0.0);
    for (double v : t.p.values()) EXPECT_EQ(v, 0.0);
    const ResidualReport r = optimality_residuals(spec, t);
    EXPECT_EQ(r.state_residual, 0.0);
    EXPECT_EQ(r.adjoint_residual, 0.0);
    EXPECT_EQ(r.projection_residual, 0.0);
    EXPECT_EQ(r.complementarity_gap, 0.0);
}

TEST(Optimize, ScalarLqrFeedbackLaw) {
    // h = 1, A = -1, B = 1, alpha = 1: P = sqrt(2) - 1 and u = -P y along the optimal path.
    const ProblemSpec spec = problem(1, 2.0, 1.0, NonlinearityKind::Linear, 1.0, 1e6, 0.5);
    const TimeGrid tg(16.0, 16000);
    const GridFunction y0{1.0};
    OptimizerConfig cfg;
    cfg.tol_opt = 1e-12;
    const OptimalTriple t = optimize(spec, y0, tg, cfg);
    const double P = std::sqrt(2.0) - 1.0;
    for (std::size_t k = 0; k < tg.steps() / 4; k += 100) {
        const double ymid = 0.5 * (t.y[k][0] + t.y[k + 1][0]);
        EXPECT_NEAR(t.u[k][0], -P * ymid, 1e-6 * std::abs(P * ymid)) << "k " << k;
    }
}

TEST(Optimize, ResidualsAndFixedPoint) {
    for (double eta : {kInf, 0.05}) {
        const ProblemSpec spec = problem(15, 1.0, 1.0, NonlinearityKind::Fisher, 0.1, eta);
        const TimeGrid tg(3.0, 60);
        const GridFunction y0 = eigenmode(spec.grid, 1, 0.5);
        const OptimalTriple t = optimize(spec, y0, tg);
        const double tol = 1e-8 * std::max(1.0, norm_Y(spec.grid, y0));
        EXPECT_LE(t.residuals.projection_residual, tol);
        EXPECT_LE(t.residuals.fixed_point_residual, tol);
        EXPECT_LT(t.residuals.state_residual, 1e-9);
        EXPECT_LT(t.residuals.adjoint_residual, 1e-9);
        if (std::isfinite(eta)) {
            // the bound is active at early times
            EXPECT_NEAR(control_norm(spec, t.u[0]), eta, 1e-9);
            EXPECT_LT(t.residuals.complementarity_gap, 1e-8);
        }
        for (std::size_t i = 1; i < t.cost_history.size(); ++i) {
            EXPECT_LE(t.cost_history[i], t.cost_history[i - 1] * (1 + 1e-14));
        }
        OptimalTriple bad = t;
        bad.u[3][4] += 0.1;
        EXPECT_GT(optimality_residuals(spec, bad).projection_residual, t.residuals.projection_residual);
    }
}

TEST(Optimize, WarmStartAndMaxIterations) {
    const ProblemSpec spec = problem(9, 1.0, 1.0, NonlinearityKind::Fisher, 0.1, 0.05);
    const TimeGrid tg(2.0, 40);
    const GridFunction y0 = eigenmode(spec.grid, 1, 0.5);
    const OptimalTriple t = optimize(spec, y0, tg);
    const OptimalTriple w = optimize(spec, y0, tg, {}, &t.u);
    EXPECT_LE(w.iterations, 1);
    OptimizerConfig cfg;
    cfg.max_iter = 2;
    try {
        optimize(spec, y0, tg, cfg);
        FAIL();
    } catch (const OptimizationError& e) {
        EXPECT_EQ(e.code(), ErrorCode::MaxIterations);
        EXPECT_LE(e.best().cost, e.best().cost_history.front());
    }
}

TEST(Hessian, LinearKindIdentity) {
    const ProblemSpec spec = problem(8, 1.0, 0.0, NonlinearityKind::Linear, 0.3);
    const TimeGrid tg(1.0, 12);
    const GridFunction y0 = eigenmode(spec.grid, 1);
    const OptimalTriple t = optimize(spec, y0, tg);
    std::mt19937_64 rng(5);
    for (int i = 0; i < 5; ++i) {
        const ControlTrajectory w = random_control(spec, tg, rng);
        StateTrajectory v;
        const double quad = control_inner(spec, hessian_vector(spec, t, w, &v), w);
        EXPECT_LT(rel_diff(quad, state_cost_norm_sq(spec, v) + spec.alpha * control_inner(spec, w, w)), 1e-10);
    }
}

TEST(Hessian, SymmetricAndMatchesGradientDifferences) {
    for (double theta : {1.0, 0.5}) {
        const ProblemSpec spec = problem(9, 1.0, 1.0, NonlinearityKind::Schlogl, 0.2, kInf, theta);
        const TimeGrid tg(1.0, 14);
        const GridFunction y0 = eigenmode(spec.grid, 1, 0.9);
        std::mt19937_64 rng(6);
        ControlTrajectory u = random_traj<ControlTag>(tg, 9, rng);
        u *= 0.2;
        const OptimalTriple t = triple_at(spec, y0, u);
        for (int i = 0; i < 5; ++i) {
            const ControlTrajectory w1 = random_control(spec, tg, rng);
            const ControlTrajectory w2 = random_control(spec, tg, rng);
            EXPECT_LT(rel_diff(control_inner(spec, hessian_vector(spec, t, w1), w2),
                               control_inner(spec, hessian_vector(spec, t, w2), w1)),
                      1e-8);
        }
        const ControlTrajectory w = random_control(spec, tg, rng);
        const ControlTrajectory hw = hessian_vector(spec, t, w);
        std::vector<double> errs;
        for (double eps : {1e-3, 1e-4}) {
            ControlTrajectory fd = reduced_gradient(spec, y0, ControlTrajectory::combine(u, eps, w)) -
                                   reduced_gradient(spec, y0, ControlTrajectory::combine(u, -eps, w));
            fd *= 1.0 / (2 * eps);
            errs.push_back(control_norm(spec, fd - hw) / control_norm(spec, hw));
        }
        EXPECT_LT(errs[0], 1e-5);
        EXPECT_LT(errs[1], errs[0]);
    }
}

TEST(Coercivity, LinearBoundAndEmptyProbe) {
    const ProblemSpec spec = problem(8, 1.0, 0.0, NonlinearityKind::Linear, 0.3);
    const TimeGrid tg(1.0, 12);
    const OptimalTriple t = optimize(spec, eigenmode(spec.grid, 1), tg);
    const CoercivityReport c = coercivity_probe(spec, t, 16, 1);
    EXPECT_GE(c.min_rayleigh, std::min(1.0, spec.alpha) * (1 - 1e-12));
    const CoercivityReport empty = coercivity_probe(spec, t, 0);
    EXPECT_EQ(empty.samples, 0u);
    EXPECT_TRUE(std::isinf(empty.min_rayleigh));
}

TEST(Coercivity, SmallFisherPositive) {
    const ProblemSpec spec = problem(15, 1.0, 1.0, NonlinearityKind::Fisher, 0.1);
    const TimeGrid tg(2.0, 40);
    double previous = kInf;
    for (double amp : {0.05, 0.5, 2.0}) {
        const OptimalTriple t = optimize(spec, eigenmode(spec.grid, 1, amp), tg);
        const CoercivityReport c = coercivity_probe(spec, t, 16, 2);
        if (amp < 1.0) EXPECT_GT(c.min_rayleigh, 0.0);
        EXPECT_LE(c.min_rayleigh, previous * (1 + 1e-9));
        previous = c.min_rayleigh;
    }
}

namespace {

/// Dense saddle-point solve of the linearized system for the Linear kind with eta = inf.
/// Unknowns (dy_1..dy_N, du_0..du_{N-1}), multipliers for the N scheme rows.
struct DenseKkt {
    Eigen::VectorXd dy, du;
};

DenseKkt dense_kkt(const ProblemSpec& spec, const OptimalTriple& t, const KktPerturbation& b) {
    const TimeGrid& tg = t.u.time_grid();
    const Eigen::Index n = static_cast<Eigen::Index>(spec.state_dim());
    const Eigen::Index m = static_cast<Eigen::Index>(spec.control_dim());
    const Eigen::Index N = static_cast<Eigen::Index>(tg.steps());
    const double dt = tg.dt(), th = spec.theta, h = spec.h(), wu = spec.control.weight();
    const Eigen::MatrixXd A = spec.op.to_dense();
    const Eigen::MatrixXd B = spec.control.to_dense();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    const Eigen::Index ny = N * n, nu = N * m, nx = ny + nu;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nx, nx), C = Eigen::MatrixXd::Zero(ny, nx);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(nx), d = Eigen::VectorXd::Zero(ny);
    const Eigen::Map<const Eigen::VectorXd> b4(b.beta4.data(), n);
    for (Eigen::Index k = 1; k <= N; ++k) {
        const double w = state_cost_weight(tg, th, static_cast<std::size_t>(k));
        H.block((k - 1) * n, (k - 1) * n, n, n) = w * h * I;
        g.segment((k - 1) * n, n) = -w * h * Eigen::Map<const Eigen::VectorXd>(b.beta1[static_cast<std::size_t>(k)].data(), n);
    }
    const ControlTrajectory bpt = adjoint_feedback(spec, t.p, 1.0);
    const auto bp = bpt.values();
    for (Eigen::Index k = 0; k < N; ++k) {
        H.block(ny + k * m, ny + k * m, m, m) = spec.alpha * dt * wu * Eigen::MatrixXd::Identity(m, m);
        for (Eigen::Index j = 0; j < m; ++j) {
            const double ub = t.u[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
            const double lin = bp[static_cast<std::size_t>(k * m + j)] + b.beta2[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
            g(ny + k * m + j) = spec.alpha * dt * wu * ub - dt * wu * lin;
        }
        // (I - dt th A) dy_{k+1} - (I + dt (1-th) A) dy_k - dt B du_k = dt beta3_k
        C.block(k * n, k * n, n, n) = I - dt * th * A;
        if (k > 0) C.block(k * n, (k - 1) * n, n, n) = -(I + dt * (1 - th) * A);
        C.block(k * n, ny + k * m, n, m) = -dt * B;
        d.segment(k * n, n) = dt * Eigen::Map<const Eigen::VectorXd>(b.beta3[static_cast<std::size_t>(k)].data(), n);
        if (k == 0) d.segment(0, n) += (I + dt * (1 - th) * A) * b4;
    }
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nx + ny, nx + ny);
    K.topLeftCorner(nx, nx) = H;
    K.topRightCorner(nx, ny) = C.transpose();
    K.bottomLeftCorner(ny, nx) = C;
    Eigen::VectorXd rhs(nx + ny);
    rhs << -g, d;
    const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
    return {sol.head(ny), sol.segment(ny, nu)};
}

}  // namespace

TEST(LinearizedKkt, ZeroPerturbationReproducesBase) {
    const ProblemSpec spec = problem(9, 1.0, 1.0, NonlinearityKind::Fisher, 0.1, 0.05);
    const TimeGrid tg(2.0, 30);
    const OptimalTriple t = optimize(spec, eigenmode(spec.grid, 1, 0.5), tg, {.tol_opt = 1e-12});
    const KktSolution s = solve_linearized_kkt(spec, t, KktPerturbation::zero(spec, tg));
    EXPECT_LT(control_norm(spec, s.du), 1e-10);
    EXPECT_LT(norm_sup_Y(spec.grid, s.dy), 1e-10);
    EXPECT_LT(norm_sup_Y(spec.grid, s.dp), 1e-10);
}

TEST(LinearizedKkt, InitialShiftIsExact) {
    const ProblemSpec spec = problem(9, 1.0, 1.0, NonlinearityKind::Fisher, 0.1, 0.05);
    const TimeGrid tg(2.0, 30);
    const OptimalTriple t = optimize(spec, eigenmode(spec.grid, 1, 0.5), tg);
    KktPerturbation b = KktPerturbation::zero(spec, tg);
    std::mt19937_64 rng(4);
    b.beta4 = scaled(1e-3, random_direction(spec.grid, rng));
    const KktSolution s = solve_linearized_kkt(spec, t, b);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(s.dy[0][i], b.beta4[i]);
}

TEST(LinearizedKkt, MatchesDenseSaddlePointSolve) {
    for (double theta : {1.0, 0.5}) {
        const ProblemSpec spec = problem(5, 1.0, 0.5, NonlinearityKind::Linear, 0.4, kInf, theta);
        const TimeGrid tg(1.0, 6);
        const OptimalTriple t = optimize(spec, eigenmode(spec.grid, 1), tg);
        std::mt19937_64 rng(13);
        const KktPerturbation b = random_perturbation(spec, tg, rng);
        const KktSolution s = solve_linearized_kkt(spec, t, b);
        const DenseKkt o = dense_kkt(spec, t, b);
        const Eigen::Map<const Eigen::VectorXd> du(s.du.values().data(), o.du.size());
        EXPECT_LT((du - o.du).norm(), 1e-8 * o.du.norm());
        for (std::size_t k = 1; k <= tg.steps(); ++k) {
            const Eigen::Map<const Eigen::VectorXd> dy(s.dy[k].data(), 5);
            EXPECT_LT((dy - o.dy.segment(static_cast<Eigen::Index>((k - 1) * 5), 5)).norm(), 1e-8 * o.dy.norm());
        }
        // stationarity of the control relation with the returned adjoint increment
        ControlTrajectory r = gradient_from_adjoint(spec, t.u + s.du, t.p + s.dp);
        r -= b.beta2;
        EXPECT_LT(control_norm(spec, r), 1e-9);
    }
}

TEST(StrongRegularity, LinearRatiosConstantAndIdenticalPairsExcluded) {
    const ProblemSpec spec = problem(7, 1.0, 0.0, NonlinearityKind::Linear, 0.5);
    const TimeGrid tg(1.0, 10);
    const OptimalTriple t = optimize(spec, eigenmode(spec.grid, 1), tg);
    const RatioTable tab = strong_regularity_probe(spec, t, 12, 1e-3, {.seed = 3});
    EXPECT_EQ(tab.excluded, 0u);
    EXPECT_LT((tab.max_ratio - tab.min_ratio) / tab.max_ratio, 1e-6);
    const RatioTable indep = strong_regularity_probe(spec, t, 12, 1e-3, {.seed = 3, .mode = PairMode::Independent});
    EXPECT_GT(indep.max_ratio, 0.0);
    const RatioTable s = summarize_ratios({RatioRow{0, 0.0, 0.0, std::numeric_limits<double>::quiet_NaN()},
                                           RatioRow{1, 1.0, 2.0, 2.0}});
    EXPECT_EQ(s.excluded, 1u);
    EXPECT_EQ(s.max_ratio, 2.0);
}
