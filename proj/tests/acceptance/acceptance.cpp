// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include <parastab.hpp>
#include <parastab/cli/run.hpp>

using namespace parastab;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
    bool pass = false;
    std::string detail;
};

ProblemSpec problem(std::size_t n, double length, double shift, NonlinearityKind kind, double alpha,
                    double eta = kInf, double theta = 1.0) {
    return make_problem(build_grid(n, length), shift, Nonlinearity(kind), alpha, eta, theta);
}

SolveConfig config(double T, std::size_t n_steps, double tail_tol, double tol_opt) {
    SolveConfig c;
    c.optimizer.tol_opt = tol_opt;
    c.horizon.T = T;
    c.horizon.n_steps = n_steps;
    c.horizon.tail_tol = tail_tol;
    return c;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// 1
Outcome gradient_identity() {
    Outcome out{true, ""};
    for (NonlinearityKind kind : {NonlinearityKind::Linear, NonlinearityKind::Fisher, NonlinearityKind::Schlogl,
                                  NonlinearityKind::LipschitzC2}) {
        const ProblemSpec spec = problem(31, 1.0, 1.0, kind, 0.5);
        const GridFunction y0 = eigenmode(spec.grid, 1, 0.05);
        const SolveConfig cfg = config(4.0, 200, 1e-6, 1e-12);
        const ValueSolution base = solve_value(spec, y0, cfg);
        // the value gradient must be -p(0) for this scheme
        double grad_gap = 0.0;
        for (std::size_t i = 0; i < y0.size(); ++i) grad_gap = std::max(grad_gap, std::abs(base.grad[i] + base.triple.p[0][i]));
        std::mt19937_64 rng(11);
        std::vector<GridFunction> dirs;
        for (int i = 0; i < 5; ++i) dirs.push_back(random_direction(spec.grid, rng));
        const FdReport r = fd_gradient_check(spec, base, y0, dirs, {1e-3, 1e-4}, cfg.optimizer);
        double err_small = 0.0;
        for (const FdRow& row : r.rows) {
            if (row.eps == 1e-4) err_small = std::max(err_small, row.abs_err);
        }
        const bool ok = r.observed_order >= 1.8 && err_small <= 1e-6 && grad_gap == 0.0;
        out.pass = out.pass && ok;
        out.detail += fmt::format("{}: order {:.3g}, err(1e-4) {:.2e}; ", to_string(kind), r.observed_order, err_small);
    }
    return out;
}

// 2
Outcome lqr_equivalence() {
    const ProblemSpec spec = problem(32, 1.0, 0.0, NonlinearityKind::Linear, 1.0, kInf, 0.5);
    GridFunction y0 = eigenmode(spec.grid, 1);
    axpy(0.5, eigenmode(spec.grid, 2), y0);
    SolveConfig cfg = config(2.0, 4096, 1e-8, 1e-12);
    cfg.horizon.max_steps = 4096;
    const ValueSolution s = solve_value(spec, y0, cfg);
    const RiccatiSolution ric = solve_riccati(spec);
    const auto [v_ref, g_ref] = lqr_value_and_gradient(ric.P, spec.h(), y0);
    GridFunction diff = s.grad;
    axpy(-1.0, g_ref, diff);
    const double v_err = rel(s.V, v_ref);
    const double g_err = norm_Y(spec.grid, diff) / norm_Y(spec.grid, g_ref);
    const Eigen::MatrixXd a = Eigen::MatrixXd::Constant(1, 1, -1.0);
    const Eigen::MatrixXd b = Eigen::MatrixXd::Constant(1, 1, 1.0);
    const double p_scalar = solve_riccati(a, b, 1.0, 1.0).P(0, 0);
    const double p_err = std::abs(p_scalar - (std::sqrt(2.0) - 1.0));
    return {v_err <= 1e-4 && g_err <= 1e-4 && p_err <= 1e-8,
            fmt::format("V rel {:.2e}, grad rel {:.2e} (T {}, {} steps); scalar P err {:.2e}", v_err, g_err,
                        s.tg.horizon(), s.tg.steps(), p_err)};
}

// 3
Outcome brute_force_equivalence() {
    Outcome out{true, ""};
    for (NonlinearityKind kind : {NonlinearityKind::Linear, NonlinearityKind::Fisher}) {
        const ProblemSpec spec = problem(1, 2.0, 1.0, kind, 0.1, 0.3);
        const TimeGrid tg(1.0, 4);
        const GridFunction y0{1.0};
        const BruteForceResult bf = brute_force_tiny(spec, y0, tg);
        const OptimalTriple t = optimize(spec, y0, tg);
        double dist = 0.0;
        for (std::size_t k = 0; k < tg.steps(); ++k) dist = std::max(dist, std::abs(t.u[k][0] - bf.best_u[k][0]));
        const bool active = std::abs(control_norm(spec, t.u[0]) - spec.eta) <= 1e-12;
        const bool ok = dist <= bf.refined_cell && t.cost <= bf.best_J + 1e-12 && active;
        out.pass = out.pass && ok;
        out.detail += fmt::format("{}: |u - u_bf|_inf {:.2e} <= cell {:.3g}, J {:.10g} vs {:.10g}; ", to_string(kind),
                                  dist, bf.refined_cell, t.cost, bf.best_J);
    }
    return out;
}

// 4
Outcome feedback_fixed_point() {
    struct Case {
        NonlinearityKind kind;
        double eta;
        double amp;
    };
    Outcome out{true, ""};
    int active_cases = 0;
    double worst = 0.0;
    for (const Case& c : {Case{NonlinearityKind::Linear, kInf, 1.0}, Case{NonlinearityKind::Fisher, kInf, 0.5},
                          Case{NonlinearityKind::Fisher, 0.05, 0.5}, Case{NonlinearityKind::Schlogl, 0.1, 1.0},
                          Case{NonlinearityKind::LipschitzC2, 0.02, 2.0}, Case{NonlinearityKind::Linear, 0.2, 3.0}}) {
        const ProblemSpec spec = problem(31, 1.0, 1.0, c.kind, 0.1, c.eta);
        const GridFunction y0 = eigenmode(spec.grid, 1, c.amp);
        const OptimalTriple t = optimize(spec, y0, TimeGrid(3.0, 150));
        const double bound = 1e-8 * std::max(1.0, norm_Y(spec.grid, y0));
        const ControlTrajectory target = project_control(spec, adjoint_feedback(spec, t.p, 1.0 / spec.alpha));
        const double r = control_norm(spec, t.u - target);
        worst = std::max(worst, r / bound);
        out.pass = out.pass && t.converged && r <= bound;
        if (std::isfinite(c.eta) && std::abs(control_norm(spec, t.u[0]) - c.eta) <= 1e-12) ++active_cases;
    }
    out.pass = out.pass && active_cases >= 2;
    out.detail = fmt::format("worst residual / bound {:.3f} over 6 instances, {} active at t = 0", worst, active_cases);
    return out;
}

// 5
Outcome hjb_residual_check() {
    const ProblemSpec zero_spec = problem(15, 1.0, 1.0, NonlinearityKind::Fisher, 0.5);
    const GridFunction zero(15, 0.0);
    const double r0 = hjb_residual(zero_spec, solve_value(zero_spec, zero, config(2.0, 50, 1e-6, 1e-10)), zero).residual;
    std::vector<double> res;
    for (int level = 0; level < 3; ++level) {
        const std::size_t n = (16u << level) - 1;
        const ProblemSpec spec = problem(n, 1.0, 1.0, NonlinearityKind::Fisher, 0.5);
        const GridFunction y0 = eigenmode(spec.grid, 1, 0.05);
        const ValueSolution s = solve_value(spec, y0, config(2.0, 50u << level, 1e-6, 1e-10));
        res.push_back(hjb_residual(spec, s, y0).residual);
    }
    const bool monotone = res[1] < res[0] && res[2] < res[1];
    const double drop = res[0] / res[2];
    return {r0 == 0.0 && monotone && drop >= 3.0,
            fmt::format("y0 = 0: {}; levels {:.3e} {:.3e} {:.3e}, drop {:.2f}", r0, res[0], res[1], res[2], drop)};
}

// 6
Outcome lipschitz_stability() {
    const ProblemSpec spec = problem(31, 1.0, 1.0, NonlinearityKind::Fisher, 0.1, 0.05);
    const GridFunction y0 = eigenmode(spec.grid, 1, 0.5);
    const SolveConfig cfg = config(3.0, 150, 1e-6, 1e-12);
    const ValueSolution base = solve_value(spec, y0, cfg);
    const RatioTable a = lipschitz_probe(spec, base, y0, 50, 1e-3, cfg.optimizer, {.seed = 5});
    const RatioTable b = lipschitz_probe(spec, base, y0, 50, 1e-4, cfg.optimizer, {.seed = 5});
    bool finite = a.excluded == 0;
    for (const RatioRow& r : a.rows) finite = finite && std::isfinite(r.ratio);
    const double growth = a.max_ratio / b.max_ratio - 1.0;
    return {finite && growth <= 0.25,
            fmt::format("max ratio {:.6g} at 1e-3, {:.6g} at 1e-4 (excess {:.2f}%)", a.max_ratio, b.max_ratio,
                        100.0 * growth)};
}

// 7
Outcome strong_regularity() {
    const ProblemSpec lin = problem(31, 1.0, 1.0, NonlinearityKind::Linear, 0.5);
    const OptimalTriple tl = optimize(lin, eigenmode(lin.grid, 1, 0.5), TimeGrid(2.0, 100), {.tol_opt = 1e-12});
    const RatioTable a = strong_regularity_probe(lin, tl, 100, 1e-3, {.seed = 7});
    const double spread = (a.max_ratio - a.min_ratio) / a.max_ratio;

    const ProblemSpec fis = problem(31, 1.0, 1.0, NonlinearityKind::Fisher, 0.1, 0.05);
    const OptimalTriple tf = optimize(fis, eigenmode(fis.grid, 1, 0.5), TimeGrid(2.0, 100), {.tol_opt = 1e-12});
    const RatioTable b = strong_regularity_probe(fis, tf, 100, 1e-3, {.seed = 7});
    const bool bounded = std::isfinite(b.max_ratio) && b.excluded == 0;
    return {spread <= 1e-6 && a.excluded == 0 && bounded,
            fmt::format("linear spread {:.2e} over {} pairs; constrained Fisher max ratio {:.6g}", spread,
                        a.rows.size(), b.max_ratio)};
}

// 8
Outcome constrained_stabilizability() {
    const ProblemSpec spec = problem(31, 1.0, 12.0, NonlinearityKind::Fisher, 1.0, 0.5);
    const FeedbackGain gain = build_feedback_gain(spec, GainMethod::Riccati);
    const TimeGrid tg(4.0, 400);
    const SmallnessReport rep = estimate_smallness(spec, gain, tg, {.n_samples = 64, .seed = 3});
    Outcome out{std::isfinite(rep.radius) && rep.radius > 0.0, ""};
    double worst = 0.0;
    for (std::size_t mode : {1u, 2u, 5u}) {
        for (double frac : {0.25, 0.99}) {
            GridFunction y0 = eigenmode(spec.grid, mode);
            y0 = scaled(frac * rep.radius / norm_Y(spec.grid, y0), y0);
            const ClosedLoopResult c = closed_loop_simulate(spec, y0, gain, tg);
            const double ratio = c.w_norm / (2.0 * rep.M_K * norm_Y(spec.grid, y0) * 1.1);
            worst = std::max(worst, ratio);
            out.pass = out.pass && c.admissible && ratio <= 1.0;
        }
    }
    out.detail = fmt::format("radius {:.4g}, M_K {:.4g}, C {:.4g}; worst |y|_W / bound {:.3f}", rep.radius, rep.M_K,
                             rep.C, worst);
    return out;
}

// 9
Outcome dynamic_programming() {
    Outcome out{true, ""};
    for (NonlinearityKind kind : {NonlinearityKind::Linear, NonlinearityKind::Fisher}) {
        const ProblemSpec spec = problem(31, 1.0, 1.0, kind, 0.5, 0.2);
        const GridFunction y0 = eigenmode(spec.grid, 1, 1.0);
        const SolveConfig cfg = config(4.0, 200, 1e-6, 1e-10);
        const ValueSolution s = solve_value(spec, y0, cfg);
        const DpReport d = dynamic_programming_check(spec, s, y0, s.tg.horizon() / 4.0, cfg.optimizer);
        out.pass = out.pass && d.gap <= 10.0 * d.budget;
        out.detail += fmt::format("{}: gap {:.2e}, budget {:.2e}; ", to_string(kind), d.gap, d.budget);
    }
    return out;
}

// 10
Outcome projection_properties() {
    const ProblemSpec spec = problem(16, 1.0, 0.0, NonlinearityKind::Linear, 1.0, 0.7);
    const TimeGrid tg(1.0, 8);
    std::mt19937_64 rng(10);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&] {
        ControlTrajectory v(tg, 16);
        const double scale = std::exp(3.0 * normal(rng));
        for (double& x : v.values()) x = scale * normal(rng);
        return v;
    };
    std::size_t idempotence = 0, expansive = 0;
    for (int i = 0; i < 1000; ++i) {
        const ControlTrajectory v = draw();
        const ControlTrajectory w = draw();
        const ControlTrajectory pv = project_control(spec, v);
        const ControlTrajectory pw = project_control(spec, w);
        if (!(project_control(spec, pv) == pv)) ++idempotence;
        if (control_norm(spec, pv - pw) > control_norm(spec, v - w)) ++expansive;
    }
    return {idempotence == 0 && expansive == 0,
            fmt::format("1000 pairs: {} idempotence failures, {} expansive pairs", idempotence, expansive)};
}

// 11
Outcome hessian_vector_checks() {
    const ProblemSpec fis = problem(31, 1.0, 1.0, NonlinearityKind::Fisher, 0.1);
    const OptimalTriple tf = optimize(fis, eigenmode(fis.grid, 1, 0.5), TimeGrid(2.0, 100));
    std::mt19937_64 rng(17);
    double sym = 0.0;
    for (int i = 0; i < 20; ++i) {
        const ControlTrajectory w1 = random_control(fis, tf.u.time_grid(), rng);
        const ControlTrajectory w2 = random_control(fis, tf.u.time_grid(), rng);
        const double a = control_inner(fis, hessian_vector(fis, tf, w1), w2);
        const double b = control_inner(fis, hessian_vector(fis, tf, w2), w1);
        sym = std::max(sym, std::abs(a - b) / std::max(std::abs(a), std::abs(b)));
    }
    const ProblemSpec lin = problem(31, 1.0, 1.0, NonlinearityKind::Linear, 0.1);
    const OptimalTriple tl = optimize(lin, eigenmode(lin.grid, 1, 0.5), TimeGrid(2.0, 100));
    double ident = 0.0;
    for (int i = 0; i < 20; ++i) {
        const ControlTrajectory w = random_control(lin, tl.u.time_grid(), rng);
        StateTrajectory v;
        const double q = control_inner(lin, hessian_vector(lin, tl, w, &v), w);
        const double ref = state_cost_norm_sq(lin, v) + lin.alpha * control_inner(lin, w, w);
        ident = std::max(ident, std::abs(q - ref) / ref);
    }
    const CoercivityReport c = coercivity_probe(fis, tf, 32, 2);
    return {sym <= 1e-8 && ident <= 1e-10 && c.min_rayleigh > 0.0,
            fmt::format("symmetry {:.2e}, linear identity {:.2e}, min Rayleigh {:.4g}", sym, ident, c.min_rayleigh)};
}

// 12
Outcome determinism() {
    namespace fs = std::filesystem;
    const fs::path configs = fs::path(PARASTAB_SOURCE_DIR) / "configs";
    const fs::path scratch = fs::temp_directory_path() / "parastab_acceptance";
    fs::remove_all(scratch);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    std::size_t compared = 0, differing = 0;
    std::string failures;
    for (const std::string_view sub : cli::subcommands()) {
        const fs::path cfg = configs / (std::string(sub) + ".yaml");
        std::vector<fs::path> outs;
        for (int run = 0; run < 2; ++run) {
            const fs::path dir = scratch / std::string(sub) / std::to_string(run);
            std::ostringstream log, err;
            const int code = cli::run({std::string(sub), "--config", cfg.string(), "--out", dir.string(), "--seed", "42"},
                                      log, err);
            if (code != 0) failures += fmt::format("{} exit {}; ", sub, code);
            outs.push_back(dir);
        }
        for (const auto& entry : fs::directory_iterator(outs[0])) {
            ++compared;
            const fs::path other = outs[1] / entry.path().filename();
            if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) ++differing;
        }
    }
    fs::remove_all(scratch);
    return {failures.empty() && differing == 0 && compared > 0,
            fmt::format("{} subcommands, {} files compared, {} differ{}", cli::subcommands().size(), compared,
                        differing, failures.empty() ? "" : "; " + failures)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gradient identity", gradient_identity},
        {"LQR oracle equivalence", lqr_equivalence},
        {"brute-force equivalence", brute_force_equivalence},
        {"feedback fixed point", feedback_fixed_point},
        {"HJB residual", hjb_residual_check},
        {"Lipschitz stability", lipschitz_stability},
        {"strong regularity", strong_regularity},
        {"constrained stabilizability", constrained_stabilizability},
        {"dynamic programming", dynamic_programming},
        {"projection properties", projection_properties},
        {"Hessian-vector product", hessian_vector_checks},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        fmt::print("[{}] {:2d} {}: {} ({:.1f} s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail, secs);
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed == 0 ? 0 : 1;
}
