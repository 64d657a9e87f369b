#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>

#include "parastab/cli/config.hpp"
#include "parastab/cli/emit.hpp"

namespace parastab::cli {

inline constexpr std::array<std::string_view, 11> kSubcommands = {
    "solve", "closed-loop", "smallness",   "grad-check", "lipschitz",   "hjb",
    "dp-check", "kkt-probe", "coercivity", "lqr-oracle", "brute-oracle"};

inline std::span<const std::string_view> subcommands() { return kSubcommands; }

enum ExitCode : int { kSuccess = 0, kValidationError = 2, kSolverFailure = 3 };

/// Output of one subcommand: the JSON summary plus named CSV tables.
struct Report {
    Json summary;
    std::vector<std::pair<std::string, Table>> tables;
};

namespace detail {

struct Context {
    const ExperimentConfig& cfg;
    ProblemSpec spec;
    GridFunction y0;

    SolveConfig solve_config() const { return {cfg.optimizer, cfg.horizon}; }
    TimeGrid fixed_grid() const { return TimeGrid(cfg.horizon.T, cfg.horizon.n_steps); }
};

inline Json problem_json(const ExperimentConfig& c) {
    Json control;
    control["type"] = c.control.indicator ? "indicator" : "identity";
    if (c.control.indicator) {
        control["a"] = number(c.control.a);
        control["b"] = number(c.control.b);
    }
    Json y0;
    y0["type"] = std::string(to_string(c.y0.type));
    switch (c.y0.type) {
        case InitialState::Type::Eigenmode:
            y0["k"] = c.y0.k;
            y0["amplitude"] = number(c.y0.amplitude);
            break;
        case InitialState::Type::Gaussian:
            y0["center"] = number(c.y0.center);
            y0["width"] = number(c.y0.width);
            y0["amplitude"] = number(c.y0.amplitude);
            break;
        case InitialState::Type::File:
            y0["path"] = c.y0.path.filename().string();
            break;
        case InitialState::Type::Zero:
            break;
    }
    Json p;
    p["kind"] = std::string(to_string(c.kind));
    p["gamma"] = number(c.gamma);
    p["shift"] = number(c.shift);
    p["length"] = number(c.length);
    p["n_interior"] = c.n_interior;
    p["theta"] = number(c.theta);
    p["alpha"] = number(c.alpha);
    p["eta"] = number(c.eta);
    p["control"] = control;
    p["y0"] = y0;
    return p;
}

inline Json horizon_json(const ValueSolution& s) {
    Json h;
    h["T"] = number(s.tg.horizon());
    h["n_steps"] = s.tg.steps();
    h["doublings"] = s.doublings;
    if (s.tail) {
        h["tail_C"] = number(s.tail->C);
        h["tail_omega"] = number(s.tail->omega);
    } else {
        h["tail_C"] = nullptr;
        h["tail_omega"] = nullptr;
    }
    return h;
}

inline Json residuals_json(const ResidualReport& r) {
    Json j;
    j["state_residual"] = number(r.state_residual);
    j["adjoint_residual"] = number(r.adjoint_residual);
    j["projection_residual"] = number(r.projection_residual);
    j["fixed_point_residual"] = number(r.fixed_point_residual);
    j["complementarity_gap"] = number(r.complementarity_gap);
    return j;
}

inline Json ratio_json(const RatioTable& t) {
    Json j;
    j["pairs"] = t.rows.size();
    j["excluded"] = t.excluded;
    j["max_ratio"] = number(t.max_ratio);
    j["min_ratio"] = number(t.min_ratio);
    return j;
}

inline Table ratio_table(const RatioTable& t) {
    Table tab{{"pair_id", "norm_dbeta", "norm_ddelta", "ratio"}, {}};
    for (const RatioRow& r : t.rows) {
        tab.add({static_cast<double>(r.pair_id), r.norm_dbeta, r.norm_ddelta, r.ratio});
    }
    return tab;
}

inline Table trajectory_table(const ProblemSpec& spec, const StateTrajectory& y, const ControlTrajectory& u,
                              const AdjointTrajectory* p) {
    Table tab{{"t", "y_norm", "u_norm"}, {}};
    if (p) tab.header.push_back("p_norm");
    for (std::size_t k = 0; k < y.size(); ++k) {
        // u is piecewise constant on [t_k, t_{k+1}); the last node repeats the last interval
        const std::size_t ku = std::min(k, u.size() - 1);
        std::vector<double> row{y.time(k), norm_Y(spec.grid, y[k]), control_norm(spec, u[ku])};
        if (p) row.push_back(norm_Y(spec.grid, (*p)[k]));
        tab.add(std::move(row));
    }
    return tab;
}

/// Full trajectory, header `t,<prefix>1..<prefix>n`.
template <class Tag>
Table values_table(const Trajectory<Tag>& traj, const std::string& prefix) {
    Table tab{{"t"}, {}};
    for (std::size_t j = 0; j < traj.dim(); ++j) tab.header.push_back(prefix + std::to_string(j + 1));
    for (std::size_t k = 0; k < traj.size(); ++k) {
        std::vector<double> row{traj.time(k)};
        const auto v = traj[k];
        row.insert(row.end(), v.begin(), v.end());
        tab.add(std::move(row));
    }
    return tab;
}

inline Table single_row(const Json& j) {
    Table tab;
    std::vector<double> row;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const Json& v = it.value();
        if (v.is_number()) {
            tab.header.push_back(it.key());
            row.push_back(v.get<double>());
        } else if (v.is_boolean()) {
            tab.header.push_back(it.key());
            row.push_back(v.get<bool>() ? 1.0 : 0.0);
        } else if (v.is_string()) {
            const std::string s = v.get<std::string>();
            if (s == "inf" || s == "-inf" || s == "nan") {
                tab.header.push_back(it.key());
                row.push_back(s == "inf" ? std::numeric_limits<double>::infinity()
                                         : s == "-inf" ? -std::numeric_limits<double>::infinity()
                                                       : std::numeric_limits<double>::quiet_NaN());
            }
        }
    }
    tab.add(std::move(row));
    return tab;
}

inline std::vector<GridFunction> probe_directions(const ExperimentConfig& c, const SpatialGrid& grid) {
    std::vector<GridFunction> dirs;
    for (std::size_t i = 0; i < c.n_directions; ++i) {
        auto rng = sample_rng(c.seed, i);
        dirs.push_back(random_direction(grid, rng));
    }
    return dirs;
}

// -- subcommands -------------------------------------------------------------------

inline Report cmd_solve(const Context& ctx) {
    const ValueSolution s = solve_value(ctx.spec, ctx.y0, ctx.solve_config());
    const OptimalTriple& t = s.triple;
    Json r;
    r["J"] = number(t.cost);
    r["converged"] = t.converged;
    r["iterations"] = t.iterations;
    r["residuals"] = residuals_json(t.residuals);
    r["u_sup"] = number(control_sup_norm(ctx.spec, t.u));
    r["y_final_norm"] = number(norm_Y(ctx.spec.grid, t.y[t.y.size() - 1]));
    r["horizon"] = horizon_json(s);
    return {r,
            {{"trajectory", trajectory_table(ctx.spec, t.y, t.u, &t.p)},
             {"state", values_table(t.y, "x_")},
             {"control", values_table(t.u, "dof_")},
             {"adjoint", values_table(t.p, "x_")}}};
}

inline Report cmd_closed_loop(const Context& ctx) {
    const FeedbackGain gain = build_feedback_gain(ctx.spec, ctx.cfg.gain, ctx.cfg.margin);
    const ClosedLoopResult c = closed_loop_simulate(ctx.spec, ctx.y0, gain, ctx.fixed_grid());
    Json r;
    r["method"] = std::string(to_string(gain.method));
    r["closed_loop_abscissa"] = number(gain.closed_loop_abscissa);
    r["gain_norm"] = number(gain_norm(ctx.spec, gain));
    r["admissible"] = c.admissible;
    r["sup_control"] = number(c.sup_control);
    r["cost"] = number(c.cost);
    r["w_norm"] = number(c.w_norm);
    try {
        const TailFit fit = tail_decay_fit(ctx.spec.grid, c.y, 0.5 * ctx.cfg.horizon.T);
        r["decay_omega"] = number(fit.omega);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::FitUnreliable) throw;
        r["decay_omega"] = nullptr;
    }
    return {r,
            {{"trajectory", trajectory_table(ctx.spec, c.y, c.u, nullptr)},
             {"state", values_table(c.y, "x_")},
             {"control", values_table(c.u, "dof_")}}};
}

inline Report cmd_smallness(const Context& ctx) {
    const FeedbackGain gain = build_feedback_gain(ctx.spec, ctx.cfg.gain, ctx.cfg.margin);
    const TimeGrid tg = ctx.fixed_grid();
    const SmallnessReport s =
        estimate_smallness(ctx.spec, gain, tg, {ctx.cfg.smallness_samples, ctx.cfg.delta, ctx.cfg.seed});
    Json r;
    r["method"] = std::string(to_string(gain.method));
    r["C"] = number(s.C);
    r["M_K"] = number(s.M_K);
    r["norm_K"] = number(s.norm_K);
    r["norm_embed"] = number(s.norm_embed);
    r["radius_stability"] = number(s.radius_stability);
    r["radius_admissibility"] = number(s.radius_admissibility);
    r["radius"] = number(s.radius);
    r["samples_C"] = s.samples.C;
    r["samples_M_K"] = s.samples.M_K;
    const double y0_norm = norm_Y(ctx.spec.grid, ctx.y0);
    r["y0_norm"] = number(y0_norm);
    r["within_radius"] = y0_norm <= s.radius;
    const ClosedLoopResult c = closed_loop_simulate(ctx.spec, ctx.y0, gain, tg);
    r["admissible"] = c.admissible;
    r["w_norm"] = number(c.w_norm);
    r["w_bound"] = number(2.0 * s.M_K * y0_norm);
    r["bound_holds"] = c.w_norm <= 2.0 * s.M_K * y0_norm * 1.1;
    Json row = r;
    return {r, {{"smallness", single_row(row)}}};
}

inline Report cmd_grad_check(const Context& ctx) {
    const ValueSolution s = solve_value(ctx.spec, ctx.y0, ctx.solve_config());
    const FdReport fd = fd_gradient_check(ctx.spec, s, ctx.y0, probe_directions(ctx.cfg, ctx.spec.grid),
                                          ctx.cfg.eps_list, ctx.cfg.optimizer);
    Json r;
    r["V"] = number(fd.V);
    r["observed_order"] = number(fd.observed_order);
    Json orders = Json::array();
    for (double o : fd.orders) orders.push_back(number(o));
    r["orders"] = orders;
    Json max_err = Json::object();
    for (double eps : ctx.cfg.eps_list) {
        double m = 0.0;
        for (const FdRow& row : fd.rows) {
            if (row.eps == eps) m = std::max(m, row.abs_err);
        }
        max_err[format_double(eps)] = number(m);
    }
    r["max_abs_err"] = max_err;
    r["horizon"] = horizon_json(s);
    Table rows{{"direction", "eps", "fd", "inner", "abs_err", "noise"}, {}};
    for (const FdRow& row : fd.rows) {
        rows.add({static_cast<double>(row.direction), row.eps, row.fd, row.inner, row.abs_err, row.noise});
    }
    Table grad{{"x", "grad", "minus_p0"}, {}};
    for (std::size_t i = 0; i < ctx.y0.size(); ++i) {
        grad.add({ctx.spec.grid.node(i), s.grad[i], -s.triple.p[0][i]});
    }
    return {r, {{"fd", rows}, {"gradient", grad}}};
}

inline Report cmd_lipschitz(const Context& ctx) {
    const ValueSolution s = solve_value(ctx.spec, ctx.y0, ctx.solve_config());
    const RatioTable t = lipschitz_probe(ctx.spec, s, ctx.y0, ctx.cfg.lipschitz_pairs, ctx.cfg.lipschitz_radius,
                                         ctx.cfg.optimizer, {ctx.cfg.seed, ctx.cfg.lipschitz_pair_mode});
    Json r = ratio_json(t);
    r["radius"] = number(ctx.cfg.lipschitz_radius);
    r["pair_mode"] = std::string(to_string(ctx.cfg.lipschitz_pair_mode));
    r["horizon"] = horizon_json(s);
    return {r, {{"ratios", ratio_table(t)}}};
}

inline Report cmd_hjb(const Context& ctx) {
    const ValueSolution s = solve_value(ctx.spec, ctx.y0, ctx.solve_config());
    const HjbReport h = hjb_residual(ctx.spec, s, ctx.y0);
    Json r;
    r["residual"] = number(h.residual);
    r["drift_term"] = number(h.drift_term);
    r["state_term"] = number(h.state_term);
    r["control_term"] = number(h.control_term);
    r["coupling_term"] = number(h.coupling_term);
    r["feedback_consistency"] = number(h.feedback_consistency);
    r["V"] = number(s.V);
    Json row = r;
    r["horizon"] = horizon_json(s);
    return {r, {{"hjb", single_row(row)}}};
}

inline Report cmd_dp_check(const Context& ctx) {
    const ValueSolution s = solve_value(ctx.spec, ctx.y0, ctx.solve_config());
    const double tau = ctx.cfg.tau.value_or(s.tg.horizon() / 4.0);
    const DpReport d = dynamic_programming_check(ctx.spec, s, ctx.y0, tau, ctx.cfg.optimizer);
    Json r;
    r["tau"] = number(d.tau);
    r["V0"] = number(d.V0);
    r["running_cost"] = number(d.running_cost);
    r["V_tau"] = number(d.V_tau);
    r["gap"] = number(d.gap);
    r["tail_term"] = number(d.tail_term);
    r["solver_term"] = number(d.solver_term);
    r["budget"] = number(d.budget);
    r["within_budget"] = d.gap <= 10.0 * d.budget;
    Json row = r;
    r["horizon"] = horizon_json(s);
    return {r, {{"dp", single_row(row)}}};
}

inline Report cmd_kkt_probe(const Context& ctx) {
    const ValueSolution s = solve_value(ctx.spec, ctx.y0, ctx.solve_config());
    KktOptions ko;
    ko.tol_kkt = ctx.cfg.tol_kkt;
    ko.seed = ctx.cfg.seed;
    const RatioTable t = strong_regularity_probe(ctx.spec, s.triple, ctx.cfg.kkt_pairs, ctx.cfg.kkt_radius,
                                                 {ctx.cfg.seed, ctx.cfg.kkt_pair_mode}, ko);
    Json r = ratio_json(t);
    r["radius"] = number(ctx.cfg.kkt_radius);
    r["pair_mode"] = std::string(to_string(ctx.cfg.kkt_pair_mode));
    r["relative_spread"] = number(t.max_ratio > 0.0 ? (t.max_ratio - t.min_ratio) / t.max_ratio : 0.0);
    r["horizon"] = horizon_json(s);
    return {r, {{"ratios", ratio_table(t)}}};
}

inline Report cmd_coercivity(const Context& ctx) {
    const ValueSolution s = solve_value(ctx.spec, ctx.y0, ctx.solve_config());
    const CoercivityReport c = coercivity_probe(ctx.spec, s.triple, ctx.cfg.coercivity_samples, ctx.cfg.seed);
    Json r;
    r["samples"] = c.samples;
    r["min_rayleigh"] = number(c.min_rayleigh);
    r["gamma_bar_estimate"] = number(c.gamma_bar_estimate);
    Json row = r;
    r["horizon"] = horizon_json(s);
    return {r, {{"coercivity", single_row(row)}}};
}

inline Report cmd_lqr_oracle(const Context& ctx) {
    const RiccatiSolution ric = solve_riccati(ctx.spec);
    const auto [v, g] = lqr_value_and_gradient(ric.P, ctx.spec.h(), ctx.y0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (ric.P + ric.P.transpose()));
    Json r;
    r["riccati_residual"] = number(ric.residual);
    r["iterations"] = ric.iterations;
    r["P_min_eigenvalue"] = number(es.eigenvalues().minCoeff());
    r["P_max_eigenvalue"] = number(es.eigenvalues().maxCoeff());
    r["V_lqr"] = number(v);
    Table tab{{"x", "lqr_grad"}, {}};
    const bool compare = ctx.spec.nl.is_linear() && ctx.spec.unconstrained();
    std::optional<ValueSolution> s;
    if (compare) {
        s = solve_value(ctx.spec, ctx.y0, ctx.solve_config());
        tab.header.push_back("solver_grad");
        GridFunction diff = s->grad;
        axpy(-1.0, g, diff);
        const double gn = norm_Y(ctx.spec.grid, g);
        r["V_solver"] = number(s->V);
        r["V_rel_error"] = number(v != 0.0 ? std::abs(s->V - v) / std::abs(v) : std::abs(s->V));
        r["grad_rel_error"] = number(gn > 0.0 ? norm_Y(ctx.spec.grid, diff) / gn : norm_Y(ctx.spec.grid, diff));
        r["horizon"] = horizon_json(*s);
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::vector<double> row{ctx.spec.grid.node(i), g[i]};
        if (compare) row.push_back(s->grad[i]);
        tab.add(std::move(row));
    }
    return {r, {{"gradient", tab}}};
}

inline Report cmd_brute_oracle(const Context& ctx) {
    const TimeGrid tg = ctx.fixed_grid();
    const BruteForceResult bf = brute_force_tiny(ctx.spec, ctx.y0, tg, ctx.cfg.brute);
    const OptimalTriple t = optimize(ctx.spec, ctx.y0, tg, ctx.cfg.optimizer);
    double dist = 0.0;
    Table tab{{"k", "j", "u_brute", "u_optimize"}, {}};
    for (std::size_t k = 0; k < tg.steps(); ++k) {
        for (std::size_t j = 0; j < ctx.spec.control_dim(); ++j) {
            dist = std::max(dist, std::abs(bf.best_u[k][j] - t.u[k][j]));
            tab.add({static_cast<double>(k), static_cast<double>(j), bf.best_u[k][j], t.u[k][j]});
        }
    }
    Json r;
    r["best_J"] = number(bf.best_J);
    r["optimize_J"] = number(t.cost);
    r["max_control_distance"] = number(dist);
    r["cell"] = number(bf.cell);
    r["refined_cell"] = number(bf.refined_cell);
    r["evaluated"] = bf.evaluated;
    r["within_cell"] = dist <= bf.refined_cell;
    return {r, {{"controls", tab}}};
}

inline Report dispatch(std::string_view sub, const Context& ctx) {
    if (sub == "solve") return cmd_solve(ctx);
    if (sub == "closed-loop") return cmd_closed_loop(ctx);
    if (sub == "smallness") return cmd_smallness(ctx);
    if (sub == "grad-check") return cmd_grad_check(ctx);
    if (sub == "lipschitz") return cmd_lipschitz(ctx);
    if (sub == "hjb") return cmd_hjb(ctx);
    if (sub == "dp-check") return cmd_dp_check(ctx);
    if (sub == "kkt-probe") return cmd_kkt_probe(ctx);
    if (sub == "coercivity") return cmd_coercivity(ctx);
    if (sub == "lqr-oracle") return cmd_lqr_oracle(ctx);
    return cmd_brute_oracle(ctx);
}

}  // namespace detail

/// Runs one subcommand on a loaded config and returns the summary and tables.
inline Report execute(std::string_view sub, const ExperimentConfig& cfg) {
    detail::Context ctx{cfg, make_spec(cfg), {}};
    ctx.y0 = make_initial_state(cfg, ctx.spec.grid);
    Report rep = detail::dispatch(sub, ctx);
    Json summary;
    summary["subcommand"] = std::string(sub);
    summary["seed"] = cfg.seed;
    summary["problem"] = detail::problem_json(cfg);
    summary["result"] = std::move(rep.summary);
    rep.summary = std::move(summary);
    return rep;
}

/// Entry point behind the executable: `args` excludes the program name.
/// Exit codes: 0 success, 2 validation error, 3 solver failure.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stabilization, value-function and sensitivity probes for semilinear parabolic control"};
    std::string sub;
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::string formats = "json,csv";
    std::string names;
    for (std::string_view s : kSubcommands) names += (names.empty() ? "" : ", ") + std::string(s);
    app.add_option("subcommand", sub, "one of: " + names)->required();
    app.add_option("--config", config_path, "YAML experiment config")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "overrides the config seed");
    app.add_option("--format", formats, "comma-separated subset of json,csv");
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kSuccess;
        }
        err << "error: " << e.what() << "\n";
        return kValidationError;
    }
    if (std::find(kSubcommands.begin(), kSubcommands.end(), sub) == kSubcommands.end()) {
        err << "error: unknown subcommand '" << sub << "' (expected one of: " << names << ")\n";
        return kValidationError;
    }
    bool json = false, csv = false;
    {
        std::stringstream ss(formats);
        std::string f;
        while (std::getline(ss, f, ',')) {
            if (f == "json") json = true;
            else if (f == "csv") csv = true;
            else {
                err << "error: --format: unknown format '" << f << "' (expected json, csv)\n";
                return kValidationError;
            }
        }
    }
    try {
        ExperimentConfig cfg = load_config(config_path);
        if (seed) cfg.seed = *seed;
        const Report rep = execute(sub, cfg);
        const std::filesystem::path dir(out_dir);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
        if (json) {
            write_file(dir / "summary.json", to_json_text(rep.summary));
            out << "wrote " << (dir / "summary.json").string() << "\n";
        }
        if (csv) {
            for (const auto& [name, table] : rep.tables) {
                write_file(dir / (name + ".csv"), to_csv_text(table));
                out << "wrote " << (dir / (name + ".csv")).string() << "\n";
            }
        }
        return kSuccess;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kValidationError;
    } catch (const Error& e) {
        err << (e.is_validation() ? "invalid input: " : "solver failure: ") << e.what() << "\n";
        return e.is_validation() ? kValidationError : kSolverFailure;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << "\n";
        return kSolverFailure;
    }
}

}  // namespace parastab::cli
