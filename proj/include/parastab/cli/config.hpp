#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "parastab/oracle.hpp"
#include "parastab/second_order.hpp"
#include "parastab/stabilization.hpp"
#include "parastab/value_function.hpp"

namespace parastab::cli {

/// Schema or value violation in a config file; the message starts with file:line:column.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct InitialState {
    enum class Type { Zero, Eigenmode, Gaussian, File };
    Type type = Type::Eigenmode;
    std::size_t k = 1;
    double amplitude = 1.0;
    double center = 0.5;
    double width = 0.1;
    std::filesystem::path path;
};

struct ControlShape {
    bool indicator = false;
    double a = 0.0;
    double b = 1.0;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::filesystem::path source;

    // pde_core
    NonlinearityKind kind = NonlinearityKind::Fisher;
    double gamma = 1.0;
    double shift = 1.0;
    double length = 1.0;
    std::size_t n_interior = 31;
    double theta = 1.0;
    double alpha = 0.1;
    double eta = std::numeric_limits<double>::infinity();
    ControlShape control;
    InitialState y0;

    // stabilization
    GainMethod gain = GainMethod::Riccati;
    double margin = 0.5;
    std::size_t smallness_samples = 64;
    double delta = 0.1;

    // optimizer
    OptimizerConfig optimizer;
    std::size_t kkt_pairs = 20;
    double kkt_radius = 1e-3;
    PairMode kkt_pair_mode = PairMode::Shared;
    double tol_kkt = 1e-10;
    std::size_t coercivity_samples = 16;

    // value_function
    HorizonPolicy horizon;
    std::vector<double> eps_list{1e-3, 1e-4};
    std::size_t n_directions = 5;
    std::size_t lipschitz_pairs = 20;
    double lipschitz_radius = 1e-3;
    PairMode lipschitz_pair_mode = PairMode::Shared;
    std::optional<double> tau;

    // oracle
    BruteForceOptions brute;
};

inline constexpr std::string_view to_string(PairMode m) { return m == PairMode::Shared ? "shared" : "independent"; }

inline constexpr std::string_view to_string(InitialState::Type t) {
    switch (t) {
        case InitialState::Type::Zero: return "zero";
        case InitialState::Type::Eigenmode: return "eigenmode";
        case InitialState::Type::Gaussian: return "gaussian";
        case InitialState::Type::File: return "file";
    }
    return "zero";
}

namespace detail {

class Reader {
public:
    explicit Reader(std::string file) : file_(std::move(file)) {}

    [[noreturn]] void fail(const YAML::Node& at, const std::string& key, const std::string& msg) const {
        std::ostringstream os;
        os << file_;
        const YAML::Mark m = at.Mark();
        if (!m.is_null()) {
            os << ':' << m.line + 1 << ':' << m.column + 1;
        }
        os << ": " << key << ": " << msg;
        throw ConfigError(os.str());
    }

    /// Rejects keys outside `allowed`.
    void check_keys(const YAML::Node& map, const std::string& where, const std::set<std::string>& allowed) const {
        if (!map.IsMap()) {
            fail(map, where, "expected a mapping");
        }
        for (const auto& kv : map) {
            const std::string key = kv.first.as<std::string>();
            if (!allowed.contains(key)) {
                fail(kv.first, where.empty() ? key : where + "." + key, "unknown key");
            }
        }
    }

    template <class T>
    void get(const YAML::Node& map, const std::string& where, const std::string& key, T& out) const {
        const YAML::Node n = map[key];
        if (!n) {
            return;
        }
        try {
            out = n.as<T>();
        } catch (const YAML::Exception&) {
            fail(n, where + "." + key, "cannot read value '" + scalar(n) + "'");
        }
    }

    void get_size(const YAML::Node& map, const std::string& where, const std::string& key, std::size_t& out) const {
        const YAML::Node n = map[key];
        if (!n) {
            return;
        }
        long long v = 0;
        try {
            v = n.as<long long>();
        } catch (const YAML::Exception&) {
            fail(n, where + "." + key, "expected a nonnegative integer, got '" + scalar(n) + "'");
        }
        if (v < 0) {
            fail(n, where + "." + key, "must be >= 0");
        }
        out = static_cast<std::size_t>(v);
    }

    void check(bool ok, const YAML::Node& map, const std::string& where, const std::string& key,
               const std::string& msg) const {
        if (!ok) {
            const YAML::Node n = map[key];
            fail(n ? n : map, where + "." + key, msg);
        }
    }

    static std::string scalar(const YAML::Node& n) { return n.IsScalar() ? n.Scalar() : std::string("<non-scalar>"); }

private:
    std::string file_;
};

inline PairMode read_pair_mode(const Reader& r, const YAML::Node& sec, const std::string& where) {
    std::string mode = "shared";
    r.get(sec, where, "pair_mode", mode);
    if (mode == "shared") return PairMode::Shared;
    if (mode == "independent") return PairMode::Independent;
    r.fail(sec["pair_mode"], where + ".pair_mode", "expected shared or independent, got '" + mode + "'");
}

}  // namespace detail

/// Parses and validates a YAML config with sections pde_core, stabilization, optimizer,
/// value_function and oracle plus a top-level seed. Missing keys keep their defaults.
inline ExperimentConfig parse_config(const std::string& text, const std::string& file = "<config>") {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(file + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                          ": " + e.msg);
    }
    const detail::Reader r(file);
    ExperimentConfig c;
    if (root.IsNull()) {
        return c;
    }
    r.check_keys(root, "", {"seed", "pde_core", "stabilization", "optimizer", "value_function", "oracle"});
    if (root["seed"]) {
        unsigned long long seed = 0;
        try {
            seed = root["seed"].as<unsigned long long>();
        } catch (const YAML::Exception&) {
            r.fail(root["seed"], "seed", "expected a nonnegative integer");
        }
        c.seed = seed;
    }

    if (const YAML::Node s = root["pde_core"]) {
        const std::string w = "pde_core";
        r.check_keys(s, w, {"kind", "gamma", "shift", "length", "n_interior", "theta", "alpha", "eta", "control", "y0"});
        std::string kind(to_string(c.kind));
        r.get(s, w, "kind", kind);
        const auto k = parse_nonlinearity_kind(kind);
        r.check(k.has_value(), s, w, "kind", "expected linear, fisher, schlogl or lipschitz_c2, got '" + kind + "'");
        c.kind = *k;
        r.get(s, w, "gamma", c.gamma);
        r.get(s, w, "shift", c.shift);
        r.get(s, w, "length", c.length);
        r.get_size(s, w, "n_interior", c.n_interior);
        r.get(s, w, "theta", c.theta);
        r.get(s, w, "alpha", c.alpha);
        r.get(s, w, "eta", c.eta);
        r.check(std::isfinite(c.gamma) && c.gamma > 0.0, s, w, "gamma", "must be > 0");
        r.check(std::isfinite(c.shift), s, w, "shift", "must be finite");
        r.check(std::isfinite(c.length) && c.length > 0.0, s, w, "length", "must be > 0");
        r.check(c.n_interior >= 1, s, w, "n_interior", "must be >= 1");
        r.check(c.theta >= 0.5 && c.theta <= 1.0, s, w, "theta", "must lie in [0.5, 1]");
        r.check(std::isfinite(c.alpha) && c.alpha > 0.0, s, w, "alpha", "must be > 0");
        r.check(c.eta > 0.0, s, w, "eta", "must be > 0");

        if (const YAML::Node b = s["control"]) {
            const std::string wb = w + ".control";
            r.check_keys(b, wb, {"type", "a", "b"});
            std::string type = "identity";
            r.get(b, wb, "type", type);
            r.check(type == "identity" || type == "indicator", b, wb, "type",
                    "expected identity or indicator, got '" + type + "'");
            c.control.indicator = type == "indicator";
            c.control.b = c.length;
            r.get(b, wb, "a", c.control.a);
            r.get(b, wb, "b", c.control.b);
            if (c.control.indicator) {
                r.check(c.control.a >= 0.0 && c.control.a < c.control.b && c.control.b <= c.length, b, wb, "b",
                        "indicator needs 0 <= a < b <= length");
                const SpatialGrid grid(c.n_interior, c.length);
                bool any = false;
                for (double x : grid.nodes()) any = any || (x >= c.control.a && x <= c.control.b);
                r.check(any, b, wb, "b", "indicator support contains no grid node");
            }
        }
        if (const YAML::Node y = s["y0"]) {
            const std::string wy = w + ".y0";
            r.check_keys(y, wy, {"type", "k", "amplitude", "center", "width", "path"});
            std::string type(to_string(c.y0.type));
            r.get(y, wy, "type", type);
            if (type == "zero") c.y0.type = InitialState::Type::Zero;
            else if (type == "eigenmode") c.y0.type = InitialState::Type::Eigenmode;
            else if (type == "gaussian") c.y0.type = InitialState::Type::Gaussian;
            else if (type == "file") c.y0.type = InitialState::Type::File;
            else r.fail(y["type"], wy + ".type", "expected zero, eigenmode, gaussian or file, got '" + type + "'");
            r.get_size(y, wy, "k", c.y0.k);
            r.get(y, wy, "amplitude", c.y0.amplitude);
            r.get(y, wy, "center", c.y0.center);
            r.get(y, wy, "width", c.y0.width);
            std::string path;
            r.get(y, wy, "path", path);
            r.check(std::isfinite(c.y0.amplitude), y, wy, "amplitude", "must be finite");
            r.check(c.y0.k >= 1 && c.y0.k <= c.n_interior, y, wy, "k", "must lie in 1..n_interior");
            r.check(std::isfinite(c.y0.width) && c.y0.width > 0.0, y, wy, "width", "must be > 0");
            if (c.y0.type == InitialState::Type::File) {
                r.check(!path.empty(), y, wy, "path", "file initial state needs a path");
                std::filesystem::path p(path);
                if (p.is_relative()) p = std::filesystem::path(file).parent_path() / p;
                c.y0.path = p;
            }
        }
    }

    if (const YAML::Node s = root["stabilization"]) {
        const std::string w = "stabilization";
        r.check_keys(s, w, {"gain", "margin", "n_samples", "delta"});
        std::string gain(to_string(c.gain));
        r.get(s, w, "gain", gain);
        const auto g = parse_gain_method(gain);
        r.check(g.has_value(), s, w, "gain", "expected zero, shift or riccati, got '" + gain + "'");
        c.gain = *g;
        r.get(s, w, "margin", c.margin);
        r.get_size(s, w, "n_samples", c.smallness_samples);
        r.get(s, w, "delta", c.delta);
        r.check(std::isfinite(c.margin) && c.margin > 0.0, s, w, "margin", "must be > 0");
        r.check(c.smallness_samples >= 1, s, w, "n_samples", "must be >= 1");
        r.check(c.delta > 0.0 && c.delta <= 1.0, s, w, "delta", "must lie in (0, 1]");
    }

    if (const YAML::Node s = root["optimizer"]) {
        const std::string w = "optimizer";
        r.check_keys(s, w, {"tol_opt", "max_iter", "active_tol", "kkt_pairs", "kkt_radius", "pair_mode", "tol_kkt",
                            "coercivity_samples"});
        r.get(s, w, "tol_opt", c.optimizer.tol_opt);
        r.get(s, w, "max_iter", c.optimizer.max_iter);
        r.get(s, w, "active_tol", c.optimizer.active_tol);
        r.get_size(s, w, "kkt_pairs", c.kkt_pairs);
        r.get(s, w, "kkt_radius", c.kkt_radius);
        c.kkt_pair_mode = detail::read_pair_mode(r, s, w);
        r.get(s, w, "tol_kkt", c.tol_kkt);
        r.get_size(s, w, "coercivity_samples", c.coercivity_samples);
        r.check(c.optimizer.tol_opt > 0.0, s, w, "tol_opt", "must be > 0");
        r.check(c.optimizer.max_iter >= 1, s, w, "max_iter", "must be >= 1");
        r.check(c.optimizer.active_tol > 0.0, s, w, "active_tol", "must be > 0");
        r.check(c.kkt_radius > 0.0, s, w, "kkt_radius", "must be > 0");
        r.check(c.tol_kkt > 0.0, s, w, "tol_kkt", "must be > 0");
    }

    if (const YAML::Node s = root["value_function"]) {
        const std::string w = "value_function";
        r.check_keys(s, w, {"auto_tail", "T", "n_steps", "tail_tol", "max_steps", "eps_list", "n_directions",
                            "lipschitz_pairs", "lipschitz_radius", "pair_mode", "tau"});
        r.get(s, w, "auto_tail", c.horizon.auto_tail);
        r.get(s, w, "T", c.horizon.T);
        r.get_size(s, w, "n_steps", c.horizon.n_steps);
        r.get(s, w, "tail_tol", c.horizon.tail_tol);
        r.get_size(s, w, "max_steps", c.horizon.max_steps);
        r.get(s, w, "eps_list", c.eps_list);
        r.get_size(s, w, "n_directions", c.n_directions);
        r.get_size(s, w, "lipschitz_pairs", c.lipschitz_pairs);
        r.get(s, w, "lipschitz_radius", c.lipschitz_radius);
        c.lipschitz_pair_mode = detail::read_pair_mode(r, s, w);
        if (s["tau"]) {
            double tau = 0.0;
            r.get(s, w, "tau", tau);
            c.tau = tau;
        }
        r.check(std::isfinite(c.horizon.T) && c.horizon.T > 0.0, s, w, "T", "must be > 0");
        r.check(c.horizon.n_steps >= 1, s, w, "n_steps", "must be >= 1");
        r.check(c.horizon.tail_tol > 0.0, s, w, "tail_tol", "must be > 0");
        r.check(c.horizon.max_steps >= c.horizon.n_steps, s, w, "max_steps", "must be >= n_steps");
        r.check(!c.eps_list.empty(), s, w, "eps_list", "must not be empty");
        for (double e : c.eps_list) r.check(std::isfinite(e) && e > 0.0, s, w, "eps_list", "entries must be > 0");
        r.check(c.lipschitz_radius > 0.0, s, w, "lipschitz_radius", "must be > 0");
        r.check(!c.tau || (*c.tau > 0.0 && *c.tau <= c.horizon.T), s, w, "tau", "must lie in (0, T]");
    }

    if (const YAML::Node s = root["oracle"]) {
        const std::string w = "oracle";
        r.check_keys(s, w, {"points", "refine", "max_enumeration", "range"});
        r.get_size(s, w, "points", c.brute.points);
        r.get(s, w, "refine", c.brute.refine);
        r.get(s, w, "max_enumeration", c.brute.max_enumeration);
        if (s["range"]) {
            std::vector<double> range;
            r.get(s, w, "range", range);
            r.check(range.size() == 2 && std::isfinite(range[0]) && std::isfinite(range[1]) && range[0] < range[1], s,
                    w, "range", "expected [lo, hi] with lo < hi");
            c.brute.range = std::pair{range[0], range[1]};
        }
        r.check(c.brute.points >= 2, s, w, "points", "must be >= 2");
        r.check(c.brute.max_enumeration >= 1.0, s, w, "max_enumeration", "must be >= 1");
    }
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path.string() + ": cannot open config file");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    ExperimentConfig c = parse_config(ss.str(), path.string());
    c.source = path;
    return c;
}

// -- instantiation --------------------------------------------------------------

inline ProblemSpec make_spec(const ExperimentConfig& c) {
    const SpatialGrid grid(c.n_interior, c.length);
    ProblemSpec spec = make_problem(grid, c.shift, Nonlinearity(c.kind, c.gamma), c.alpha, c.eta, c.theta);
    if (c.control.indicator) {
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c.n_interior), 1);
        for (std::size_t i = 0; i < c.n_interior; ++i) {
            const double x = grid.node(i);
            if (x >= c.control.a && x <= c.control.b) b(static_cast<Eigen::Index>(i), 0) = 1.0;
        }
        spec.control = ControlOperator::dense(grid, std::move(b), 1.0);
    }
    spec.validate();
    return spec;
}

inline GridFunction make_initial_state(const ExperimentConfig& c, const SpatialGrid& grid) {
    const InitialState& s = c.y0;
    switch (s.type) {
        case InitialState::Type::Zero:
            return GridFunction(grid.size(), 0.0);
        case InitialState::Type::Eigenmode:
            return eigenmode(grid, s.k, s.amplitude);
        case InitialState::Type::Gaussian: {
            GridFunction y(grid.size());
            for (std::size_t i = 0; i < y.size(); ++i) {
                const double d = (grid.node(i) - s.center) / s.width;
                y[i] = s.amplitude * std::exp(-0.5 * d * d);
            }
            return y;
        }
        case InitialState::Type::File: {
            std::ifstream in(s.path);
            if (!in) {
                throw ConfigError(s.path.string() + ": cannot open initial state file");
            }
            GridFunction y;
            std::string token;
            while (in >> token) {
                for (char& ch : token) {
                    if (ch == ',') ch = ' ';
                }
                std::istringstream ts(token);
                double v = 0.0;
                while (ts >> v) y.push_back(v);
            }
            if (y.size() != grid.size()) {
                throw ConfigError(s.path.string() + ": expected " + std::to_string(grid.size()) + " values, got " +
                                  std::to_string(y.size()));
            }
            return y;
        }
    }
    return GridFunction(grid.size(), 0.0);
}

}  // namespace parastab::cli
