#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <parastab/cli/config.hpp>

using namespace parastab;
using namespace parastab::cli;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config(text, "t.yaml");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
    const ExperimentConfig c = parse_config("", "t.yaml");
    EXPECT_EQ(c.kind, NonlinearityKind::Fisher);
    EXPECT_EQ(c.n_interior, 31u);
    EXPECT_TRUE(std::isinf(c.eta));
    EXPECT_EQ(c.kkt_pair_mode, PairMode::Shared);
}

TEST(Config, ReadsAllSections) {
    const ExperimentConfig c = parse_config(R"(seed: 9
pde_core:
  kind: schlogl
  n_interior: 12
  theta: 0.5
  alpha: 0.25
  eta: 0.4
stabilization: {gain: shift, margin: 0.3}
optimizer: {tol_opt: 1.0e-9, max_iter: 77, pair_mode: independent}
value_function: {T: 3.0, n_steps: 60, eps_list: [0.1, 0.01], tau: 0.5}
)",
                                            "t.yaml");
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.kind, NonlinearityKind::Schlogl);
    EXPECT_EQ(c.n_interior, 12u);
    EXPECT_DOUBLE_EQ(c.theta, 0.5);
    EXPECT_DOUBLE_EQ(c.eta, 0.4);
    EXPECT_EQ(c.gain, GainMethod::Shift);
    EXPECT_DOUBLE_EQ(c.margin, 0.3);
    EXPECT_DOUBLE_EQ(c.optimizer.tol_opt, 1e-9);
    EXPECT_EQ(c.optimizer.max_iter, 77);
    EXPECT_EQ(c.kkt_pair_mode, PairMode::Independent);
    ASSERT_EQ(c.eps_list.size(), 2u);
    ASSERT_TRUE(c.tau.has_value());
    EXPECT_DOUBLE_EQ(*c.tau, 0.5);
}

TEST(Config, ErrorsAreLineAnchoredAndNameTheKey) {
    const std::string e = error_of("seed: 1\npde_core:\n  kind: fisher\n  alpha: -1\n");
    EXPECT_EQ(e.rfind("t.yaml:4:", 0), 0u) << e;
    EXPECT_NE(e.find("pde_core.alpha"), std::string::npos) << e;
}

TEST(Config, RejectsUnknownKeys) {
    EXPECT_NE(error_of("pde_core: {kind: fisher, alfa: 1}\n").find("pde_core.alfa"), std::string::npos);
    EXPECT_NE(error_of("extras: 1\n").find("extras"), std::string::npos);
}

TEST(Config, RejectsBadValues) {
    EXPECT_FALSE(error_of("pde_core: {theta: 0.3}\n").empty());
    EXPECT_FALSE(error_of("pde_core: {n_interior: 0}\n").empty());
    EXPECT_FALSE(error_of("pde_core: {kind: burgers}\n").empty());
    EXPECT_FALSE(error_of("seed: -4\n").empty());
    EXPECT_FALSE(error_of("pde_core: {alpha: abc}\n").empty());
    EXPECT_FALSE(error_of("pde_core: {control: {type: indicator, a: 0.6, b: 0.2}}\n").empty());
    EXPECT_FALSE(error_of("pde_core: [1, 2\n").empty());
}

TEST(Config, IndicatorControlIsSupportSum) {
    const ExperimentConfig c =
        parse_config("pde_core: {n_interior: 9, control: {type: indicator, a: 0.25, b: 0.55}}\n", "t.yaml");
    const ProblemSpec spec = make_spec(c);
    ASSERT_EQ(spec.control_dim(), 1u);
    const SpatialGrid grid(9, 1.0);
    GridFunction p(9);
    double expect = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
        p[i] = std::sin(1.0 + static_cast<double>(i));
        if (grid.node(i) >= 0.25 && grid.node(i) <= 0.55) expect += grid.h() * p[i];
    }
    double out = 0.0;
    spec.control.adjoint(p, std::span<double>(&out, 1));
    EXPECT_NEAR(out, expect, 1e-15);
}

TEST(Config, InitialStateFromFile) {
    const auto path = std::filesystem::temp_directory_path() / "parastab_y0_test.txt";
    {
        std::ofstream f(path);
        f << "1, 2\n3 4,5\n";
    }
    ExperimentConfig c = parse_config("pde_core: {n_interior: 5}\n", "t.yaml");
    c.y0.type = InitialState::Type::File;
    c.y0.path = path;
    const GridFunction y = make_initial_state(c, SpatialGrid(5, 1.0));
    EXPECT_EQ(y, (GridFunction{1, 2, 3, 4, 5}));
    EXPECT_THROW(make_initial_state(c, SpatialGrid(4, 1.0)), ConfigError);
}

TEST(Config, GaussianInitialState) {
    ExperimentConfig c;
    c.y0 = {InitialState::Type::Gaussian, 1, 2.0, 0.5, 0.1, {}};
    const SpatialGrid grid(7, 1.0);
    const GridFunction y = make_initial_state(c, grid);
    for (std::size_t i = 0; i < 7; ++i) {
        const double d = (grid.node(i) - 0.5) / 0.1;
        EXPECT_DOUBLE_EQ(y[i], 2.0 * std::exp(-0.5 * d * d));
    }
}
