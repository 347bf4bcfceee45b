#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

namespace sggn {
namespace {

using testing::Rng;

bool monotone(double before, double after) { return after <= before + 1e-12 * (1.0 + before); }

TEST(Initialize, UniformBreakpointsOnInterval) {
  const auto dom = Domain::interval(0.0, 10.0);
  const auto pts = midpoint_grid(dom, 0.01, 1.0, builtin_target("step1d"));
  const auto p = initialize(dom, pts, 4, InitStyle::uniform_1d);
  ASSERT_EQ(p.width(), 4u);
  for (int k = 0; k < 4; ++k) {
    EXPECT_DOUBLE_EQ(p.neurons[static_cast<std::size_t>(k)].bias, -2.0 * (k + 1));
    EXPECT_EQ(p.neurons[static_cast<std::size_t>(k)].weight[0], 1.0);
  }
}

TEST(Initialize, ConstantTargetIsFitExactly) {
  const auto dom = Domain::interval(0.0, 1.0);
  const auto pts = midpoint_grid(dom, 0.01, 1.0, {"step1d", Step1D{{0.0, 1.0}, {2.5}}});
  for (int n : {1, 3, 9}) {
    const auto p = initialize(dom, pts, n, InitStyle::uniform_1d);
    EXPECT_LE(loss(p, pts), 1e-20);
    const auto [A, f] = assemble_mass(p, pts);
    EXPECT_LE((A * linear_vector(p) - f).norm(), 1e-10 * f.norm());
  }
}

TEST(Initialize, HorizontalLinesOnSquare) {
  const auto dom = Domain::box({-1.0, -1.0}, {1.0, 1.0});
  const auto pts = midpoint_grid(dom, 0.05, 1.0, builtin_target("step2d"));
  const auto p = initialize(dom, pts, 5, InitStyle::horizontal_2d);
  const double levels[] = {-2.0 / 3.0, -1.0 / 3.0, 0.0, 1.0 / 3.0, 2.0 / 3.0};
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(p.neurons[k].weight[0], 0.0);
    EXPECT_EQ(p.neurons[k].weight[1], 1.0);
    EXPECT_NEAR(-p.neurons[k].bias, levels[k], 1e-15);
  }
  const auto v = initialize(dom, pts, 5, InitStyle::vertical_2d);
  EXPECT_EQ(v.neurons[2].weight[0], 1.0);
  EXPECT_EQ(v.neurons[2].weight[1], 0.0);
}

TEST(Initialize, Errors) {
  const auto dom = Domain::interval(0.0, 1.0);
  const auto pts = midpoint_grid(dom, 0.1, 1.0, testing::zero_target());
  EXPECT_THROW(initialize(dom, pts, 0, InitStyle::uniform_1d), ConfigError);
  EXPECT_THROW(initialize(dom, pts, 20, InitStyle::uniform_1d, 1e-12, nullptr, 0.1), ConfigError);
  EXPECT_THROW(initialize(dom, pts, 2, InitStyle::horizontal_2d), ConfigError);
  EXPECT_THROW(initialize(dom, pts, 2, InitStyle::explicit_params), ConfigError);
}

TEST(Initialize, ExplicitParametersAreNormalized) {
  const auto dom = Domain::interval(0.0, 1.0);
  const auto pts = midpoint_grid(dom, 0.01, 1.0, builtin_target("step1d", {{"breaks", {0.0, 0.5, 1.0}},
                                                                          {"values", {0.0, 1.0}}}));
  NetworkParams p;
  p.d = 1;
  p.c = Vector::Ones(2);
  p.neurons = {{-0.6, Vector::Constant(1, 2.0)}, {0.25, Vector::Constant(1, -0.5)}};
  const auto q = initialize(dom, pts, 2, InitStyle::explicit_params, 1e-12, &p);
  EXPECT_EQ(q.neurons[0].weight[0], 1.0);
  EXPECT_DOUBLE_EQ(q.neurons[0].bias, -0.3);
  EXPECT_EQ(q.neurons[1].weight[0], -1.0);
  EXPECT_DOUBLE_EQ(q.neurons[1].bias, 0.5);
}

TEST(SgGNStep, PerfectFitStaysPut) {
  Rng rng(71);
  const auto dom = Domain::box({-1.0, -1.0}, {1.0, 1.0});
  const auto p = normalize(testing::random_network(rng, 4, dom));
  const auto pts = midpoint_grid(dom, 0.05, 1.0, {"synthetic2d", NetworkTarget{p}});
  const auto step = sggn_step(p, pts, {});
  EXPECT_EQ(step.record.gamma, 0.0);
  EXPECT_EQ(nonlinear_vector(step.params), nonlinear_vector(p));
  EXPECT_LE((linear_vector(step.params) - linear_vector(p)).norm(), 1e-8);
  EXPECT_LE(step.record.loss, 1e-20);
}

TEST(SgGNStep, InactiveNeuronsKeepTheirHiddenParameters) {
  Rng rng(72);
  const auto dom = Domain::interval(0.0, 1.0);
  const auto pts = midpoint_grid(dom, 0.01, 1.0, builtin_target("delta1d", {{"centers", {0.3, 0.7}},
                                                                           {"widths", {50.0, 80.0}}}));
  for (int trial = 0; trial < 5; ++trial) {
    auto p = normalize(testing::random_network(rng, 5, dom, 0.8, 0.05));
    p.c[1] = 0.0;
    p.c[3] = 1e-10;
    SgGNConfig cfg;
    const auto dir = sggn_direction(p, pts, cfg);
    EXPECT_EQ(dir.active.indices, (std::vector<std::size_t>{0, 2, 4}));
    EXPECT_EQ(dir.direction.segment(2, 2), Vector::Zero(2));
    EXPECT_EQ(dir.direction.segment(6, 2), Vector::Zero(2));
    const auto step = sggn_step(p, pts, cfg);
    EXPECT_EQ(step.params.neurons[1].bias, p.neurons[1].bias);
    EXPECT_EQ(step.params.neurons[1].weight, p.neurons[1].weight);
    EXPECT_EQ(step.params.neurons[3].bias, p.neurons[3].bias);
    EXPECT_EQ(step.params.neurons[3].weight, p.neurons[3].weight);
    EXPECT_EQ(step.record.active_count, 3);
  }
}

TEST(SgGNStep, EmptyActiveSetOnlySolvesForCoefficients) {
  const auto dom = Domain::interval(0.0, 1.0);
  const auto pts = midpoint_grid(dom, 0.01, 1.0, builtin_target("step1d", {{"breaks", {0.0, 0.5, 1.0}},
                                                                          {"values", {0.0, 1.0}}}));
  NetworkParams p;
  p.d = 1;
  p.c = Vector::Zero(2);
  p.neurons = {{-0.3, Vector::Ones(1)}, {-0.6, Vector::Ones(1)}};
  const auto step = sggn_step(p, pts, {});
  EXPECT_EQ(step.record.gamma, 0.0);
  EXPECT_EQ(step.record.active_count, 0);
  EXPECT_EQ(nonlinear_vector(step.params), nonlinear_vector(p));
  EXPECT_EQ(step.record.loss, loss(solve_linear(p, pts, 1e-12).params, pts));
  EXPECT_LT(step.record.loss, loss(p, pts));
}

TEST(SgGNStep, DirectionSolvesTheGaussNewtonSystem) {
  Rng rng(73);
  const auto dom = Domain::box({-1.0, -1.0}, {1.0, 1.0});
  const auto pts = midpoint_grid(dom, 0.05, 1.0, builtin_target("step2d"));
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = normalize(testing::random_network(rng, 3, dom, 0.6));
    const auto dir = sggn_direction(p, pts, {});
    ASSERT_EQ(dir.gn_rank, 9);
    // J^T W J p = J^T W (u_n - u), built from explicit Jacobian rows
    const Matrix M = testing::jtwj(p, pts);
    const Vector g = kron_scaling(p.c, 2).cwiseProduct(testing::naive_scaled_gradient(p, pts));
    const Vector oracle = M.ldlt().solve(g);
    EXPECT_LE((dir.direction - oracle).norm(), 1e-7 * oracle.norm());
  }
}

TEST(SgGNStep, DirectionIsADescentDirection) {
  Rng rng(74);
  const auto dom = Domain::interval(0.0, 1.0);
  const auto pts = midpoint_grid(dom, 0.01, 1.0, builtin_target("delta1d", {{"centers", {0.4}}, {"widths", {100.0}}}));
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = solve_linear(normalize(testing::random_network(rng, 4, dom, 0.8, 0.05)), pts, 1e-12).params;
    const auto dir = sggn_direction(p, pts, {});
    EXPECT_GT(dir.direction.dot(loss_gradient_r(p, pts)), 0.0);
  }
}

TEST(SgGNStep, ZeroGradientAtStationaryPointLeavesParameters) {
  // stationary: targets generated by the network itself plus nothing else
  Rng rng(75);
  const auto dom = Domain::interval(0.0, 1.0);
  const auto p = normalize(testing::random_network(rng, 3, dom, 0.8, 0.1));
  const auto pts = midpoint_grid(dom, 0.01, 1.0, {"synthetic2d", NetworkTarget{p}});
  ASSERT_LE(loss_gradient_r(p, pts).norm(), 1e-10);
  const auto step = sggn_step(p, pts, {});
  EXPECT_EQ(nonlinear_vector(step.params), nonlinear_vector(p));
}

TEST(SgGNRun, MonotoneOnRandomProblems) {
  Rng rng(76);
  for (int trial = 0; trial < 8; ++trial) {
    const int d = 1 + trial % 2;
    const auto dom = d == 1 ? Domain::interval(0.0, 1.0) : Domain::box({-1.0, -1.0}, {1.0, 1.0});
    TargetFunction target = d == 1 ? builtin_target("delta1d", {{"centers", {0.3, 0.8}}, {"widths", {300.0, 60.0}}})
                                   : builtin_target("step2d");
    const auto pts = midpoint_grid(dom, d == 1 ? 0.01 : 0.05, 1.0, target);
    const auto init = solve_linear(normalize(testing::random_network(rng, 5, dom, 0.8, 0.05)), pts, 1e-12).params;
    SgGNConfig cfg;
    cfg.max_iters = 15;
    const auto res = run_sggn(init, pts, cfg);
    double prev = res.initial_loss;
    for (const auto& rec : res.history) {
      EXPECT_TRUE(monotone(prev, rec.loss)) << "iteration " << rec.k << ": " << prev << " -> " << rec.loss;
      EXPECT_GE(rec.gamma, 0.0);
      EXPECT_LE(rec.mass_residual, 1e-8);
      prev = rec.loss;
    }
  }
}

TEST(SgGNRun, StopLossEndsAfterTheFirstIterationThatReachesIt) {
  const auto dom = Domain::interval(0.0, 1.0);
  const auto pts = midpoint_grid(dom, 0.01, 1.0, builtin_target("step1d", {{"breaks", {0.0, 0.5, 1.0}},
                                                                          {"values", {0.0, 1.0}}}));
  const auto init = initialize(dom, pts, 3, InitStyle::uniform_1d);
  SgGNConfig cfg;
  cfg.max_iters = 1;
  EXPECT_EQ(run_sggn(init, pts, cfg).history.size(), 1u);
  cfg.max_iters = 5;
  cfg.stop_loss = std::numeric_limits<double>::infinity();
  const auto res = run_sggn(init, pts, cfg);
  ASSERT_EQ(res.history.size(), 1u);
  EXPECT_EQ(res.history[0].k, 1);
}

TEST(SgGNRun, RecoversASingleKink) {
  // u = sigma(x - 0.37) from a breakpoint started at 0.5
  NetworkParams gen;
  gen.d = 1;
  gen.c = Vector::Ones(1);
  gen.neurons.push_back({-0.37, Vector::Ones(1)});
  const auto dom = Domain::interval(0.0, 1.0);
  const auto pts = midpoint_grid(dom, 0.01, 1.0, {"synthetic2d", NetworkTarget{gen}});
  SgGNConfig cfg;
  cfg.max_iters = 30;
  const auto init = initialize(dom, pts, 1, InitStyle::uniform_1d);
  const auto res = run_sggn(init, pts, cfg);
  EXPECT_LE(res.history.back().loss, 1e-20);
  EXPECT_NEAR(-res.params.neurons[0].bias / res.params.neurons[0].weight[0], 0.37, 1e-8);
}

TEST(SgGNRun, StepProblemEarlyLossWithinOneDecadeOfReference) {
  auto cfg = preset("step1d");
  cfg.sggn.max_iters = 9;
  const auto res = run_sggn(cfg.problem, cfg.n, cfg.init, cfg.sggn);
  ASSERT_EQ(res.history.size(), 9u);
  const double reference = 8.76e-4;
  EXPECT_GE(res.history.back().loss, reference / 10.0);
  EXPECT_LE(res.history.back().loss, reference * 10.0);
}

TEST(KinkedNeurons, DetectsHyperplaneOnSamplePoint) {
  const auto dom = Domain::interval(0.0, 1.0);
  const auto pts = midpoint_grid(dom, 0.25, 1.0, testing::zero_target());
  NetworkParams p;
  p.d = 1;
  p.c = Vector::Ones(2);
  p.neurons = {{-0.375, Vector::Ones(1)}, {-0.5, Vector::Ones(1)}};
  EXPECT_EQ(kinked_neurons(p, pts, 1e-10), (std::vector<bool>{true, false}));
}

TEST(Config, Validation) {
  SgGNConfig cfg;
  EXPECT_NO_THROW(validate(cfg));
  cfg.max_iters = 0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = {};
  cfg.eps_c = 0.0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = {};
  cfg.gn_tol = 1.0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = {};
  cfg.line_search.gamma_max = -1.0;
  EXPECT_THROW(validate(cfg), ConfigError);
}

}  // namespace
}  // namespace sggn
