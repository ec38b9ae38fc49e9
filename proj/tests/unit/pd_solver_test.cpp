#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "illumseg/errors.hpp"
#include "illumseg/oracle.hpp"
#include "illumseg/pd_solver.hpp"
#include "support.hpp"

namespace illumseg::pd {
namespace {

using testing::random_coeffs;
using testing::random_field;
using testing::random_vector_field;

FrameletCoeffs scaled(const FrameletCoeffs& p, double t) {
  FrameletCoeffs out = p;
  for (auto& sb : out.subbands) sb *= t;
  return out;
}

double max_abs_diff(const FrameletCoeffs& a, const FrameletCoeffs& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < kSubbandCount; ++k) m = std::max(m, norm_inf(a[k] - b[k]));
  return m;
}

// Golden-section maximization of a concave scalar function on [lo, hi]. Comparing
// function values limits its resolution to about sqrt(machine epsilon).
double golden_max(const std::function<double(double)>& f, double lo, double hi) {
  const double g = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi;
  while (b - a > 1e-11) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (f(c) > f(d)) {
      b = d;
    } else {
      a = c;
    }
  }
  return 0.5 * (a + b);
}

SolverConfig small_config() {
  SolverConfig c = SolverConfig::tight_frame(0.01, 20, 5);
  c.max_iter = 60;
  return c;
}

ScalarField scene_log_image(std::size_t n, std::uint64_t seed) {
  return to_log_domain(oracle::synth_biased_scene(n, n, 2, 0.5, 0.0, seed).image);
}

TEST(Projection, InsideIsIdentity) {
  Rng rng(1);
  const Shape shape{4, 4};
  const FrameletCoeffs p = random_coeffs(shape, rng, 0.01);
  EXPECT_EQ(max_abs_diff(project_dual_ball(p, ScalarField(shape, 10.0)), p), 0.0);
}

TEST(Projection, ScalesOntoSphere) {
  FrameletCoeffs p(Shape{1, 1});
  p[0][0] = 3.0;
  p[1][0] = 4.0;
  const FrameletCoeffs out = project_dual_ball(p, ScalarField(1, 1, 1.0));
  EXPECT_NEAR(out[0][0], 0.6, 1e-15);
  EXPECT_NEAR(out[1][0], 0.8, 1e-15);
  for (std::size_t k = 2; k < kSubbandCount; ++k) EXPECT_EQ(out[k][0], 0.0);
}

TEST(Projection, IdempotentFeasibleNonexpansive) {
  Rng rng(2);
  const Shape shape{6, 5};
  for (int t = 0; t < 50; ++t) {
    ScalarField radius(shape);
    for (double& v : radius.values()) v = rng.uniform(0.05, 3.0);
    const FrameletCoeffs a = random_coeffs(shape, rng, 2.0), b = random_coeffs(shape, rng, 2.0);
    const FrameletCoeffs pa = project_dual_ball(a, radius), pb = project_dual_ball(b, radius);
    const FrameletCoeffs ppa = project_dual_ball(pa, radius);
    for (std::size_t k = 0; k < kSubbandCount; ++k) ASSERT_EQ(ppa[k], pa[k]);
    const ScalarField n = dual_norm(pa);
    for (std::size_t j = 0; j < n.size(); ++j) ASSERT_LE(n[j], radius[j]);
    FrameletCoeffs da = a, dp = pa;
    for (std::size_t k = 0; k < kSubbandCount; ++k) {
      da[k] -= b[k];
      dp[k] -= pb[k];
    }
    EXPECT_LE(std::sqrt(dot(dp, dp)), std::sqrt(dot(da, da)) + 1e-12);
  }
}

TEST(Projection, TwoChannelVariant) {
  VectorField2 p(Shape{1, 2});
  p.x[0] = 3;
  p.y[0] = 4;
  p.x[1] = 0.1;
  const VectorField2 out = project_dual_ball(p, ScalarField(1, 2, 1.0));
  EXPECT_NEAR(out.x[0], 0.6, 1e-15);
  EXPECT_NEAR(out.y[0], 0.8, 1e-15);
  EXPECT_EQ(out.x[1], 0.1);
}

TEST(UpdateP, ZeroStepKeepsFeasibleIterate) {
  Rng rng(3);
  const Shape shape{5, 5};
  const FrameletCoeffs p = project_dual_ball(random_coeffs(shape, rng), ScalarField(shape, 0.5));
  EXPECT_EQ(max_abs_diff(update_p(p, ScalarField(shape), ScalarField(shape, 0.5), 1.0), p), 0.0);
}

TEST(UpdateP, InsideBallIsPlainStep) {
  Rng rng(4);
  const Shape shape{5, 5};
  const ScalarField r_bar = random_field(shape, rng, 0.01);
  const FrameletCoeffs out = update_p(FrameletCoeffs(shape), r_bar, ScalarField(shape, 100.0), 0.7);
  EXPECT_LE(max_abs_diff(out, scaled(framelet_analyze(r_bar), 0.7)), 1e-15);
}

FrameletCoeffs projected_gradient_oracle(const FrameletCoeffs& p_n, const ScalarField& r_bar, const ScalarField& radius,
                                         double tau, bool pin) {
  const FrameletCoeffs wr = framelet_analyze(r_bar);
  FrameletCoeffs p = p_n;
  const double t = 0.25 * tau;
  for (int it = 0; it < 400; ++it) {
    for (std::size_t k = 0; k < kSubbandCount; ++k) {
      for (std::size_t j = 0; j < p[k].size(); ++j) p[k][j] += t * (wr[k][j] - (p[k][j] - p_n[k][j]) / tau);
    }
    if (pin) p[0] = ScalarField(p.shape());
    p = project_dual_ball(p, radius);
  }
  return p;
}

TEST(UpdateP, MatchesProjectedGradientOracle) {
  Rng rng(5);
  const Shape shape{7, 6};
  for (bool pin : {false, true}) {
    ScalarField radius(shape);
    for (double& v : radius.values()) v = rng.uniform(0.2, 1.5);
    FrameletCoeffs p_n = project_dual_ball(random_coeffs(shape, rng), radius);
    if (pin) p_n[0] = ScalarField(shape);
    const ScalarField r_bar = random_field(shape, rng);
    const FrameletCoeffs mine = update_p(p_n, r_bar, radius, 1.0, pin);
    EXPECT_LE(max_abs_diff(mine, projected_gradient_oracle(p_n, r_bar, radius, 1.0, pin)), 1e-8);
    if (pin) EXPECT_EQ(norm_inf(mine[0]), 0.0);
  }
}

TEST(UpdateQ, ZeroInZeroOut) {
  const VectorField2 q = update_q(VectorField2(Shape{3, 3}), ScalarField(3, 3), 0.5, 1.0);
  EXPECT_EQ(norm_inf(q.x) + norm_inf(q.y), 0.0);
  const VectorField2 u = update_u(VectorField2(Shape{3, 3}), ScalarField(3, 3), 2.0, 1.0);
  EXPECT_EQ(norm_inf(u.x) + norm_inf(u.y), 0.0);
}

void expect_stationary_and_scalar_optimal(
    const std::function<VectorField2(const VectorField2&, const ScalarField&, double, double)>& update, double weight) {
  Rng rng(6);
  const Shape shape{6, 6};
  const double tau = 0.8;
  const VectorField2 q_n = random_vector_field(shape, rng);
  const ScalarField bar = random_field(shape, rng);
  const VectorField2 q = update(q_n, bar, weight, tau);
  const VectorField2 g = grad(bar);
  for (const auto& [gc, qc, qnc] : {std::tuple{&g.x, &q.x, &q_n.x}, std::tuple{&g.y, &q.y, &q_n.y}}) {
    for (std::size_t j = 0; j < qc->size(); ++j) {
      const double gj = (*gc)[j], qn = (*qnc)[j];
      EXPECT_LE(std::abs(gj - (*qc)[j] / weight - ((*qc)[j] - qn) / tau), 1e-12);
      const double best =
          golden_max([&](double x) { return gj * x - x * x / (2 * weight) - (x - qn) * (x - qn) / (2 * tau); },
                     -50.0, 50.0);
      EXPECT_NEAR((*qc)[j], best, 1e-7);
    }
  }
}

TEST(UpdateQ, StationaryAndMatchesScalarOracle) {
  expect_stationary_and_scalar_optimal(
      [](const VectorField2& q, const ScalarField& r, double a, double t) { return update_q(q, r, a, t); }, 0.3);
}

TEST(UpdateU, StationaryAndMatchesScalarOracle) {
  expect_stationary_and_scalar_optimal(
      [](const VectorField2& u, const ScalarField& l, double b, double t) { return update_u(u, l, b, t); }, 7.0);
}

TEST(PixelPrimal, ZeroProblem) {
  const PixelSolution x = solve_pixel_primal(0, 0, 0, 0, 0, 0, 1.0, 1e-5, 0.1);
  EXPECT_EQ(x.r, 0.0);
  EXPECT_EQ(x.l, 0.0);
}

TEST(PixelPrimal, ActiveConstraintExample) {
  const PixelSolution x = solve_pixel_primal(0, 0, 0, 1.0, 0, 0, 1.0, 0.0, 1.0);
  EXPECT_EQ(x.r, 0.0);
  EXPECT_NEAR(x.l, 0.5, 1e-15);
  oracle::GridSpec grid;
  grid.r_max = 5;
  grid.l_max = 5;
  const auto ref = oracle::pixel_qp_oracle(0, 0, 0, 1.0, 0, 0, 1.0, 0.0, 1.0, grid);
  EXPECT_EQ(ref.r, 0.0);
  EXPECT_NEAR(ref.l, 0.5, 1e-9);
}

TEST(PixelPrimal, NeverWorseThanOracle) {
  Rng rng(7);
  for (int d = 0; d < 100; ++d) {
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2), c = rng.uniform(-2, 2);
    const double s = rng.uniform(-5.5, 0), rn = rng.uniform(0, 3), ln = rng.uniform(-5, 1);
    const double gamma = rng.uniform(0.1, 10), mu = rng.uniform(1e-5, 0.5), sigma = rng.uniform(0.05, 1);
    const PixelSolution x = solve_pixel_primal(a, b, c, s, rn, ln, gamma, mu, sigma);
    const auto ref = oracle::pixel_qp_oracle(a, b, c, s, rn, ln, gamma, mu, sigma);
    EXPECT_GE(x.r, 0.0);
    EXPECT_LE(oracle::pixel_objective(x.r, x.l, a, b, c, s, rn, ln, gamma, mu, sigma), ref.value + 1e-6);
    if (ref.r == 0.0) EXPECT_EQ(x.r, 0.0);
  }
}

TEST(Energy, ClosedFormExamples) {
  Rng rng(8);
  const Shape shape{9, 8};
  const ScalarField s = random_field(shape, rng);
  const SolverConfig c = SolverConfig::tight_frame(0.4, 3.0, 2.0);
  EXPECT_NEAR(energy(ScalarField(shape), ScalarField(shape), s, c), 0.5 * c.gamma * dot(s, s), 1e-10);
  const VectorField2 gs = grad(s);
  EXPECT_NEAR(energy(ScalarField(shape), s, s, c), 0.5 * c.beta * dot(gs, gs) + 0.5 * c.mu * dot(s, s), 1e-10);
}

TEST(Energy, TvRegularizerIsIsotropicGradientMagnitude) {
  Rng rng(9);
  const Shape shape{7, 7};
  ScalarField r = random_field(shape, rng);
  for (double& v : r.values()) v = std::abs(v);
  const ScalarField s = random_field(shape, rng);
  const ScalarField l = random_field(shape, rng);
  const SolverConfig tv = SolverConfig::tv(0.2, 1.0, 3.0);
  const VectorField2 g = grad(r);
  double expected = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) expected += std::hypot(g.x[j], g.y[j]);
  const ScalarField diff = l - s - r;
  const VectorField2 gl = grad(l);
  expected += 0.5 * tv.alpha * dot(g, g) + 0.5 * tv.beta * dot(gl, gl) + 0.5 * tv.gamma * dot(diff, diff) +
              0.5 * tv.mu * dot(l, l);
  EXPECT_NEAR(energy(r, l, s, tv), expected, 1e-10);
}

TEST(Energy, TightFrameRegularizerUsesWeightsOnHighPass) {
  Rng rng(10);
  const Shape shape{6, 6};
  ScalarField r = random_field(shape, rng);
  for (double& v : r.values()) v = std::abs(v);
  const ScalarField s = random_field(shape, rng);
  const SolverConfig c = SolverConfig::tight_frame(0.2, 1.0, 3.0);
  const ScalarField v = edge_weights(s);
  const FrameletCoeffs wr = framelet_analyze(r);
  double reg = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) {
    double sq = 0.0;
    for (std::size_t k = 1; k < kSubbandCount; ++k) sq += wr[k][j] * wr[k][j];
    reg += v[j] * std::sqrt(sq);
  }
  EXPECT_NEAR(energy(r, s, s, c) - energy(ScalarField(shape), s, s, c),
              reg + 0.5 * c.alpha * dot(grad(r), grad(r)) + 0.5 * c.gamma * dot(r, r), 1e-9);
}

TEST(Energy, StrictlyConvexOnSegments) {
  Rng rng(11);
  const Shape shape{6, 7};
  const ScalarField s = random_field(shape, rng);
  for (auto c : {SolverConfig::tight_frame(0.1, 2.0, 1.0), SolverConfig::tv(0.1, 2.0, 1.0)}) {
    for (int t = 0; t < 10; ++t) {
      ScalarField r1 = random_field(shape, rng), r2 = random_field(shape, rng);
      for (double& v : r1.values()) v = std::abs(v);
      for (double& v : r2.values()) v = std::abs(v);
      const ScalarField l1 = random_field(shape, rng), l2 = random_field(shape, rng);
      const double mid = energy(0.5 * (r1 + r2), 0.5 * (l1 + l2), s, c);
      EXPECT_LT(mid, 0.5 * energy(r1, l1, s, c) + 0.5 * energy(r2, l2, s, c));
    }
  }
}

TEST(Energy, RejectsNegativeR) {
  const ScalarField s(3, 3);
  EXPECT_THROW(energy(ScalarField(3, 3, -1.0), s, s, SolverConfig::tight_frame(1, 1, 1)), InvalidArgument);
}

TEST(Config, ValidationAndNames) {
  EXPECT_THROW(SolverConfig::tight_frame(0, 1, 1).validate(), InvalidArgument);
  SolverConfig c = SolverConfig::tight_frame(1, 1, 1);
  c.sigma = -1;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_EQ(regularizer_from_string(to_string(Regularizer::TV)), Regularizer::TV);
  EXPECT_EQ(regularizer_from_string("tf"), Regularizer::TightFrame);
  EXPECT_THROW(regularizer_from_string("l1"), InvalidArgument);
  const SolverConfig tv = SolverConfig::tv(1, 2, 3);
  EXPECT_EQ(tv.sigma, 0.15);
  EXPECT_EQ(tv.tau, 1.0);
  EXPECT_EQ(tv.tol, 1e-5);
}

TEST(StepAudit, TightFrameBound) {
  SolverConfig c = SolverConfig::tight_frame(1, 1, 1);
  StepAudit a = audit_step_sizes(c, Shape{16, 16});
  EXPECT_NEAR(a.product, 0.9, 1e-12);
  EXPECT_TRUE(a.passes);
  EXPECT_FALSE(a.estimated);
  c.sigma = 0.2;
  a = audit_step_sizes(c, Shape{16, 16});
  EXPECT_NEAR(a.product, 1.8, 1e-12);
  EXPECT_FALSE(a.passes);
  EXPECT_NE(a.describe().find("warn"), std::string::npos);
}

TEST(StepAudit, TvUsesEstimatedNorm) {
  const StepAudit a = audit_step_sizes(SolverConfig::tv(1, 1, 1), Shape{32, 32});
  EXPECT_TRUE(a.estimated);
  EXPECT_GT(a.norm_bound, 3.0);
  EXPECT_LE(a.norm_bound, std::sqrt(24.0));
  EXPECT_FALSE(a.passes);
}

TEST(Solver, ZeroImageIsFixedPoint) {
  const Shape shape{12, 10};
  const SolverResult res = run(ScalarField(shape), small_config());
  EXPECT_EQ(norm_inf(res.r), 0.0);
  EXPECT_EQ(norm_inf(res.l), 0.0);
  EXPECT_LE(energy(res.r, res.l, ScalarField(shape), small_config()), 1e-20);
  for (double v : res.R.values()) EXPECT_EQ(v, 1.0);
}

TEST(Solver, PerStepInvariants) {
  const ScalarField s = scene_log_image(16, 2);
  for (DualBall ball : {DualBall::Exact, DualBall::Literal}) {
    SolverConfig c = small_config();
    c.dual_ball = ball;
    Solver solver(s, c);
    for (int it = 0; it < 40; ++it) {
      const ScalarField r_prev = solver.primal().r, l_prev = solver.primal().l;
      solver.step();
      const PrimalState& x = solver.primal();
      ASSERT_GE(x.r.min(), 0.0);
      EXPECT_EQ(x.r_bar, 2.0 * x.r - r_prev);
      EXPECT_EQ(x.l_bar, 2.0 * x.l - l_prev);
      const auto& p = std::get<FrameletCoeffs>(solver.dual().p);
      const ScalarField n = dual_norm(p);
      for (std::size_t j = 0; j < n.size(); ++j) ASSERT_LE(n[j], solver.radius()[j] + 1e-12);
      if (ball == DualBall::Exact) {
        EXPECT_EQ(norm_inf(p[0]), 0.0);
      }
    }
  }
}

TEST(Solver, RadiusFollowsDualBallMode) {
  const ScalarField s = scene_log_image(16, 2);
  SolverConfig c = small_config();
  const Solver exact(s, c);
  EXPECT_EQ(exact.radius(), exact.weights());
  c.dual_ball = DualBall::Literal;
  const Solver literal(s, c);
  EXPECT_EQ(literal.radius(), dual_radius(literal.weights()));
  const Solver tv(s, SolverConfig::tv(0.01, 20, 5));
  for (double v : tv.radius().values()) EXPECT_EQ(v, 1.0);
  EXPECT_TRUE(std::holds_alternative<VectorField2>(tv.dual().p));
}

TEST(Solver, DeterministicHistories) {
  const ScalarField s = scene_log_image(16, 4);
  const SolverResult a = run(s, small_config());
  const SolverResult b = run(s, small_config());
  EXPECT_EQ(a.residual_history, b.residual_history);
  EXPECT_EQ(a.r, b.r);
}

TEST(Solver, HistoriesAndOutputs) {
  const ScalarField s = scene_log_image(16, 5);
  SolverConfig c = small_config();
  c.max_iter = 35;
  const SolverResult res = run(s, c);
  EXPECT_EQ(res.iterations_run, 35);
  EXPECT_EQ(res.residual_history.size(), 35u);
  ASSERT_EQ(res.energy_history.size(), 4u);
  EXPECT_EQ(res.energy_history.back().iteration, 35);
  EXPECT_EQ(res.energy_history.front().iteration, 10);
  for (std::size_t j = 0; j < s.size(); ++j) {
    EXPECT_NEAR(res.R[j], std::exp(-res.r[j]), 1e-15);
    EXPECT_NEAR(res.L[j], std::exp(res.l[j]), 1e-15);
    EXPECT_GT(res.R[j], 0.0);
    EXPECT_LE(res.R[j], 1.0);
  }
}

TEST(Solver, BeatsInitialization) {
  const ScalarField s = scene_log_image(24, 6);
  SolverConfig c = small_config();
  c.max_iter = 300;
  const SolverResult res = run(s, c);
  EXPECT_LT(energy(res.r, res.l, s, c), energy(ScalarField(s.shape()), s, s, c));
}

TEST(Solver, TvStopsAtTolerance) {
  const ScalarField s = scene_log_image(16, 7);
  SolverConfig c = SolverConfig::tv(0.01, 20, 5);
  c.tol = 1e-3;
  c.max_iter = 5000;
  const SolverResult res = run(s, c);
  EXPECT_TRUE(res.converged);
  EXPECT_LT(res.iterations_run, 5000);
  EXPECT_LE(res.residual_history.back(), 1e-3);
  EXPECT_GE(res.r.min(), 0.0);
}

TEST(Solver, ConstantDarkImageStaysConstant) {
  const ScalarField s(10, 10, std::log(1.0 / 255.0));
  SolverConfig c = SolverConfig::tight_frame(1e-3, 80, 8);
  c.max_iter = 200;
  const SolverResult res = run(s, c);
  EXPECT_EQ(res.iterations_run, 200);
  EXPECT_GE(res.r.min(), 0.0);
  EXPECT_NEAR(res.r.max(), res.r.min(), 1e-12);
  EXPECT_NEAR(res.l.max(), res.l.min(), 1e-12);
}

TEST(Solver, RejectsBadInput) {
  EXPECT_THROW(Solver(ScalarField(), small_config()), InvalidArgument);
  EXPECT_THROW(Solver(ScalarField(2, 2, std::nan("")), small_config()), InvalidArgument);
}

TEST(Solver, DivergenceIsReported) {
  SolverConfig c = small_config();
  c.tau = 1e150;
  c.sigma = 1e150;
  c.max_iter = 50;
  EXPECT_THROW(run(scene_log_image(16, 8), c), NumericError);
}

TEST(Solver, IterationCounterAdvances) {
  const std::uint64_t before = total_iterations();
  run(ScalarField(4, 4), small_config());
  EXPECT_EQ(total_iterations() - before, static_cast<std::uint64_t>(small_config().max_iter));
}

}  // namespace
}  // namespace illumseg::pd
