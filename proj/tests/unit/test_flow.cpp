#include <gtest/gtest.h>

#include <cmath>

#include "mamlode/flow.hpp"
#include "mamlode/losses.hpp"
#include "mamlode/meta_grad.hpp"
#include "test_util.hpp"

using namespace mamlode;
using testutil::v1;

namespace {

IntegrateOptions iters(std::size_t n) {
  IntegrateOptions o;
  o.stop.eps = 0.0;
  o.stop.max_iters = n;
  return o;
}

}  // namespace

TEST(Euler, GeometricDecay) {
  FunctionField f([](const Vector& w) { return Vector(-w); });
  const Trajectory t = euler_integrate(f, v1(1.0), 0.1, field_norm_monitor(f), iters(10));
  ASSERT_EQ(t.samples.size(), 11u);
  double oracle = 1.0;
  for (int k = 0; k < 10; ++k) oracle *= 0.9;
  EXPECT_NEAR(t.back().w[0], oracle, 1e-15);
  EXPECT_NEAR(t.back().t, 1.0, 1e-15);
}

TEST(Euler, OscillatingDivergenceFlagged) {
  FunctionField f([](const Vector& w) { return Vector(-w); });
  const Trajectory t = euler_integrate(f, v1(1.0), 2.5, field_norm_monitor(f), iters(100));
  EXPECT_EQ(t.termination, Termination::diverged);
}

TEST(Rk4, ExponentialSolution) {
  FunctionField f([](const Vector& w) { return Vector(-w); });
  const Trajectory t = rk4_integrate(f, v1(1.0), 0.1, field_norm_monitor(f), iters(10));
  EXPECT_NEAR(t.back().w[0], std::exp(-1.0), 1e-6);
  EXPECT_NEAR(t.back().t, 1.0, 1e-12);
}

TEST(Rk4, ZeroFieldConstant) {
  FunctionField f([](const Vector& w) { return Vector(Vector::Zero(w.size())); });
  const Trajectory t = rk4_integrate(f, Vector::Ones(3), 0.1, field_norm_monitor(f), iters(5));
  for (const auto& s : t.samples) EXPECT_EQ(s.w, Vector::Ones(3));
}

TEST(Rk4, FourthOrderConvergence) {
  FunctionField f([](const Vector& w) { return Vector(-w); });
  const double e1 = std::abs(rk4_integrate(f, v1(1.0), 0.2, field_norm_monitor(f), iters(5)).back().w[0] -
                             std::exp(-1.0));
  const double e2 = std::abs(rk4_integrate(f, v1(1.0), 0.1, field_norm_monitor(f), iters(10)).back().w[0] -
                             std::exp(-1.0));
  EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.2);
}

TEST(MamlOdeField, IsNegativeMamlGradient) {
  TaskPool pool = testutil::random_quadratic_pool(2, 3, 3);
  MamlOdeField f(pool.clone(), 0.2);
  const Vector w = Vector::LinSpaced(3, -1, 1);
  EXPECT_EQ(f.eval(w), Vector(-maml_grad(pool, 0.2, w)));
  FoMamlField fo(pool.clone(), 0.2);
  EXPECT_EQ(fo.eval(w), Vector(-fo_maml_grad(pool, 0.2, w)));
  ExpectedLossField el(pool.clone());
  EXPECT_EQ(el.eval(w), Vector(-expected_grad(pool, w)));
}

TEST(MamlOdeField, SymmetricPairSolution) {
  // ẇ = -(1-α)²w, so w(t) = w0 exp(-(1-α)²t).
  TaskPool pool = symmetric_pair_pool();
  MamlOdeField f(pool.clone(), 0.4);
  const Trajectory t = rk4_integrate(f, v1(2.0), 0.01, pool_monitor(pool, 0.4), iters(100));
  EXPECT_NEAR(t.back().w[0], 2.0 * std::exp(-0.36), 1e-10);
}

TEST(BiMamlField, StartsInMamlPhaseWhenAlreadyBelowThreshold) {
  TaskPool pool = symmetric_pair_pool();
  BiMamlField f(pool.clone(), 0.1, 0.5);
  f.begin_step(v1(0.2), 0.0);
  EXPECT_TRUE(f.latched());
  EXPECT_EQ(f.phase(), Phase::maml);
  EXPECT_EQ(*f.switch_time(), 0.0);
  EXPECT_EQ(f.eval(v1(0.2)), Vector(-maml_grad(pool, 0.1, v1(0.2))));
}

TEST(BiMamlField, UnreachableThresholdNeverSwitches) {
  TaskPool pool = symmetric_pair_pool();
  BiMamlField f(pool.clone(), 0.1, 1e-300);
  const Trajectory t = rk4_integrate(f, v1(2.0), 0.01, pool_monitor(pool, 0.1), iters(200));
  EXPECT_FALSE(f.latched());
  for (const auto& s : t.samples) EXPECT_EQ(s.phase, Phase::expected_loss);
  EXPECT_EQ(f.counts().hess_evals, 0u);
}

TEST(BiMamlField, LatchIsOneWay) {
  TaskPool pool = symmetric_pair_pool();
  BiMamlField f(pool.clone(), 0.1, 1.0);
  f.begin_step(v1(0.5), 0.0);
  f.begin_step(v1(5.0), 0.1);
  EXPECT_EQ(f.phase(), Phase::maml);
  EXPECT_EQ(*f.switch_time(), 0.0);
}

TEST(BiMamlField, AsPrintedOrderRetestsEveryStep) {
  TaskPool pool = symmetric_pair_pool();
  BiMamlField f(pool.clone(), 0.1, 1.0, BiphasicOrder::as_printed);
  f.begin_step(v1(0.5), 0.0);
  EXPECT_EQ(f.phase(), Phase::expected_loss);
  f.begin_step(v1(5.0), 0.1);
  EXPECT_EQ(f.phase(), Phase::maml);
  EXPECT_FALSE(f.latched());
}

TEST(Monitor, DoesNotChargeFieldCounters) {
  TaskPool pool = symmetric_pair_pool();
  MamlOdeField f(pool, 0.1);
  pool.reset_counts();
  const Trajectory t = euler_integrate(f, v1(2.0), 0.1, pool_monitor(pool, 0.1), iters(3));
  EXPECT_EQ(pool.counts().hess_evals, 3u * 2u);
  EXPECT_EQ(t.back().hess_evals_cum, 6u);
  EXPECT_EQ(t.samples.front().hess_evals_cum, 0u);
}

TEST(Monitor, RecordsLossesAndNorms) {
  TaskPool pool = symmetric_pair_pool();
  const SampleStats s = pool_monitor(pool, 0.4)(v1(2.0));
  EXPECT_NEAR(s.F_val, 0.9, 1e-15);
  EXPECT_NEAR(s.gradF_norm, 0.72, 1e-15);
  EXPECT_NEAR(s.gradf_norm, 2.0, 1e-15);
}

TEST(Integrate, StopsOnTolerance) {
  TaskPool pool = symmetric_pair_pool();
  MamlOdeField f(pool.clone(), 0.1);
  IntegrateOptions o;
  o.stop.eps = 1e-3;
  const Trajectory t = euler_integrate(f, v1(2.0), 0.1, pool_monitor(pool, 0.1), o);
  EXPECT_EQ(t.termination, Termination::converged);
  EXPECT_LE(t.back().gradF_norm, 1e-3);
  EXPECT_GT(t.samples[t.samples.size() - 2].gradF_norm, 1e-3);
}

TEST(Integrate, TimeBudget) {
  TaskPool pool = symmetric_pair_pool();
  MamlOdeField f(pool.clone(), 0.1);
  IntegrateOptions o;
  o.stop.eps = 0.0;
  o.stop.max_time = 0.55;
  const Trajectory t = euler_integrate(f, v1(2.0), 0.1, pool_monitor(pool, 0.1), o);
  EXPECT_EQ(t.termination, Termination::time_budget);
  EXPECT_GE(t.back().t, 0.55);
  EXPECT_LT(t.back().t, 0.55 + 0.1);
  EXPECT_NEAR(t.samples[t.samples.size() - 2].t, 0.5, 1e-12);
}

TEST(Integrate, RecordEveryKeepsEnds) {
  FunctionField f([](const Vector& w) { return Vector(-w); });
  IntegrateOptions o = iters(10);
  o.record_every = 4;
  const Trajectory t = euler_integrate(f, v1(1.0), 0.1, field_norm_monitor(f), o);
  ASSERT_FALSE(t.samples.empty());
  EXPECT_EQ(t.samples.front().iter, 0);
  EXPECT_EQ(t.back().iter, 10);
}

TEST(Diverged, Guard) {
  EXPECT_TRUE(diverged(v1(std::nan(""))));
  EXPECT_TRUE(diverged(v1(2e12)));
  EXPECT_FALSE(diverged(v1(1e11)));
}
