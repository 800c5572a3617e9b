#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mamlode/losses.hpp"
#include "test_util.hpp"

using namespace mamlode;
using testutil::v1;

namespace {

double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

// Central differences of the analytic gradient, symmetrized.
Matrix grad_jacobian(const TaskLoss& loss, const Vector& w, double h) {
  const int d = static_cast<int>(loss.dim());
  Matrix J(d, d);
  for (int j = 0; j < d; ++j) {
    Vector up = w, dn = w;
    up[j] += h;
    dn[j] -= h;
    J.col(j) = (loss.grad(up) - loss.grad(dn)) / (2.0 * h);
  }
  return 0.5 * (J + J.transpose());
}

// Analytic derivatives against central differences at random points of [-3, 3]^d.
void expect_derivatives_match(const TaskLoss& loss, std::uint64_t seed, double tol) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const int d = static_cast<int>(loss.dim());
  for (int k = 0; k < 50; ++k) {
    Vector w(d);
    for (int i = 0; i < d; ++i) w[i] = u(rng);
    EXPECT_LT(rel_err(loss.grad(w), finite_diff_grad(loss, w, scaled_step(1e-5, w))), tol) << loss.kind();
    EXPECT_LT(rel_err(loss.hess(w), grad_jacobian(loss, w, scaled_step(1e-5, w))), tol) << loss.kind();
  }
}

// Value-only second differences, checked where the fourth derivative is small.
void expect_value_hessian_matches(const TaskLoss& loss, std::uint64_t seed, double tol) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const int d = static_cast<int>(loss.dim());
  for (int k = 0; k < 50; ++k) {
    Vector w(d);
    for (int i = 0; i < d; ++i) w[i] = u(rng);
    EXPECT_LT(rel_err(loss.hess(w), finite_diff_hess(loss, w, scaled_step(1e-4, w))), tol) << loss.kind();
  }
}

double hinge_piece(double z, double delta) {
  if (z <= 0.0) return 0.0;
  if (z < delta) return z * z / (2.0 * delta);
  return z - delta / 2.0;
}

}  // namespace

TEST(QuadraticLoss, FromRegressionHandExpansion) {
  Matrix X(1, 1);
  X << 1.0;
  auto q = quadratic_from_regression(X, Vector::Zero(1));
  EXPECT_DOUBLE_EQ(q->H()(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(q->b()[0], 0.0);
  EXPECT_DOUBLE_EQ(q->c(), 0.0);
  EXPECT_DOUBLE_EQ(q->value(v1(2.0)), 2.0);
}

TEST(QuadraticLoss, RegressionValueMatchesResidual) {
  std::mt19937_64 rng(1);
  Matrix X(7, 3);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 3; ++j) X(i, j) = std::normal_distribution<double>()(rng);
  const Vector y = testutil::random_vec(rng, 7);
  auto q = quadratic_from_regression(X, y);
  const Vector g = testutil::random_vec(rng, 3);
  EXPECT_NEAR(q->value(g), (y - X * g).squaredNorm() / (2.0 * 7), 1e-12);
}

TEST(QuadraticLoss, InterpolatingDesignHasZeroMinimum) {
  auto q = quadratic_from_regression(Matrix::Identity(2, 2), Vector::Ones(2));
  const Vector gamma = q->H().ldlt().solve(-q->b());
  EXPECT_NEAR(gamma[0], 1.0, 1e-15);
  EXPECT_NEAR(gamma[1], 1.0, 1e-15);
  EXPECT_NEAR(q->value(gamma), 0.0, 1e-15);
}

TEST(QuadraticLoss, ConstantHessian) {
  std::mt19937_64 rng(2);
  QuadraticLoss q(testutil::random_spd(rng, 4, 0.5, 2.0), testutil::random_vec(rng, 4));
  EXPECT_EQ((q.hess(Vector::Zero(4)) - q.hess(Vector::Ones(4))).norm(), 0.0);
  expect_derivatives_match(q, 3, 1e-5);
  expect_value_hessian_matches(q, 3, 1e-5);
}

TEST(QuadraticLoss, RejectsAsymmetricH) {
  Matrix H(2, 2);
  H << 1, 0.5, 0, 1;
  EXPECT_THROW(QuadraticLoss(H, Vector::Zero(2)), Error);
  EXPECT_THROW(QuadraticLoss(Matrix::Identity(2, 2), Vector::Zero(3)), Error);
}

TEST(SinusoidalLoss, DerivativesMatchFiniteDifferences) {
  expect_derivatives_match(SinusoidalQuadraticLoss(0.505, -1.0, 1.0), 4, 1e-5);
  expect_value_hessian_matches(SinusoidalQuadraticLoss(0.505, -1.0, 1.0), 4, 1e-5);
  expect_derivatives_match(SinusoidalQuadraticLoss(0.505, -1e-4, 100.0), 5, 1e-5);
}

TEST(SinusoidalLoss, CounterexampleCurvatureCertified) {
  TaskPool pool = counterexample_pool();
  double lo = 1e9, hi = -1e9;
  for (double w = -3.0; w <= 3.0; w += 1e-3) {
    const double h = expected_hess(pool, v1(w))(0, 0);
    lo = std::min(lo, h);
    hi = std::max(hi, h);
  }
  EXPECT_GE(lo, 0.01 - 1e-12);
  EXPECT_LE(hi, 2.01 + 1e-12);
  const auto& t = dynamic_cast<const SinusoidalQuadraticLoss&>(pool.task(0));
  EXPECT_NEAR(t.min_curvature(), 0.01, 1e-15);
  EXPECT_DOUBLE_EQ(t.max_curvature(), 2.01);
}

TEST(SmoothedHinge, ZeroWhenAllMarginsExceedOne) {
  Matrix X(2, 1);
  X << 2.0, -3.0;
  Vector y(2);
  y << 1.0, -1.0;
  SmoothedHingeLoss h(X, y, 0.1);
  EXPECT_EQ(h.value(v1(1.0)), 0.0);
  EXPECT_EQ(h.grad(v1(1.0))[0], 0.0);
}

TEST(SmoothedHinge, PiecewiseSingleSample) {
  SmoothedHingeLoss h(Matrix::Ones(1, 1), Vector::Ones(1), 0.5);
  EXPECT_DOUBLE_EQ(h.value(v1(0.0)), hinge_piece(1.0, 0.5));
  EXPECT_DOUBLE_EQ(h.value(v1(0.0)), 0.75);
  EXPECT_DOUBLE_EQ(h.value(v1(0.8)), hinge_piece(0.2, 0.5));
}

TEST(SmoothedHinge, QuadraticPieceHessian) {
  std::mt19937_64 rng(6);
  Matrix X(5, 3);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) X(i, j) = 0.01 * std::normal_distribution<double>()(rng);
  const Vector y = Vector::Ones(5);
  const double delta = 100.0;
  SmoothedHingeLoss h(X, y, delta);
  const Matrix expected = X.transpose() * X / (5.0 * delta);
  EXPECT_LT((h.hess(Vector::Zero(3)) - expected).norm(), 1e-15);
}

TEST(SmoothedHinge, DerivativesMatchAwayFromKinks) {
  std::mt19937_64 rng(7);
  Matrix X(30, 3);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 3; ++j) X(i, j) = std::normal_distribution<double>()(rng);
  Vector y(30);
  for (int i = 0; i < 30; ++i) y[i] = i % 2 ? 1.0 : -1.0;
  SmoothedHingeLoss h(X, y, 0.5);
  const Vector w = Vector::LinSpaced(3, -0.3, 0.4);
  EXPECT_LT(rel_err(h.grad(w), finite_diff_grad(h, w, 1e-6)), 1e-6);
}

TEST(HingeLoss, ValueAndZeroHessian) {
  Matrix X(2, 1);
  X << 1.0, 1.0;
  Vector y(2);
  y << 1.0, -1.0;
  HingeLoss h(X, y);
  EXPECT_DOUBLE_EQ(h.value(v1(0.0)), 1.0);
  EXPECT_EQ(h.hess(v1(0.3)).norm(), 0.0);
  EXPECT_FALSE(h.analytic_hessian());
}

TEST(FiniteDiff, QuadraticGradientExact) {
  const auto f = [](const Vector& w) { return 0.5 * w.squaredNorm(); };
  EXPECT_NEAR(finite_diff_grad(f, v1(3.0), 1e-5)[0], 3.0, 1e-9);
}

TEST(FiniteDiff, SineGradientWithinTaylorBound) {
  const double h = 1e-4;
  const auto f = [](const Vector& w) { return std::sin(w[0]); };
  EXPECT_NEAR(finite_diff_grad(f, v1(0.0), h)[0], 1.0, h * h);
}

TEST(FiniteDiff, HessianOfShiftedQuadratic) {
  QuadraticLoss q(Matrix::Identity(1, 1), v1(-1.0));
  EXPECT_NEAR(finite_diff_hess(q, v1(0.3), 1e-4)(0, 0), 1.0, 1e-6);
}

TEST(FiniteDiff, OverflowReported) {
  const auto f = [](const Vector& w) { return std::exp(1000.0 * w[0]); };
  try {
    finite_diff_grad(f, v1(1.0), 1e-5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::non_finite);
  }
}

TEST(FiniteDiffLoss, DerivativesFromValuesOnly) {
  FiniteDiffLoss loss(2, [](const Vector& w) { return w[0] * w[0] + 3.0 * w[0] * w[1] + std::cos(w[1]); });
  const Vector w = Vector::LinSpaced(2, 0.2, 0.7);
  Vector g(2);
  g << 2 * w[0] + 3 * w[1], 3 * w[0] - std::sin(w[1]);
  EXPECT_LT((loss.grad(w) - g).norm(), 1e-8);
  Matrix H(2, 2);
  H << 2, 3, 3, -std::cos(w[1]);
  EXPECT_LT((loss.hess(w) - H).norm(), 1e-6);
}

TEST(FiniteDiff, ScaledStep) {
  EXPECT_DOUBLE_EQ(scaled_step(1e-5, v1(0.5)), 1e-5);
  EXPECT_DOUBLE_EQ(scaled_step(1e-5, v1(-20.0)), 2e-4);
}

TEST(Clone, FreshCounters) {
  QuadraticLoss q(Matrix::Identity(1, 1), Vector::Zero(1));
  q.grad(v1(1.0));
  auto c = q.clone();
  EXPECT_EQ(c->counts().grad_evals, 0u);
  EXPECT_EQ(c->value(v1(2.0)), q.value(v1(2.0)));
}
