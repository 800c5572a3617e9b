#include <gtest/gtest.h>

#include "mamlode/losses.hpp"
#include "mamlode/meta_grad.hpp"
#include "test_util.hpp"

using namespace mamlode;
using testutil::v1;

namespace {

// F(w) = ½(1-α)²(w² + 1) for the symmetric pair.
double pair_F(double alpha, double w) { return 0.5 * (1 - alpha) * (1 - alpha) * (w * w + 1); }

}  // namespace

TEST(InnerStep, ClosedForms) {
  QuadraticLoss half_sq(Matrix::Identity(1, 1), Vector::Zero(1));
  EXPECT_DOUBLE_EQ(inner_step(half_sq, 0.4, v1(2.0))[0], (1 - 0.4) * 2.0);
  EXPECT_EQ(inner_step(half_sq, 0.0, v1(2.0))[0], 2.0);
  QuadraticLoss shifted(Matrix::Identity(1, 1), v1(-1.0), 0.5);
  EXPECT_DOUBLE_EQ(inner_step(shifted, 1.0, v1(0.0))[0], 1.0);
}

TEST(MamlTaskLoss, ComposesInnerStepWithValue) {
  QuadraticLoss half_sq(Matrix::Identity(1, 1), Vector::Zero(1));
  EXPECT_DOUBLE_EQ(maml_task_loss(half_sq, 0.4, v1(2.0)), half_sq.value(inner_step(half_sq, 0.4, v1(2.0))));
  EXPECT_NEAR(maml_task_loss(half_sq, 0.4, v1(2.0)), 0.72, 1e-15);
  EXPECT_EQ(maml_task_loss(half_sq, 0.0, v1(1.7)), half_sq.value(v1(1.7)));
  QuadraticLoss shifted(Matrix::Identity(1, 1), v1(-1.0), 0.5);
  for (double w : {-3.0, 0.0, 2.5}) EXPECT_NEAR(maml_task_loss(shifted, 1.0, v1(w)), 0.0, 1e-15);
}

TEST(MamlLoss, SymmetricPairClosedForm) {
  TaskPool pool = symmetric_pair_pool();
  EXPECT_NEAR(maml_loss(pool, 0.4, v1(0.0)), pair_F(0.4, 0.0), 1e-15);
  EXPECT_NEAR(maml_loss(pool, 0.4, v1(2.0)), pair_F(0.4, 2.0), 1e-15);
  for (double w : {-1.0, 0.3, 4.0}) EXPECT_EQ(maml_loss(pool, 0.0, v1(w)), expected_loss(pool, v1(w)));
}

TEST(MamlGrad, SymmetricPairClosedFormAndFiniteDifference) {
  TaskPool pool = symmetric_pair_pool();
  const double g = maml_grad(pool, 0.4, v1(2.0))[0];
  EXPECT_NEAR(g, 0.36 * 2.0, 1e-15);
  const auto F = [&](const Vector& w) { return maml_loss(pool, 0.4, w); };
  EXPECT_LT(std::abs(g - finite_diff_grad(F, v1(2.0), 1e-5)[0]) / std::abs(g), 1e-6);
  EXPECT_EQ(maml_grad(pool, 0.4, v1(0.0))[0], 0.0);
  EXPECT_EQ(maml_grad(pool, 0.0, v1(1.3))[0], expected_grad(pool, v1(1.3))[0]);
}

TEST(MamlGrad, RandomQuadraticPoolsMatchFiniteDifference) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const int d = 1 + static_cast<int>(seed % 6);
    TaskPool pool = testutil::random_quadratic_pool(seed, 1 + static_cast<int>(seed % 4), d);
    std::mt19937_64 rng(seed + 100);
    for (int k = 0; k < 10; ++k) {
      const Vector w = testutil::random_vec(rng, d, 2.0);
      const Vector g = maml_grad(pool, 0.3, w);
      const auto F = [&](const Vector& x) { return maml_loss(pool, 0.3, x); };
      const Vector fd = finite_diff_grad(F, w, scaled_step(1e-5, w));
      EXPECT_LT((g - fd).norm() / std::max(g.norm(), 1e-8), 1e-6) << "seed " << seed;
    }
  }
}

TEST(MamlGrad, CounterexampleMatchesFiniteDifference) {
  TaskPool pool = counterexample_pool();
  for (double w = -2.9; w < 3.0; w += 0.37) {
    const double g = maml_grad(pool, 0.4, v1(w))[0];
    const auto F = [&](const Vector& x) { return maml_loss(pool, 0.4, x); };
    const double fd = finite_diff_grad(F, v1(w), scaled_step(1e-5, v1(w)))[0];
    EXPECT_LT(std::abs(g - fd) / std::max(std::abs(g), 1e-8), 1e-4) << "w = " << w;
  }
}

TEST(MamlGrad, ChargesOneHessianAndTwoGradientsPerTask) {
  TaskPool pool = testutil::random_quadratic_pool(1, 4, 3);
  pool.reset_counts();
  maml_grad(pool, 0.2, Vector::Ones(3));
  EXPECT_EQ(pool.counts().hess_evals, 4u);
  EXPECT_EQ(pool.counts().grad_evals, 8u);
  pool.reset_counts();
  fo_maml_grad(pool, 0.2, Vector::Ones(3));
  EXPECT_EQ(pool.counts().hess_evals, 0u);
  EXPECT_EQ(pool.counts().grad_evals, 8u);
}

TEST(FoMamlGrad, SymmetricPair) {
  TaskPool pool = symmetric_pair_pool();
  EXPECT_NEAR(fo_maml_grad(pool, 0.4, v1(2.0))[0], 0.6 * 2.0, 1e-15);
  EXPECT_EQ(fo_maml_grad(pool, 0.0, v1(2.0))[0], expected_grad(pool, v1(2.0))[0]);
}

TEST(FoMamlGrad, CounterexampleDiffersByCorrectionFactor) {
  TaskPool pool = counterexample_pool();
  const double alpha = 0.4;
  for (double w : {-1.0, 0.2, 1.5}) {
    double oracle = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const auto& t = pool.task(i);
      const double a = 1.0 - alpha * t.hess(v1(w))(0, 0);
      oracle += pool.weight(i) * a * t.grad(inner_step(t, alpha, v1(w)))[0];
    }
    EXPECT_NEAR(maml_grad(pool, alpha, v1(w))[0], oracle, 1e-14);
    EXPECT_GT(std::abs(fo_maml_grad(pool, alpha, v1(w))[0] - oracle), 1e-3);
  }
}

TEST(CorrectionMatrix, IdentityMinusScaledHessian) {
  std::mt19937_64 rng(8);
  QuadraticLoss q(testutil::random_spd(rng, 3, 0.1, 2.0), Vector::Zero(3));
  const Matrix A = correction_matrix(q, 0.25, Vector::Zero(3));
  EXPECT_LT((A - (Matrix::Identity(3, 3) - 0.25 * q.H())).norm(), 1e-15);
}

TEST(MamlHess, SymmetricPairConstant) {
  TaskPool pool = symmetric_pair_pool();
  for (double w : {-3.0, 0.0, 2.0}) EXPECT_NEAR(maml_hess(pool, 0.4, v1(w))(0, 0), 0.36, 1e-15);
  EXPECT_EQ(maml_hess(pool, 0.0, v1(1.0)), expected_hess(pool, v1(1.0)));
}

TEST(MamlHess, ClosedFormMatchesJacobianOfGradient) {
  TaskPool pool = testutil::random_quadratic_pool(11, 3, 4);
  ASSERT_TRUE(all_quadratic(pool));
  const Vector w = Vector::LinSpaced(4, -1.0, 1.0);
  const Matrix H = maml_hess(pool, 0.3, w);
  const auto g = [&](const Vector& x) { return maml_grad(pool, 0.3, x); };
  const Matrix J = finite_diff_jacobian_sym(g, w, 1e-5);
  EXPECT_LT((H - J).norm() / H.norm(), 1e-8);
}

TEST(MamlHess, NonQuadraticUsesFiniteDifferenceOfGradient) {
  TaskPool pool = counterexample_pool();
  EXPECT_FALSE(all_quadratic(pool));
  const double w = 0.7, h = 1e-5;
  const double oracle =
      (maml_grad(pool, 0.4, v1(w + h))[0] - maml_grad(pool, 0.4, v1(w - h))[0]) / (2 * h);
  EXPECT_NEAR(maml_hess(pool, 0.4, v1(w))(0, 0), oracle, 1e-4);
}

TEST(Kernels, ParallelMatchesSerialReference) {
  for (std::uint64_t seed = 20; seed < 25; ++seed) {
    TaskPool pool = testutil::random_quadratic_pool(seed, 6, 5);
    std::mt19937_64 rng(seed);
    const Vector w = testutil::random_vec(rng, 5);
    EXPECT_EQ(maml_loss(pool, 0.2, w), reference::maml_loss(pool, 0.2, w));
    EXPECT_LT((maml_grad(pool, 0.2, w) - reference::maml_grad(pool, 0.2, w)).norm(), 1e-13);
    EXPECT_LT((fo_maml_grad(pool, 0.2, w) - reference::fo_maml_grad(pool, 0.2, w)).norm(), 1e-13);
    EXPECT_LT((expected_grad(pool, w) - reference::expected_grad(pool, w)).norm(), 1e-13);
    EXPECT_EQ(maml_grad(pool, 0.2, w, Exec::parallel), maml_grad(pool, 0.2, w, Exec::serial));
  }
}
