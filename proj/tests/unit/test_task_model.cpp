#include <gtest/gtest.h>

#include "mamlode/losses.hpp"
#include "mamlode/task_model.hpp"
#include "test_util.hpp"

using namespace mamlode;
using testutil::v1;

namespace {

std::string error_message(const std::function<void()>& fn, ErrorKind* kind = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (kind) *kind = e.kind();
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ExpectedLoss, IdenticalTasksReduceToOne) {
  TaskPool pool = testutil::scalar_pool({{1.0, 0.0}, {1.0, 0.0}});
  EXPECT_DOUBLE_EQ(expected_loss(pool, v1(2.0)), 2.0);
}

TEST(ExpectedLoss, SymmetricPairAtOrigin) {
  TaskPool pool = symmetric_pair_pool();
  const double direct = 0.5 * pool.task(0).value(v1(0.0)) + 0.5 * pool.task(1).value(v1(0.0));
  EXPECT_DOUBLE_EQ(expected_loss(pool, v1(0.0)), direct);
  EXPECT_DOUBLE_EQ(expected_loss(pool, v1(0.0)), 0.5);
}

TEST(ExpectedGrad, MatchesFiniteDifference) {
  TaskPool pool = symmetric_pair_pool();
  const auto f = [&](const Vector& w) { return expected_loss(pool, w); };
  const Vector fd = finite_diff_grad(f, v1(2.0), 1e-5);
  EXPECT_NEAR(expected_grad(pool, v1(2.0))[0], fd[0], 1e-8);
  EXPECT_NEAR(expected_grad(pool, v1(2.0))[0], 2.0, 1e-15);
  EXPECT_EQ(expected_grad(pool, v1(0.0))[0], 0.0);
}

TEST(ExpectedGrad, SingleQuadratic) {
  TaskPool pool = testutil::scalar_pool({{1.0, 0.0}});
  EXPECT_DOUBLE_EQ(expected_grad(pool, v1(3.0))[0], 3.0);
}

TEST(ExpectedHess, ParallelMatchesSerialBitwise) {
  TaskPool pool = testutil::random_quadratic_pool(3, 5, 4);
  const Vector w = Vector::LinSpaced(4, -1.0, 2.0);
  EXPECT_EQ(expected_loss(pool, w, Exec::parallel), expected_loss(pool, w, Exec::serial));
  EXPECT_EQ(expected_grad(pool, w, Exec::parallel), expected_grad(pool, w, Exec::serial));
  EXPECT_EQ(expected_hess(pool, w, Exec::parallel), expected_hess(pool, w, Exec::serial));
}

TEST(TaskPool, RejectsWeightsNotSummingToOne) {
  auto t = std::make_shared<QuadraticLoss>(Matrix::Identity(1, 1), Vector::Zero(1));
  ErrorKind kind{};
  const std::string msg = error_message([&] { TaskPool({t, t}, {0.5, 0.499}); }, &kind);
  EXPECT_EQ(kind, ErrorKind::invalid_pool);
  EXPECT_NE(msg.find("sum to 1"), std::string::npos);
}

TEST(TaskPool, RejectsMixedDimensions) {
  auto a = std::make_shared<QuadraticLoss>(Matrix::Identity(2, 2), Vector::Zero(2));
  auto b = std::make_shared<QuadraticLoss>(Matrix::Identity(3, 3), Vector::Zero(3));
  const auto issues = validate_pool({a, b}, {0.5, 0.5});
  ASSERT_FALSE(issues.empty());
  EXPECT_EQ(issues.front(), "dimension mismatch");
  EXPECT_NE(error_message([&] { TaskPool({a, b}); }).find("dimension mismatch"), std::string::npos);
}

TEST(TaskPool, RejectsNegativeWeight) {
  auto t = std::make_shared<QuadraticLoss>(Matrix::Identity(1, 1), Vector::Zero(1));
  const auto issues = validate_pool({t, t}, {1.5, -0.5});
  ASSERT_FALSE(issues.empty());
  EXPECT_EQ(issues.front(), "weights must be non-negative");
}

TEST(TaskPool, ValidatePoolAcceptsWellFormed) {
  EXPECT_TRUE(validate_pool(symmetric_pair_pool()).empty());
}

TEST(TaskPool, ValidatePoolFlagsSingularCurvature) {
  Matrix X(3, 2);
  X << 1, 0, 2, 0, 3, 0;
  auto task = quadratic_from_regression(X, Vector::Ones(3));
  const auto issues = validate_pool({task}, {1.0});
  bool flagged = false;
  for (const auto& s : issues) flagged = flagged || s.find("not strongly convex") != std::string::npos;
  EXPECT_TRUE(flagged);
}

TEST(TaskPool, EmptyPoolRejected) {
  EXPECT_THROW(TaskPool(std::vector<TaskPtr>{}), Error);
}

TEST(TaskLoss, WrongDimensionThrows) {
  QuadraticLoss q(Matrix::Identity(2, 2), Vector::Zero(2));
  ErrorKind kind{};
  error_message([&] { q.value(Vector::Zero(3)); }, &kind);
  EXPECT_EQ(kind, ErrorKind::dimension_mismatch);
}

TEST(Counters, CountPerEvaluationAndReset) {
  TaskPool pool = symmetric_pair_pool();
  pool.reset_counts();
  expected_loss(pool, v1(1.0));
  expected_grad(pool, v1(1.0));
  expected_grad(pool, v1(1.0));
  expected_hess(pool, v1(1.0));
  const EvalCounts c = pool.counts();
  EXPECT_EQ(c.value_evals, 2u);
  EXPECT_EQ(c.grad_evals, 4u);
  EXPECT_EQ(c.hess_evals, 2u);
  pool.reset_counts();
  EXPECT_EQ(pool.counts(), EvalCounts{});
}

TEST(Counters, CloneHasIndependentCounters) {
  TaskPool pool = symmetric_pair_pool();
  pool.reset_counts();
  TaskPool copy = pool.clone();
  expected_grad(copy, v1(1.0));
  EXPECT_EQ(pool.counts().grad_evals, 0u);
  EXPECT_EQ(copy.counts().grad_evals, 2u);
}

TEST(Counters, ParallelEvaluationCountsEveryCall) {
  TaskPool pool = testutil::random_quadratic_pool(5, 8, 3);
  pool.reset_counts();
  for (int k = 0; k < 25; ++k) expected_grad(pool, Vector::Ones(3), Exec::parallel);
  EXPECT_EQ(pool.counts().grad_evals, 200u);
}

TEST(TaskPool, ReweightedValidatesAgain) {
  TaskPool pool = symmetric_pair_pool();
  TaskPool r = pool.reweighted({0.25, 0.75});
  EXPECT_DOUBLE_EQ(expected_grad(r, v1(0.0))[0], 0.25 * -1.0 + 0.75 * 1.0);
  EXPECT_THROW(pool.reweighted({0.2, 0.2}), Error);
}

TEST(MamlConfig, ValidateNamesField) {
  MamlConfig c;
  c.beta = 0.0;
  const std::string msg = error_message([&] { c.validate(); });
  EXPECT_NE(msg.find("beta"), std::string::npos);
  c.beta = 0.1;
  c.max_iters = 0;
  EXPECT_NE(error_message([&] { c.validate(); }).find("max_iters"), std::string::npos);
}
