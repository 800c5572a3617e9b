#include "mamlode/losses.hpp"

#include <cmath>

namespace mamlode {

double scaled_step(double h, const Vector& w) {
  const double scale = w.size() == 0 ? 1.0 : std::max(1.0, w.cwiseAbs().maxCoeff());
  return h * scale;
}

// --- QuadraticLoss ---------------------------------------------------------

QuadraticLoss::QuadraticLoss(Matrix H, Vector b, double c)
    : TaskLoss(static_cast<std::size_t>(b.size())), H_(std::move(H)), b_(std::move(b)), c_(c) {
  if (H_.rows() != H_.cols() || H_.rows() != b_.size()) {
    throw Error(ErrorKind::dimension_mismatch, "quadratic loss: H must be d×d with d = len(b)");
  }
  if (!H_.allFinite() || !b_.allFinite() || !std::isfinite(c_)) {
    throw Error(ErrorKind::non_finite, "quadratic loss: non-finite coefficients");
  }
  const double asym = (H_ - H_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(1.0, H_.cwiseAbs().maxCoeff())) {
    throw Error(ErrorKind::invalid_argument, "quadratic loss: H must be symmetric");
  }
  H_ = 0.5 * (H_ + H_.transpose()).eval();
}

std::unique_ptr<TaskLoss> QuadraticLoss::clone() const {
  return std::make_unique<QuadraticLoss>(H_, b_, c_);
}

double QuadraticLoss::do_value(const Vector& w) const {
  return 0.5 * w.dot(H_ * w) + b_.dot(w) + c_;
}

Vector QuadraticLoss::do_grad(const Vector& w) const { return H_ * w + b_; }

Matrix QuadraticLoss::do_hess(const Vector&) const { return H_; }

std::shared_ptr<QuadraticLoss> quadratic_from_regression(const Matrix& X, const Vector& y) {
  if (X.rows() == 0 || X.cols() == 0 || y.size() == 0) {
    throw Error(ErrorKind::invalid_argument, "regression: empty data");
  }
  if (X.rows() != y.size()) {
    throw Error(ErrorKind::dimension_mismatch, "regression: rows(X) must equal len(y)");
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw Error(ErrorKind::non_finite, "regression: non-finite entries");
  }
  const double n = static_cast<double>(X.rows());
  Matrix H = (X.transpose() * X) / n;
  Vector b = -(X.transpose() * y) / n;
  const double c = y.squaredNorm() / (2.0 * n);
  return std::make_shared<QuadraticLoss>(std::move(H), std::move(b), c);
}

// --- SinusoidalQuadraticLoss -------------------------------------------------

SinusoidalQuadraticLoss::SinusoidalQuadraticLoss(double a, double amp, double freq)
    : TaskLoss(1), a_(a), amp_(amp), freq_(freq) {
  if (!std::isfinite(a) || !std::isfinite(amp) || !std::isfinite(freq)) {
    throw Error(ErrorKind::non_finite, "sinusoidal loss: non-finite coefficients");
  }
}

double SinusoidalQuadraticLoss::min_curvature() const noexcept {
  return 2.0 * a_ - std::abs(amp_) * freq_ * freq_;
}

double SinusoidalQuadraticLoss::max_curvature() const noexcept {
  return 2.0 * a_ + std::abs(amp_) * freq_ * freq_;
}

double SinusoidalQuadraticLoss::hessian_lipschitz() const noexcept {
  return std::abs(amp_) * std::abs(freq_ * freq_ * freq_);
}

std::unique_ptr<TaskLoss> SinusoidalQuadraticLoss::clone() const {
  return std::make_unique<SinusoidalQuadraticLoss>(a_, amp_, freq_);
}

double SinusoidalQuadraticLoss::do_value(const Vector& w) const {
  const double x = w[0];
  return a_ * x * x + amp_ * std::sin(freq_ * x);
}

Vector SinusoidalQuadraticLoss::do_grad(const Vector& w) const {
  const double x = w[0];
  Vector g(1);
  g[0] = 2.0 * a_ * x + amp_ * freq_ * std::cos(freq_ * x);
  return g;
}

Matrix SinusoidalQuadraticLoss::do_hess(const Vector& w) const {
  const double x = w[0];
  Matrix h(1, 1);
  h(0, 0) = 2.0 * a_ - amp_ * freq_ * freq_ * std::sin(freq_ * x);
  return h;
}

TaskPool counterexample_pool() {
  std::vector<TaskPtr> tasks{
      std::make_shared<SinusoidalQuadraticLoss>(0.505, -1.0, 1.0),
      std::make_shared<SinusoidalQuadraticLoss>(0.505, -0.0001, 100.0),
  };
  return TaskPool(std::move(tasks));
}

TaskPool symmetric_pair_pool() {
  Matrix one = Matrix::Identity(1, 1);
  std::vector<TaskPtr> tasks{
      std::make_shared<QuadraticLoss>(one, Vector::Constant(1, -1.0), 0.5),
      std::make_shared<QuadraticLoss>(one, Vector::Constant(1, 1.0), 0.5),
  };
  return TaskPool(std::move(tasks));
}

// --- SmoothedHingeLoss ------------------------------------------------------

namespace {

void check_labels(const Matrix& X, const Vector& y, const char* who) {
  if (X.rows() == 0 || X.cols() == 0) {
    throw Error(ErrorKind::invalid_argument, std::string(who) + ": empty data");
  }
  if (X.rows() != y.size()) {
    throw Error(ErrorKind::dimension_mismatch, std::string(who) + ": rows(X) must equal len(y)");
  }
  if (!X.allFinite()) throw Error(ErrorKind::non_finite, std::string(who) + ": non-finite features");
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    if (y[j] != 1.0 && y[j] != -1.0) {
      throw Error(ErrorKind::invalid_argument,
                  std::string(who) + ": labels must be +1 or -1 (row " + std::to_string(j) + ")");
    }
  }
}

}  // namespace

SmoothedHingeLoss::SmoothedHingeLoss(Matrix X, Vector y, double delta)
    : TaskLoss(static_cast<std::size_t>(X.cols())), X_(std::move(X)), y_(std::move(y)), delta_(delta) {
  check_labels(X_, y_, "smoothed hinge");
  if (!std::isfinite(delta_) || !(delta_ > 0.0)) {
    throw Error(ErrorKind::invalid_argument, "smoothed hinge: delta must be positive");
  }
}

std::unique_ptr<TaskLoss> SmoothedHingeLoss::clone() const {
  return std::make_unique<SmoothedHingeLoss>(X_, y_, delta_);
}

double SmoothedHingeLoss::do_value(const Vector& w) const {
  const Vector z = (1.0 - (y_.array() * (X_ * w).array())).matrix();
  double total = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double zj = z[j];
    if (zj <= 0.0) continue;
    total += zj < delta_ ? zj * zj / (2.0 * delta_) : zj - 0.5 * delta_;
  }
  return total / static_cast<double>(X_.rows());
}

Vector SmoothedHingeLoss::do_grad(const Vector& w) const {
  const Vector z = (1.0 - (y_.array() * (X_ * w).array())).matrix();
  // dφ/dz per sample, then chain through z = 1 - y xᵀw.
  Vector coeff(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double zj = z[j];
    const double dphi = zj <= 0.0 ? 0.0 : (zj < delta_ ? zj / delta_ : 1.0);
    coeff[j] = -dphi * y_[j];
  }
  return X_.transpose() * coeff / static_cast<double>(X_.rows());
}

Matrix SmoothedHingeLoss::do_hess(const Vector& w) const {
  const Vector z = (1.0 - (y_.array() * (X_ * w).array())).matrix();
  Vector weight = Vector::Zero(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    if (z[j] > 0.0 && z[j] < delta_) weight[j] = 1.0 / delta_;
  }
  Matrix h = X_.transpose() * weight.asDiagonal() * X_ / static_cast<double>(X_.rows());
  return 0.5 * (h + h.transpose());
}

std::shared_ptr<SmoothedHingeLoss> smoothed_hinge(const Matrix& X, const Vector& y, double delta) {
  return std::make_shared<SmoothedHingeLoss>(X, y, delta);
}

// --- HingeLoss ----------------------------------------------------------------

HingeLoss::HingeLoss(Matrix X, Vector y)
    : TaskLoss(static_cast<std::size_t>(X.cols())), X_(std::move(X)), y_(std::move(y)) {
  check_labels(X_, y_, "hinge");
}

std::unique_ptr<TaskLoss> HingeLoss::clone() const { return std::make_unique<HingeLoss>(X_, y_); }

double HingeLoss::do_value(const Vector& w) const {
  const Vector z = (1.0 - (y_.array() * (X_ * w).array())).matrix();
  return z.cwiseMax(0.0).sum() / static_cast<double>(X_.rows());
}

Vector HingeLoss::do_grad(const Vector& w) const {
  const Vector z = (1.0 - (y_.array() * (X_ * w).array())).matrix();
  Vector coeff(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) coeff[j] = z[j] > 0.0 ? -y_[j] : 0.0;
  return X_.transpose() * coeff / static_cast<double>(X_.rows());
}

Matrix HingeLoss::do_hess(const Vector&) const {
  return Matrix::Zero(X_.cols(), X_.cols());
}

// --- finite differences ---------------------------------------------------------

namespace {

double checked(double v) {
  if (!std::isfinite(v)) throw Error(ErrorKind::non_finite, "evaluation overflow");
  return v;
}

void check_step(double h) {
  if (!std::isfinite(h) || !(h > 0.0)) {
    throw Error(ErrorKind::invalid_argument, "finite difference step must be positive");
  }
}

}  // namespace

Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& w, double h) {
  check_step(h);
  Vector g(w.size());
  Vector probe = w;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    probe[i] = w[i] + h;
    const double up = checked(f(probe));
    probe[i] = w[i] - h;
    const double down = checked(f(probe));
    probe[i] = w[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

Vector finite_diff_grad(const TaskLoss& loss, const Vector& w, double h) {
  return finite_diff_grad([&loss](const Vector& x) { return loss.value(x); }, w, h);
}

Matrix finite_diff_hess(const std::function<double(const Vector&)>& f, const Vector& w, double h) {
  check_step(h);
  const Eigen::Index d = w.size();
  Matrix H(d, d);
  Vector probe = w;
  auto eval_at = [&](Eigen::Index i, double si, Eigen::Index j, double sj) {
    probe = w;
    probe[i] += si * h;
    probe[j] += sj * h;
    return checked(f(probe));
  };
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      const double pp = eval_at(i, 1, j, 1);
      const double pm = eval_at(i, 1, j, -1);
      const double mp = eval_at(i, -1, j, 1);
      const double mm = eval_at(i, -1, j, -1);
      H(i, j) = (pp - pm - mp + mm) / (4.0 * h * h);
      H(j, i) = H(i, j);
    }
  }
  return H;
}

Matrix finite_diff_hess(const TaskLoss& loss, const Vector& w, double h) {
  return finite_diff_hess([&loss](const Vector& x) { return loss.value(x); }, w, h);
}

Matrix finite_diff_jacobian_sym(const std::function<Vector(const Vector&)>& g, const Vector& w,
                                double h) {
  check_step(h);
  const Eigen::Index d = w.size();
  Matrix J(d, d);
  Vector probe = w;
  for (Eigen::Index i = 0; i < d; ++i) {
    probe[i] = w[i] + h;
    const Vector up = g(probe);
    probe[i] = w[i] - h;
    const Vector down = g(probe);
    probe[i] = w[i];
    if (!up.allFinite() || !down.allFinite()) {
      throw Error(ErrorKind::non_finite, "evaluation overflow");
    }
    J.col(i) = (up - down) / (2.0 * h);
  }
  return 0.5 * (J + J.transpose());
}

// --- FiniteDiffLoss -------------------------------------------------------------

FiniteDiffLoss::FiniteDiffLoss(std::size_t dim, ValueFn value_fn, double h_grad, double h_hess)
    : TaskLoss(dim), value_fn_(std::move(value_fn)), h_grad_(h_grad), h_hess_(h_hess) {
  if (!value_fn_) throw Error(ErrorKind::invalid_argument, "finite-diff loss: empty value function");
  check_step(h_grad_);
  check_step(h_hess_);
}

std::unique_ptr<TaskLoss> FiniteDiffLoss::clone() const {
  return std::make_unique<FiniteDiffLoss>(dim(), value_fn_, h_grad_, h_hess_);
}

double FiniteDiffLoss::do_value(const Vector& w) const { return value_fn_(w); }

Vector FiniteDiffLoss::do_grad(const Vector& w) const {
  return finite_diff_grad(value_fn_, w, scaled_step(h_grad_, w));
}

Matrix FiniteDiffLoss::do_hess(const Vector& w) const {
  return finite_diff_hess(value_fn_, w, scaled_step(h_hess_, w));
}

}  // namespace mamlode
