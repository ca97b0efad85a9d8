#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "stackfuse/learners/common.hpp"

namespace stackfuse {

/// Softmax regression: scores = weights * x + bias, one row per class.
struct LinearModel {
  Matrix weights;  // k' x d
  std::vector<double> bias;

  std::size_t n_classes() const noexcept { return weights.rows(); }
  std::size_t dim() const noexcept { return weights.cols(); }

  Matrix scores(const Matrix& x) const {
    detail::require_dim(dim(), x);
    Matrix out(x.rows(), n_classes());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto row = x.row(r);
      for (std::size_t c = 0; c < n_classes(); ++c) out(r, c) = dot(weights.row(c), row) + bias[c];
    }
    return out;
  }
};

/// L2-regularized multinomial cross-entropy over a training set:
///   (1/n) sum_i -log softmax(W x_i + b)[y_i] + (l2/2) ||W||^2
/// Parameters are flattened as [W row-major | b]. The bias is not penalized.
class LogRegObjective {
 public:
  LogRegObjective(const TrainingSet& data, double l2) : data_(data), l2_(l2) {}
  LogRegObjective(TrainingSet&&, double) = delete;  // holds a reference

  std::size_t n_classes() const noexcept { return data_.n_classes; }
  std::size_t dim() const noexcept { return data_.dim(); }
  std::size_t n_params() const noexcept { return n_classes() * (dim() + 1); }

  double value(std::span<const double> params) const { return evaluate(params, {}); }

  /// Returns the objective and writes its gradient into `grad`.
  double value_and_gradient(std::span<const double> params, std::span<double> grad) const {
    return evaluate(params, grad);
  }

 private:
  double evaluate(std::span<const double> params, std::span<double> grad) const {
    const std::size_t k = n_classes();
    const std::size_t d = dim();
    const std::size_t n = data_.size();
    const double* w = params.data();
    const double* b = params.data() + k * d;
    const bool want_grad = !grad.empty();
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

    std::vector<double> z(k);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto x = data_.x.row(i);
      for (std::size_t c = 0; c < k; ++c) {
        double s = b[c];
        const double* wc = w + c * d;
        for (std::size_t j = 0; j < d; ++j) s += wc[j] * x[j];
        z[c] = s;
      }
      const double lse = detail::log_sum_exp(z);
      loss += lse - z[data_.y[i]];
      if (want_grad) {
        for (std::size_t c = 0; c < k; ++c) {
          const double residual = std::exp(z[c] - lse) - (c == data_.y[i] ? 1.0 : 0.0);
          double* gc = grad.data() + c * d;
          for (std::size_t j = 0; j < d; ++j) gc[j] += residual * x[j];
          grad[k * d + c] += residual;
        }
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    double penalty = 0.0;
    for (std::size_t p = 0; p < k * d; ++p) penalty += w[p] * w[p];
    loss = loss * inv_n + 0.5 * l2_ * penalty;
    if (want_grad) {
      for (std::size_t p = 0; p < k * d; ++p) grad[p] = grad[p] * inv_n + l2_ * w[p];
      for (std::size_t c = 0; c < k; ++c) grad[k * d + c] *= inv_n;
    }
    return loss;
  }

  const TrainingSet& data_;
  double l2_;
};

/// Optional diagnostics from train_logreg.
struct LogRegTrace {
  std::vector<double> losses;  // objective after each accepted step (index 0 = start)
  std::size_t iterations = 0;
  bool converged = false;
};

/// Full-batch gradient descent from zero with backtracking: a step that
/// increases the objective is halved and retried. Accepted steps grow the
/// step size by 1.25 so flat regions are crossed quickly.
inline LinearModel train_logreg(const TrainingSet& data, const TrainConfig& cfg, LogRegTrace* trace = nullptr) {
  cfg.validate();
  detail::require_trainable(data, "logistic regression");

  const LogRegObjective objective(data, cfg.lr_l2);
  const std::size_t k = data.n_classes;
  const std::size_t d = data.dim();
  std::vector<double> params(objective.n_params(), 0.0);
  std::vector<double> grad(params.size());
  std::vector<double> trial(params.size());
  std::vector<double> trial_grad(params.size());

  double loss = objective.value_and_gradient(params, grad);
  double step = cfg.lr_step;
  if (trace) trace->losses.push_back(loss);

  std::size_t iter = 0;
  bool converged = false;
  for (; iter < cfg.lr_max_iters; ++iter) {
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    if (gmax < cfg.lr_tol) {
      converged = true;
      break;
    }
    bool accepted = false;
    while (step > 1e-16) {
      for (std::size_t p = 0; p < params.size(); ++p) trial[p] = params[p] - step * grad[p];
      const double trial_loss = objective.value_and_gradient(trial, trial_grad);
      if (std::isfinite(trial_loss) && trial_loss <= loss) {
        params.swap(trial);
        grad.swap(trial_grad);
        loss = trial_loss;
        step *= 1.25;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      converged = true;  // no descent direction left at machine precision
      break;
    }
    if (trace) trace->losses.push_back(loss);
  }
  if (trace) {
    trace->iterations = iter;
    trace->converged = converged;
  }

  LinearModel model;
  model.weights = Matrix(k, d);
  std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(k * d), model.weights.data().begin());
  model.bias.assign(params.begin() + static_cast<std::ptrdiff_t>(k * d), params.end());
  return model;
}

inline Matrix predict_proba(const LinearModel& model, const Matrix& x) {
  Matrix out = model.scores(x);
  for (std::size_t r = 0; r < out.rows(); ++r) detail::softmax_inplace(out.row(r));
  return out;
}

/// Binary decision value (positive class = index 1) for a two-class model.
inline std::vector<double> binary_margins(const LinearModel& model, const Matrix& x) {
  const Matrix s = model.scores(x);
  std::vector<double> out(s.rows());
  for (std::size_t r = 0; r < s.rows(); ++r) out[r] = s(r, 1) - s(r, 0);
  return out;
}

}  // namespace stackfuse
