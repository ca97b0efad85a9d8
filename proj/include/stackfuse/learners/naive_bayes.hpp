#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "stackfuse/learners/common.hpp"

namespace stackfuse {

struct GaussianNBModel {
  std::vector<double> class_priors;
  Matrix means;      // k' x d
  Matrix variances;  // k' x d, each >= the smoothing floor

  std::size_t n_classes() const noexcept { return class_priors.size(); }
  std::size_t dim() const noexcept { return means.cols(); }
};

/// Per-class Gaussian fit. Variances are floored at
/// nb_var_smoothing * (largest per-feature variance over all rows).
inline GaussianNBModel train_gaussian_nb(const TrainingSet& data, const TrainConfig& cfg) {
  cfg.validate();
  detail::require_trainable(data, "gaussian naive bayes");
  const auto counts = class_counts(data);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw ValidationError(ErrorKind::empty_class, "gaussian naive bayes: class " + std::to_string(c) + " has no rows");
    }
  }

  const std::size_t k = data.n_classes;
  const std::size_t d = data.dim();
  const std::size_t n = data.size();

  GaussianNBModel model;
  model.class_priors.resize(k);
  model.means = Matrix(k, d);
  model.variances = Matrix(k, d);

  for (std::size_t i = 0; i < n; ++i) {
    auto x = data.x.row(i);
    for (std::size_t j = 0; j < d; ++j) model.means(data.y[i], j) += x[j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    model.class_priors[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) model.means(c, j) /= static_cast<double>(counts[c]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto x = data.x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = x[j] - model.means(data.y[i], j);
      model.variances(data.y[i], j) += dev * dev;
    }
  }

  double max_var = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += data.x(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (data.x(i, j) - mean) * (data.x(i, j) - mean);
    max_var = std::max(max_var, var / static_cast<double>(n));
  }
  // All-constant features: fall back to the smoothing value as an absolute floor.
  const double floor = max_var > 0.0 ? cfg.nb_var_smoothing * max_var : cfg.nb_var_smoothing;

  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d; ++j) {
      model.variances(c, j) = std::max(model.variances(c, j) / static_cast<double>(counts[c]), floor);
    }
  }
  return model;
}

/// Log of prior times the Gaussian likelihood, per class.
inline Matrix joint_log_likelihood(const GaussianNBModel& model, const Matrix& x) {
  detail::require_dim(model.dim(), x);
  const std::size_t k = model.n_classes();
  Matrix out(x.rows(), k);
  std::vector<double> log_norm(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    double s = std::log(model.class_priors[c]);
    for (std::size_t j = 0; j < model.dim(); ++j) s -= 0.5 * std::log(2.0 * std::numbers::pi * model.variances(c, j));
    log_norm[c] = s;
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    for (std::size_t c = 0; c < k; ++c) {
      double s = log_norm[c];
      for (std::size_t j = 0; j < model.dim(); ++j) {
        const double dev = row[j] - model.means(c, j);
        s -= 0.5 * dev * dev / model.variances(c, j);
      }
      out(r, c) = s;
    }
  }
  return out;
}

inline Matrix predict_proba(const GaussianNBModel& model, const Matrix& x) {
  Matrix out = joint_log_likelihood(model, x);
  for (std::size_t r = 0; r < out.rows(); ++r) detail::softmax_inplace(out.row(r));
  return out;
}

}  // namespace stackfuse
