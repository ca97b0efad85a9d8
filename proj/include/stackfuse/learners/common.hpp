#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "stackfuse/core.hpp"
#include "stackfuse/fusion.hpp"
#include "stackfuse/matrix.hpp"
#include "stackfuse/random.hpp"

namespace stackfuse {

enum class MaxFeatures { sqrt, all };

/// Meta-classifier hyperparameters. Defaults mirror the usual
/// reference-library defaults for each learner.
struct TrainConfig {
  Seed seed{0};
  double lr_step = 1.0;
  double lr_l2 = 1e-4;
  std::size_t lr_max_iters = 1000;
  double lr_tol = 1e-6;
  double svm_c = 1.0;
  std::size_t svm_epochs = 50;
  std::size_t rf_trees = 100;
  MaxFeatures rf_max_features = MaxFeatures::sqrt;
  bool rf_bootstrap = true;
  double nb_var_smoothing = 1e-9;

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ValidationError(ErrorKind::invalid_argument, what);
    };
    require(lr_step > 0.0 && std::isfinite(lr_step), "lr_step must be positive");
    require(lr_l2 >= 0.0 && std::isfinite(lr_l2), "lr_l2 must be nonnegative");
    require(lr_max_iters > 0, "lr_max_iters must be positive");
    require(lr_tol > 0.0, "lr_tol must be positive");
    require(svm_c > 0.0 && std::isfinite(svm_c), "svm_c must be positive");
    require(svm_epochs > 0, "svm_epochs must be positive");
    require(rf_trees > 0, "rf_trees must be positive");
    require(nb_var_smoothing > 0.0, "nb_var_smoothing must be positive");
  }
};

/// Feature matrix plus integer labels in [0, n_classes).
struct TrainingSet {
  Matrix x;
  std::vector<std::size_t> y;
  std::size_t n_classes = 0;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t dim() const noexcept { return x.cols(); }
};

inline TrainingSet make_training_set(Matrix x, std::vector<std::size_t> y, std::size_t n_classes) {
  if (x.rows() != y.size()) throw ValidationError(ErrorKind::dimension_mismatch, "feature rows and labels differ in count");
  for (auto label : y) {
    if (label >= n_classes) throw ValidationError(ErrorKind::value_range, "label outside class range");
  }
  return TrainingSet{std::move(x), std::move(y), n_classes};
}

/// Binary relabeling: 1 where `positive(label)` holds, else 0.
template <typename Pred>
TrainingSet relabel_binary(const TrainingSet& data, Pred positive) {
  TrainingSet out{data.x, std::vector<std::size_t>(data.y.size()), 2};
  for (std::size_t i = 0; i < data.y.size(); ++i) out.y[i] = positive(data.y[i]) ? 1 : 0;
  return out;
}

inline std::vector<std::size_t> class_counts(const TrainingSet& data) {
  std::vector<std::size_t> counts(data.n_classes, 0);
  for (auto label : data.y) ++counts[label];
  return counts;
}

namespace detail {

inline void require_trainable(const TrainingSet& data, const char* learner) {
  if (data.size() == 0) throw ValidationError(ErrorKind::empty_input, std::string(learner) + ": empty training set");
  if (data.n_classes < 2) throw ValidationError(ErrorKind::single_class, std::string(learner) + ": fewer than 2 classes");
  if (!data.x.all_finite()) throw ValidationError(ErrorKind::non_finite, std::string(learner) + ": non-finite features");
  auto counts = class_counts(data);
  auto present = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; });
  if (present < 2) {
    throw ValidationError(ErrorKind::single_class, std::string(learner) + ": training labels contain a single class");
  }
}

inline void require_dim(std::size_t expected, const Matrix& x) {
  if (x.cols() != expected) {
    throw ValidationError(ErrorKind::dimension_mismatch, "model expects " + std::to_string(expected) +
                                                             " features, got " + std::to_string(x.cols()));
  }
}

inline double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

/// In-place softmax of a row of scores.
inline void softmax_inplace(std::span<double> v) {
  const double lse = log_sum_exp(v);
  for (double& x : v) x = std::exp(x - lse);
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

/// Argmax per row, lowest index on ties.
inline std::vector<std::size_t> argmax_rows(const Matrix& scores) {
  std::vector<std::size_t> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) out[r] = argmax(scores.row(r));
  return out;
}

}  // namespace stackfuse
