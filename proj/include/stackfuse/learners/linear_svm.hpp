#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "stackfuse/learners/common.hpp"

namespace stackfuse {

/// Sigmoid map from a decision value f to P(positive) = 1 / (1 + exp(a f + b)).
struct PlattScaling {
  double a = -1.0;
  double b = 0.0;

  double operator()(double margin) const { return detail::sigmoid(-(a * margin + b)); }
};

/// Fits Platt's sigmoid by Newton's method with backtracking, using the
/// regularized targets (N+ + 1)/(N+ + 2) and 1/(N- + 2) instead of 0/1.
/// This is the numerically careful formulation from Lin, Lin & Weng (2007).
inline PlattScaling fit_platt(std::span<const double> margins, std::span<const std::size_t> positive) {
  const std::size_t n = margins.size();
  double n_pos = 0.0;
  for (auto p : positive) n_pos += p ? 1.0 : 0.0;
  const double n_neg = static_cast<double>(n) - n_pos;
  const double hi_target = (n_pos + 1.0) / (n_pos + 2.0);
  const double lo_target = 1.0 / (n_neg + 2.0);

  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = positive[i] ? hi_target : lo_target;

  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  constexpr double kEps = 1e-5;

  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fApB = margins[i] * a + b;
      if (fApB >= 0) {
        f += t[i] * fApB + std::log1p(std::exp(-fApB));
      } else {
        f += (t[i] - 1.0) * fApB + std::log1p(std::exp(fApB));
      }
    }
    return f;
  };

  double a = 0.0;
  double b = std::log((n_neg + 1.0) / (n_pos + 1.0));
  double fval = objective(a, b);

  for (int iter = 0; iter < kMaxIter; ++iter) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fApB = margins[i] * a + b;
      double p, q;
      if (fApB >= 0) {
        p = std::exp(-fApB) / (1.0 + std::exp(-fApB));
        q = 1.0 / (1.0 + std::exp(-fApB));
      } else {
        p = 1.0 / (1.0 + std::exp(fApB));
        q = std::exp(fApB) / (1.0 + std::exp(fApB));
      }
      const double d2 = p * q;
      h11 += margins[i] * margins[i] * d2;
      h22 += d2;
      h21 += margins[i] * d2;
      const double d1 = t[i] - p;
      g1 += margins[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;

    double step = 1.0;
    bool moved = false;
    while (step >= kMinStep) {
      const double new_a = a + step * da;
      const double new_b = b + step * db;
      const double new_f = objective(new_a, new_b);
      if (new_f < fval + 0.0001 * step * gd) {
        a = new_a;
        b = new_b;
        fval = new_f;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return {a, b};
}

/// One hinge-loss separator over d features plus bias, with its Platt map.
struct BinarySvm {
  std::vector<double> weights;
  double bias = 0.0;
  PlattScaling platt;

  double margin(std::span<const double> x) const { return dot(weights, x) + bias; }
};

/// Linear SVC: a single machine for two classes (positive = class 1),
/// one machine per class (one-vs-rest) otherwise.
struct LinearSvmModel {
  std::vector<BinarySvm> machines;
  std::size_t n_classes = 0;
  std::size_t dim = 0;
};

/// Pegasos: epoch-based stochastic subgradient descent on
///   (lambda/2)||w||^2 + (1/n) sum_i max(0, 1 - y_i (w.x_i + b))
/// with lambda = 1/(C n) and step 1/(lambda t). The bias rides along as a
/// constant-1 feature (so it is regularized too). Each epoch visits the rows
/// in a fresh permutation drawn from `seed`.
inline BinarySvm train_pegasos(const Matrix& x, std::span<const std::size_t> positive, double c,
                               std::size_t epochs, Seed seed) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const double lambda = 1.0 / (c * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);
  Rng rng(seed);

  std::vector<double> w(d + 1, 0.0);  // last entry is the bias
  double norm_sq = 0.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (auto i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double label = positive[i] ? 1.0 : -1.0;
      auto row = x.row(i);
      double score = w[d];
      for (std::size_t j = 0; j < d; ++j) score += w[j] * row[j];
      const double shrink = 1.0 - eta * lambda;
      for (double& v : w) v *= shrink;
      if (label * score < 1.0) {
        for (std::size_t j = 0; j < d; ++j) w[j] += eta * label * row[j];
        w[d] += eta * label;
      }
      norm_sq = 0.0;
      for (double v : w) norm_sq += v * v;
      if (norm_sq > radius * radius) {
        const double scale = radius / std::sqrt(norm_sq);
        for (double& v : w) v *= scale;
      }
    }
  }

  BinarySvm svm;
  svm.weights.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(d));
  svm.bias = w[d];
  std::vector<double> margins(n);
  for (std::size_t i = 0; i < n; ++i) margins[i] = svm.margin(x.row(i));
  svm.platt = fit_platt(margins, positive);
  return svm;
}

inline LinearSvmModel train_linear_svm(const TrainingSet& data, const TrainConfig& cfg) {
  cfg.validate();
  detail::require_trainable(data, "linear svm");
  LinearSvmModel model;
  model.n_classes = data.n_classes;
  model.dim = data.dim();
  std::vector<std::size_t> positive(data.size());
  if (data.n_classes == 2) {
    for (std::size_t i = 0; i < data.size(); ++i) positive[i] = data.y[i] == 1 ? 1 : 0;
    model.machines.push_back(train_pegasos(data.x, positive, cfg.svm_c, cfg.svm_epochs, cfg.seed));
    return model;
  }
  for (std::size_t c = 0; c < data.n_classes; ++c) {
    for (std::size_t i = 0; i < data.size(); ++i) positive[i] = data.y[i] == c ? 1 : 0;
    model.machines.push_back(train_pegasos(data.x, positive, cfg.svm_c, cfg.svm_epochs, derive_seed(cfg.seed, c)));
  }
  return model;
}

/// Raw decision values: one column for a binary model, k' columns otherwise.
inline Matrix decision_function(const LinearSvmModel& model, const Matrix& x) {
  detail::require_dim(model.dim, x);
  Matrix out(x.rows(), model.machines.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t m = 0; m < model.machines.size(); ++m) out(r, m) = model.machines[m].margin(x.row(r));
  }
  return out;
}

/// Binary: sign of the margin. Multiclass: highest margin, lowest index on ties.
inline std::vector<std::size_t> predict(const LinearSvmModel& model, const Matrix& x) {
  const Matrix margins = decision_function(model, x);
  std::vector<std::size_t> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    out[r] = model.n_classes == 2 ? (margins(r, 0) > 0.0 ? 1 : 0) : argmax(margins.row(r));
  }
  return out;
}

/// Platt-calibrated probabilities, renormalized across classes.
inline Matrix predict_proba(const LinearSvmModel& model, const Matrix& x) {
  const Matrix margins = decision_function(model, x);
  Matrix out(x.rows(), model.n_classes);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (model.n_classes == 2) {
      const double p = model.machines[0].platt(margins(r, 0));
      out(r, 0) = 1.0 - p;
      out(r, 1) = p;
      continue;
    }
    double total = 0.0;
    for (std::size_t c = 0; c < model.n_classes; ++c) {
      out(r, c) = model.machines[c].platt(margins(r, c));
      total += out(r, c);
    }
    for (std::size_t c = 0; c < model.n_classes; ++c) {
      out(r, c) = total > 0.0 ? out(r, c) / total : 1.0 / static_cast<double>(model.n_classes);
    }
  }
  return out;
}

}  // namespace stackfuse
