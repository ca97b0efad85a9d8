#pragma once

#include <cstddef>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "stackfuse/error.hpp"

namespace stackfuse {

/// counts[t][p]: examples with true class t predicted as p.
struct ConfusionMatrix {
  std::size_t n_classes = 0;
  std::vector<std::size_t> counts;  // row-major k x k

  std::size_t operator()(std::size_t truth, std::size_t predicted) const { return counts[truth * n_classes + predicted]; }

  std::size_t total() const {
    std::size_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// One table row: accuracy plus macro-averaged F1, precision and recall.
struct EvalReport {
  std::string config;  // e.g. a base model name or "concat/voting"
  double acc = 0.0;
  double f_macro = 0.0;
  double prec = 0.0;
  double rec = 0.0;
  std::vector<ClassScores> per_class;
  ConfusionMatrix confusion;
};

inline ConfusionMatrix confusion(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                                 std::size_t k) {
  if (y_true.size() != y_pred.size()) {
    throw ValidationError(ErrorKind::dimension_mismatch, "y_true has " + std::to_string(y_true.size()) +
                                                             " entries, y_pred has " + std::to_string(y_pred.size()));
  }
  if (y_true.empty()) throw ValidationError(ErrorKind::empty_input, "nothing to evaluate");
  ConfusionMatrix cm{k, std::vector<std::size_t>(k * k, 0)};
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] >= k || y_pred[i] >= k) {
      throw ValidationError(ErrorKind::value_range, "class index out of range at position " + std::to_string(i));
    }
    ++cm.counts[y_true[i] * k + y_pred[i]];
  }
  return cm;
}

namespace detail {

inline double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace detail

/// Per-class precision, recall and F1 with 0/0 taken as 0. Classes missing
/// from both y_true and y_pred still count toward the macro means.
inline EvalReport evaluate(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred, std::size_t k,
                           std::string config = {}) {
  EvalReport report;
  report.config = std::move(config);
  report.confusion = confusion(y_true, y_pred, k);
  const auto& cm = report.confusion;

  std::size_t trace = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t o = 0; o < k; ++o) {
      predicted += cm(o, c);
      actual += cm(c, o);
    }
    const double tp = static_cast<double>(cm(c, c));
    trace += cm(c, c);
    ClassScores s;
    s.precision = detail::safe_ratio(tp, static_cast<double>(predicted));
    s.recall = detail::safe_ratio(tp, static_cast<double>(actual));
    s.f1 = detail::safe_ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
    report.per_class.push_back(s);
  }
  for (const auto& s : report.per_class) {
    report.prec += s.precision;
    report.rec += s.recall;
    report.f_macro += s.f1;
  }
  const double kd = static_cast<double>(k);
  report.prec /= kd;
  report.rec /= kd;
  report.f_macro /= kd;
  report.acc = static_cast<double>(trace) / static_cast<double>(cm.total());
  return report;
}

/// Three-decimal rendering used in printed tables.
inline std::string format3(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", value);
  return buf;
}

}  // namespace stackfuse
