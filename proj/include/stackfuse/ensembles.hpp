#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "stackfuse/learners.hpp"

namespace stackfuse {

/// Learner used for each binary subproblem of OvR and ECOC.
enum class BaseKind { logreg, linear_svm };

inline const char* to_string(BaseKind kind) { return kind == BaseKind::logreg ? "logreg" : "linear_svm"; }

inline BaseKind parse_base_kind(const std::string& text) {
  if (text == "logreg") return BaseKind::logreg;
  if (text == "linear_svm") return BaseKind::linear_svm;
  throw ValidationError(ErrorKind::invalid_argument, "unknown base learner '" + text + "'");
}

/// A trained two-class model; positive class is label 1.
using BinaryModel = std::variant<LinearModel, LinearSvmModel>;

inline BinaryModel train_binary(const TrainingSet& binary, const TrainConfig& cfg, BaseKind kind) {
  if (kind == BaseKind::logreg) return train_logreg(binary, cfg);
  return train_linear_svm(binary, cfg);
}

inline std::vector<double> binary_margins(const BinaryModel& model, const Matrix& x) {
  if (const auto* lr = std::get_if<LinearModel>(&model)) return binary_margins(*lr, x);
  const Matrix m = decision_function(std::get<LinearSvmModel>(model), x);
  return std::vector<double>(m.data().begin(), m.data().end());
}

/// P(positive) for each row.
inline std::vector<double> positive_probability(const BinaryModel& model, const Matrix& x) {
  const Matrix p = std::visit([&](const auto& m) { return predict_proba(m, x); }, model);
  std::vector<double> out(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) out[r] = p(r, 1);
  return out;
}

// ---------------------------------------------------------------------------
// Soft voting

struct VotingModel {
  LinearModel logreg;
  ForestModel forest;
  GaussianNBModel naive_bayes;
  LinearSvmModel svm;
  std::size_t n_classes = 0;
};

/// Elementwise mean of equally shaped probability matrices.
inline Matrix soft_vote(const std::vector<Matrix>& distributions) {
  if (distributions.empty()) throw ValidationError(ErrorKind::empty_input, "nothing to vote over");
  Matrix out(distributions.front().rows(), distributions.front().cols());
  for (const auto& d : distributions) {
    if (d.rows() != out.rows() || d.cols() != out.cols()) {
      throw ValidationError(ErrorKind::dimension_mismatch, "voting members disagree on shape");
    }
    for (std::size_t i = 0; i < d.data().size(); ++i) out.data()[i] += d.data()[i];
  }
  const double inv = 1.0 / static_cast<double>(distributions.size());
  for (double& v : out.data()) v *= inv;
  return out;
}

inline VotingModel train_voting(const TrainingSet& data, const TrainConfig& cfg) {
  VotingModel model;
  model.n_classes = data.n_classes;
  model.logreg = train_logreg(data, cfg);
  model.forest = train_random_forest(data, cfg);
  model.naive_bayes = train_gaussian_nb(data, cfg);
  model.svm = train_linear_svm(data, cfg);
  return model;
}

inline Matrix predict_proba(const VotingModel& model, const Matrix& x) {
  return soft_vote({predict_proba(model.logreg, x), predict_proba(model.forest, x),
                    predict_proba(model.naive_bayes, x), predict_proba(model.svm, x)});
}

inline std::vector<std::size_t> predict(const VotingModel& model, const Matrix& x) {
  return argmax_rows(predict_proba(model, x));
}

// ---------------------------------------------------------------------------
// One-vs-rest

struct OvRModel {
  BaseKind base_kind = BaseKind::logreg;
  std::vector<BinaryModel> members;  // member c separates class c from the rest

  std::size_t n_classes() const noexcept { return members.size(); }
};

/// Subproblem c uses derive_seed(cfg.seed, c), the same stream ECOC column c
/// gets, so identity-coded ECOC reproduces OvR exactly.
inline OvRModel train_ovr(const TrainingSet& data, const TrainConfig& cfg, BaseKind base_kind) {
  detail::require_trainable(data, "one-vs-rest");
  const auto counts = class_counts(data);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw ValidationError(ErrorKind::empty_class, "one-vs-rest: class " + std::to_string(c) + " absent from training data");
    }
  }
  OvRModel model;
  model.base_kind = base_kind;
  for (std::size_t c = 0; c < data.n_classes; ++c) {
    TrainConfig sub = cfg;
    sub.seed = derive_seed(cfg.seed, c);
    model.members.push_back(train_binary(relabel_binary(data, [c](std::size_t y) { return y == c; }), sub, base_kind));
  }
  return model;
}

/// Per-class positive decision values, one column per class.
inline Matrix ovr_scores(const OvRModel& model, const Matrix& x) {
  Matrix out(x.rows(), model.n_classes());
  for (std::size_t c = 0; c < model.n_classes(); ++c) {
    const auto m = binary_margins(model.members[c], x);
    for (std::size_t r = 0; r < x.rows(); ++r) out(r, c) = m[r];
  }
  return out;
}

/// Argmax of per-class margins. Both base learners map margins to
/// probabilities monotonically, so this is the argmax of the calibrated
/// positive-class probabilities without their saturation ties.
inline std::vector<std::size_t> predict(const OvRModel& model, const Matrix& x) {
  return argmax_rows(ovr_scores(model, x));
}

/// Positive-class probabilities normalized across classes.
inline Matrix predict_proba(const OvRModel& model, const Matrix& x) {
  Matrix out(x.rows(), model.n_classes());
  for (std::size_t c = 0; c < model.n_classes(); ++c) {
    const auto p = positive_probability(model.members[c], x);
    for (std::size_t r = 0; r < x.rows(); ++r) out(r, c) = p[r];
  }
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    double total = 0.0;
    for (double v : row) total += v;
    for (double& v : row) v = total > 0.0 ? v / total : 1.0 / static_cast<double>(row.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Error-correcting output codes

/// k' x L matrix over {-1, +1}; row r is the codeword of class r.
struct CodeMatrix {
  std::size_t n_classes = 0;
  std::size_t length = 0;
  std::vector<std::int8_t> entries;

  int operator()(std::size_t cls, std::size_t column) const { return entries[cls * length + column]; }

  friend bool operator==(const CodeMatrix&, const CodeMatrix&) = default;
};

inline std::size_t default_code_length(std::size_t n_classes) {
  return static_cast<std::size_t>(std::ceil(1.5 * static_cast<double>(n_classes)));
}

/// Rows pairwise distinct and no column constant.
inline void validate_code_matrix(const CodeMatrix& code) {
  if (code.n_classes < 2 || code.length < 1 || code.entries.size() != code.n_classes * code.length) {
    throw ValidationError(ErrorKind::schema, "code matrix has inconsistent shape");
  }
  for (auto e : code.entries) {
    if (e != 1 && e != -1) throw ValidationError(ErrorKind::schema, "code matrix entries must be +1 or -1");
  }
  std::set<std::vector<std::int8_t>> rows;
  for (std::size_t r = 0; r < code.n_classes; ++r) {
    auto begin = code.entries.begin() + static_cast<std::ptrdiff_t>(r * code.length);
    if (!rows.emplace(begin, begin + static_cast<std::ptrdiff_t>(code.length)).second) {
      throw ValidationError(ErrorKind::schema, "code matrix has duplicate codewords");
    }
  }
  for (std::size_t l = 0; l < code.length; ++l) {
    bool has_pos = false, has_neg = false;
    for (std::size_t r = 0; r < code.n_classes; ++r) (code(r, l) > 0 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) throw ValidationError(ErrorKind::schema, "code matrix column " + std::to_string(l) + " is constant");
  }
}

namespace detail {

inline bool code_matrix_ok(const CodeMatrix& code) {
  try {
    validate_code_matrix(code);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

}  // namespace detail

/// Uniform random {-1,+1} entries from `seed`, redrawn until the matrix has
/// distinct rows and non-constant columns.
inline CodeMatrix generate_code_matrix(std::size_t n_classes, std::size_t length, Seed seed) {
  if (n_classes < 2) throw ValidationError(ErrorKind::invalid_argument, "ECOC needs at least 2 classes");
  if (length < default_code_length(n_classes)) {
    throw ValidationError(ErrorKind::invalid_argument, "code length " + std::to_string(length) +
                                                           " below ceil(1.5 * classes) = " +
                                                           std::to_string(default_code_length(n_classes)));
  }
  constexpr int kRetryBudget = 1000;
  Rng rng(seed);
  CodeMatrix code{n_classes, length, std::vector<std::int8_t>(n_classes * length)};
  for (int attempt = 0; attempt < kRetryBudget; ++attempt) {
    for (auto& e : code.entries) e = (rng.next_u64() >> 63) ? 1 : -1;
    if (detail::code_matrix_ok(code)) return code;
  }
  throw ValidationError(ErrorKind::retry_exhausted, "no valid code matrix after 1000 draws");
}

/// Column c = +1 for class c, -1 elsewhere. Decoding it matches one-vs-rest.
inline CodeMatrix identity_code_matrix(std::size_t n_classes) {
  CodeMatrix code{n_classes, n_classes, std::vector<std::int8_t>(n_classes * n_classes, -1)};
  for (std::size_t c = 0; c < n_classes; ++c) code.entries[c * n_classes + c] = 1;
  return code;
}

struct ECOCModel {
  BaseKind base_kind = BaseKind::logreg;
  CodeMatrix code;
  std::vector<BinaryModel> columns;  // column l's positive class = classes coded +1
};

/// One binary model per code column; column l uses derive_seed(cfg.seed, l).
inline ECOCModel train_ecoc(const TrainingSet& data, const TrainConfig& cfg, BaseKind base_kind, CodeMatrix code) {
  detail::require_trainable(data, "ECOC");
  validate_code_matrix(code);
  if (code.n_classes != data.n_classes) {
    throw ValidationError(ErrorKind::dimension_mismatch, "code matrix rows must equal the class count");
  }
  ECOCModel model;
  model.base_kind = base_kind;
  for (std::size_t l = 0; l < code.length; ++l) {
    TrainConfig sub = cfg;
    sub.seed = derive_seed(cfg.seed, l);
    auto binary = relabel_binary(data, [&code, l](std::size_t y) { return code(y, l) > 0; });
    model.columns.push_back(train_binary(binary, sub, base_kind));
  }
  model.code = std::move(code);
  return model;
}

/// Default: random code of length ceil(1.5 k'), drawn from a stream derived
/// from the config seed and kept apart from the column streams.
inline ECOCModel train_ecoc(const TrainingSet& data, const TrainConfig& cfg, BaseKind base_kind) {
  auto code = generate_code_matrix(data.n_classes, default_code_length(data.n_classes),
                                   derive_seed(cfg.seed, 0xec0c0de5ULL));
  return train_ecoc(data, cfg, base_kind, std::move(code));
}

/// Hinge loss of each codeword against real-valued column margins:
/// loss[r] = sum_l max(0, 1 - code[r,l] * margin_l).
inline std::vector<double> codeword_losses(const CodeMatrix& code, std::span<const double> margins) {
  if (margins.size() != code.length) {
    throw ValidationError(ErrorKind::dimension_mismatch, "expected " + std::to_string(code.length) + " margins");
  }
  std::vector<double> losses(code.n_classes, 0.0);
  for (std::size_t r = 0; r < code.n_classes; ++r) {
    for (std::size_t l = 0; l < code.length; ++l) losses[r] += std::max(0.0, 1.0 - code(r, l) * margins[l]);
  }
  return losses;
}

/// Lowest-loss codeword, lowest class index on ties.
inline std::size_t decode_margins(const CodeMatrix& code, std::span<const double> margins) {
  const auto losses = codeword_losses(code, margins);
  std::size_t best = 0;
  for (std::size_t r = 1; r < losses.size(); ++r) {
    if (losses[r] < losses[best]) best = r;
  }
  return best;
}

inline Matrix ecoc_margins(const ECOCModel& model, const Matrix& x) {
  Matrix out(x.rows(), model.code.length);
  for (std::size_t l = 0; l < model.code.length; ++l) {
    const auto m = binary_margins(model.columns[l], x);
    for (std::size_t r = 0; r < x.rows(); ++r) out(r, l) = m[r];
  }
  return out;
}

inline std::vector<std::size_t> decode_ecoc(const ECOCModel& model, const Matrix& x) {
  const Matrix margins = ecoc_margins(model, x);
  std::vector<std::size_t> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = decode_margins(model.code, margins.row(r));
  return out;
}

inline std::vector<std::size_t> predict(const ECOCModel& model, const Matrix& x) { return decode_ecoc(model, x); }

/// Class scores as softmax(-loss). Only used for reporting probabilities;
/// predictions come from decode_ecoc.
inline Matrix predict_proba(const ECOCModel& model, const Matrix& x) {
  const Matrix margins = ecoc_margins(model, x);
  Matrix out(x.rows(), model.code.n_classes);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto losses = codeword_losses(model.code, margins.row(r));
    auto dst = out.row(r);
    for (std::size_t c = 0; c < losses.size(); ++c) dst[c] = -losses[c];
    detail::softmax_inplace(dst);
  }
  return out;
}

}  // namespace stackfuse
