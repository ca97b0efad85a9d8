#pragma once

#include <optional>
#include <string>
#include <variant>

#include "stackfuse/ensembles.hpp"
#include "stackfuse/fusion.hpp"

namespace stackfuse {

enum class MetaKind { logreg, random_forest, gaussian_nb, linear_svc, voting, one_vs_rest, ecoc };

inline const char* to_string(MetaKind kind) {
  switch (kind) {
    case MetaKind::logreg: return "logreg";
    case MetaKind::random_forest: return "random_forest";
    case MetaKind::gaussian_nb: return "gaussian_nb";
    case MetaKind::linear_svc: return "linear_svc";
    case MetaKind::voting: return "voting";
    case MetaKind::one_vs_rest: return "one_vs_rest";
    case MetaKind::ecoc: return "ecoc";
  }
  return "?";
}

/// Table wording: "Ensemble with <display name> classifier".
inline const char* display_name(MetaKind kind) {
  switch (kind) {
    case MetaKind::logreg: return "Logistic Regression";
    case MetaKind::random_forest: return "Random Forest";
    case MetaKind::gaussian_nb: return "Gaussian NB";
    case MetaKind::linear_svc: return "Linear SVC";
    case MetaKind::voting: return "Voting";
    case MetaKind::one_vs_rest: return "OneVsRest";
    case MetaKind::ecoc: return "ECOC";
  }
  return "?";
}

inline MetaKind parse_meta_kind(const std::string& text) {
  for (auto kind : {MetaKind::logreg, MetaKind::random_forest, MetaKind::gaussian_nb, MetaKind::linear_svc,
                    MetaKind::voting, MetaKind::one_vs_rest, MetaKind::ecoc}) {
    if (text == to_string(kind)) return kind;
  }
  if (text == "ovr") return MetaKind::one_vs_rest;
  if (text == "svm") return MetaKind::linear_svc;
  throw ValidationError(ErrorKind::invalid_argument, "unknown meta-classifier '" + text + "'");
}

/// Which meta-classifier to train. `base` applies to one_vs_rest and ecoc.
struct MetaConfig {
  MetaKind kind = MetaKind::voting;
  BaseKind base = BaseKind::logreg;
  std::optional<std::size_t> code_length;  // ecoc only; default ceil(1.5 k')

  /// Short identifier, e.g. "voting" or "ecoc(logreg)".
  std::string name() const {
    std::string out = to_string(kind);
    if (kind == MetaKind::one_vs_rest || kind == MetaKind::ecoc) {
      out += "(";
      out += to_string(base);
      if (code_length) out += ",L=" + std::to_string(*code_length);
      out += ")";
    }
    return out;
  }
};

using MetaModelVariant =
    std::variant<LinearModel, ForestModel, GaussianNBModel, LinearSvmModel, VotingModel, OvRModel, ECOCModel>;

/// A trained meta-classifier together with the fusion it consumes.
struct MetaModel {
  MetaConfig config;
  FusionStrategy fusion = FusionStrategy::concat;
  Seed seed{0};
  std::size_t n_classes = 0;
  std::size_t feature_dim = 0;
  MetaModelVariant model;
};

inline MetaModel train_meta(const TrainingSet& data, const MetaConfig& meta, FusionStrategy fusion,
                            const TrainConfig& cfg) {
  MetaModel out{meta, fusion, cfg.seed, data.n_classes, data.dim(), LinearModel{}};
  switch (meta.kind) {
    case MetaKind::logreg: out.model = train_logreg(data, cfg); break;
    case MetaKind::random_forest: out.model = train_random_forest(data, cfg); break;
    case MetaKind::gaussian_nb: out.model = train_gaussian_nb(data, cfg); break;
    case MetaKind::linear_svc: out.model = train_linear_svm(data, cfg); break;
    case MetaKind::voting: out.model = train_voting(data, cfg); break;
    case MetaKind::one_vs_rest: out.model = train_ovr(data, cfg, meta.base); break;
    case MetaKind::ecoc:
      if (meta.code_length) {
        out.model = train_ecoc(data, cfg, meta.base,
                               generate_code_matrix(data.n_classes, *meta.code_length,
                                                    derive_seed(cfg.seed, 0xec0c0de5ULL)));
      } else {
        out.model = train_ecoc(data, cfg, meta.base);
      }
      break;
  }
  return out;
}

inline std::vector<std::size_t> predict(const MetaModel& model, const Matrix& x) {
  detail::require_dim(model.feature_dim, x);
  return std::visit([&](const auto& m) { return predict(m, x); }, model.model);
}

inline Matrix predict_proba(const MetaModel& model, const Matrix& x) {
  detail::require_dim(model.feature_dim, x);
  return std::visit([&](const auto& m) { return predict_proba(m, x); }, model.model);
}

}  // namespace stackfuse
