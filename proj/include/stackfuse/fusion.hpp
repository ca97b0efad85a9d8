#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "stackfuse/core.hpp"
#include "stackfuse/matrix.hpp"

namespace stackfuse {

enum class FusionStrategy { concat, average };

inline const char* to_string(FusionStrategy s) { return s == FusionStrategy::concat ? "concat" : "average"; }

/// Notation used in report rows: P^C for concatenation, P^A for averaging.
inline const char* fusion_symbol(FusionStrategy s) { return s == FusionStrategy::concat ? "P^C" : "P^A"; }

inline FusionStrategy parse_fusion(const std::string& text) {
  if (text == "concat") return FusionStrategy::concat;
  if (text == "average") return FusionStrategy::average;
  throw ValidationError(ErrorKind::invalid_argument, "unknown fusion strategy '" + text + "'");
}

/// Meta-classifier input: one numeric vector per example.
struct FusedFeatures {
  std::size_t feature_dim = 0;
  std::map<std::string, std::vector<double>> rows;
  FusionStrategy strategy = FusionStrategy::concat;
  std::vector<std::string> model_order;

  /// Stacks the rows for `ids` (in that order) into a matrix.
  Matrix matrix(const std::vector<std::string>& ids) const {
    Matrix out(ids.size(), feature_dim);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = rows.find(ids[i]);
      if (it == rows.end()) throw ValidationError(ErrorKind::id_mismatch, "no fused features for '" + ids[i] + "'");
      std::copy(it->second.begin(), it->second.end(), out.row(i).begin());
    }
    return out;
  }
};

namespace detail {

inline void check_compatible(const std::vector<ProbabilitySet>& sets) {
  if (sets.empty()) throw ValidationError(ErrorKind::empty_input, "fusion needs at least one probability set");
  const auto& first = sets.front();
  for (const auto& set : sets) {
    if (!(set.label_space() == first.label_space())) {
      throw ValidationError(ErrorKind::label_space_mismatch,
                            set.model_name() + " classes [" + join(set.label_space().names()) + "] differ from " +
                                first.model_name() + " classes [" + join(first.label_space().names()) + "]");
    }
    std::vector<std::string> missing;
    for (const auto& [id, _] : first.split_tags()) {
      if (!set.split_tags().contains(id)) missing.push_back(id);
    }
    for (const auto& [id, _] : set.split_tags()) {
      if (!first.split_tags().contains(id)) missing.push_back(id);
    }
    if (!missing.empty()) {
      std::sort(missing.begin(), missing.end());
      throw ValidationError(ErrorKind::id_mismatch, first.model_name() + " vs " + set.model_name() +
                                                        ": ids not in both: " + join(missing));
    }
    for (const auto& [id, split] : set.split_tags()) {
      if (first.split_tags().at(id) != split) {
        throw ValidationError(ErrorKind::id_mismatch, "example '" + id + "' has different splits across models");
      }
    }
  }
}

}  // namespace detail

/// P^C: each example's row is the concatenation of every model's k-vector,
/// models taken in `order`.
inline FusedFeatures fuse_concat(const std::vector<ProbabilitySet>& sets, const std::vector<std::string>& order) {
  detail::check_compatible(sets);
  if (order.size() != sets.size()) {
    throw ValidationError(ErrorKind::invalid_argument, "model order must list every probability set exactly once");
  }
  std::vector<const ProbabilitySet*> ordered;
  for (const auto& name : order) {
    auto it = std::find_if(sets.begin(), sets.end(), [&](const auto& s) { return s.model_name() == name; });
    if (it == sets.end()) throw ValidationError(ErrorKind::invalid_argument, "model order names unknown model '" + name + "'");
    if (std::find(ordered.begin(), ordered.end(), &*it) != ordered.end()) {
      throw ValidationError(ErrorKind::invalid_argument, "model '" + name + "' listed twice in model order");
    }
    ordered.push_back(&*it);
  }

  const std::size_t k = sets.front().label_space().size();
  FusedFeatures out;
  out.strategy = FusionStrategy::concat;
  out.feature_dim = k * sets.size();
  out.model_order = order;
  for (const auto& [id, _] : sets.front().rows()) {
    std::vector<double> row;
    row.reserve(out.feature_dim);
    for (const auto* set : ordered) {
      const auto& p = set->row(id);
      row.insert(row.end(), p.begin(), p.end());
    }
    out.rows.emplace(id, std::move(row));
  }
  return out;
}

/// P^A: elementwise mean over models. Mean of simplex points stays on the
/// simplex, so no renormalization happens here. Models are summed in name
/// order so the result is bit-identical under any input permutation.
inline FusedFeatures fuse_average(const std::vector<ProbabilitySet>& sets) {
  detail::check_compatible(sets);
  const std::size_t k = sets.front().label_space().size();
  std::vector<const ProbabilitySet*> sorted;
  for (const auto& set : sets) sorted.push_back(&set);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->model_name() < b->model_name(); });

  FusedFeatures out;
  out.strategy = FusionStrategy::average;
  out.feature_dim = k;
  for (const auto* set : sorted) out.model_order.push_back(set->model_name());
  const double inv_m = 1.0 / static_cast<double>(sets.size());
  for (const auto& [id, _] : sets.front().rows()) {
    std::vector<double> row(k, 0.0);
    for (const auto* set : sorted) {
      const auto& p = set->row(id);
      for (std::size_t c = 0; c < k; ++c) row[c] += p[c];
    }
    for (double& v : row) v *= inv_m;
    out.rows.emplace(id, std::move(row));
  }
  return out;
}

inline FusedFeatures fuse(FusionStrategy strategy, const std::vector<ProbabilitySet>& sets,
                          const std::vector<std::string>& order) {
  return strategy == FusionStrategy::concat ? fuse_concat(sets, order) : fuse_average(sets);
}

}  // namespace stackfuse
