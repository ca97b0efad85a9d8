#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "stackfuse/error.hpp"
#include "stackfuse/random.hpp"

namespace stackfuse {

/// Rows whose sums deviate from 1 by at most this much are renormalized;
/// anything larger is rejected.
inline constexpr double kRowSumTolerance = 1e-6;

enum class Split { train, val, test };

inline const char* to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw ValidationError(ErrorKind::invalid_argument, "unknown split '" + text + "'");
}

/// Ordered, immutable list of class names. The position of a name is its
/// integer code; order comes from the manifest, never from sorting.
class LabelSpace {
 public:
  LabelSpace() = default;

  explicit LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2) {
      throw ValidationError(ErrorKind::invalid_argument, "a label space needs at least 2 classes");
    }
    std::unordered_set<std::string> seen;
    for (const auto& name : names_) {
      if (name.empty()) throw ValidationError(ErrorKind::invalid_argument, "empty class name");
      if (!seen.insert(name).second) {
        throw ValidationError(ErrorKind::invalid_argument, "duplicate class name '" + name + "'");
      }
    }
  }

  /// "human", "generated": human-vs-machine detection.
  static LabelSpace binary() { return LabelSpace({"human", "generated"}); }

  /// "A".."F": six-way generator attribution.
  static LabelSpace attribution() { return LabelSpace({"A", "B", "C", "D", "E", "F"}); }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t index) const { return names_.at(index); }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) return i;
    }
    return std::nullopt;
  }

  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;

 private:
  std::vector<std::string> names_;
};

inline std::string join(const std::vector<std::string>& items, const std::string& sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

/// Validates one probability row in place. Small sum deviations are
/// renormalized away; `where` prefixes any error message.
inline void validate_probability_row(std::vector<double>& row, std::size_t k, const std::string& where) {
  if (row.size() != k) {
    throw ValidationError(ErrorKind::dimension_mismatch,
                          where + ": expected " + std::to_string(k) + " probabilities, got " +
                              std::to_string(row.size()));
  }
  double sum = 0.0;
  for (double p : row) {
    if (!std::isfinite(p)) throw ValidationError(ErrorKind::non_finite, where + ": non-finite probability");
    if (p < 0.0 || p > 1.0) {
      throw ValidationError(ErrorKind::value_range, where + ": probability " + std::to_string(p) + " outside [0,1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowSumTolerance) {
    throw ValidationError(ErrorKind::row_sum, where + ": probabilities sum to " + std::to_string(sum));
  }
  if (sum != 1.0) {
    for (double& p : row) p /= sum;
  }
}

/// One base model's class probabilities for every example, with split tags.
class ProbabilitySet {
 public:
  using Rows = std::map<std::string, std::vector<double>>;
  using SplitTags = std::map<std::string, Split>;

  ProbabilitySet() = default;

  ProbabilitySet(std::string model_name, LabelSpace label_space, Rows rows, SplitTags split_tags)
      : model_name_(std::move(model_name)),
        label_space_(std::move(label_space)),
        rows_(std::move(rows)),
        split_tags_(std::move(split_tags)) {
    if (model_name_.empty()) throw ValidationError(ErrorKind::invalid_argument, "empty model name");
    for (auto& [id, row] : rows_) {
      validate_probability_row(row, label_space_.size(), model_name_ + " row '" + id + "'");
      if (!split_tags_.contains(id)) {
        throw ValidationError(ErrorKind::id_mismatch, model_name_ + ": row '" + id + "' has no split tag");
      }
    }
    if (split_tags_.size() != rows_.size()) {
      throw ValidationError(ErrorKind::id_mismatch, model_name_ + ": split tags reference ids without rows");
    }
  }

  const std::string& model_name() const noexcept { return model_name_; }
  const LabelSpace& label_space() const noexcept { return label_space_; }
  const Rows& rows() const noexcept { return rows_; }
  const SplitTags& split_tags() const noexcept { return split_tags_; }
  std::size_t size() const noexcept { return rows_.size(); }

  const std::vector<double>& row(const std::string& id) const {
    auto it = rows_.find(id);
    if (it == rows_.end()) {
      throw ValidationError(ErrorKind::id_mismatch, model_name_ + ": no probabilities for '" + id + "'");
    }
    return it->second;
  }

  Split split_of(const std::string& id) const { return split_tags_.at(id); }

 private:
  std::string model_name_;
  LabelSpace label_space_;
  Rows rows_;
  SplitTags split_tags_;
};

/// Gold labels and split membership. Test ids may be unlabeled.
class LabeledDataset {
 public:
  LabeledDataset() = default;

  LabeledDataset(LabelSpace label_space, std::map<std::string, std::size_t> labels,
                 std::map<std::string, Split> splits)
      : label_space_(std::move(label_space)), labels_(std::move(labels)), splits_(std::move(splits)) {
    for (const auto& [id, label] : labels_) {
      if (label >= label_space_.size()) {
        throw ValidationError(ErrorKind::value_range, "label index out of range for '" + id + "'");
      }
      if (!splits_.contains(id)) {
        throw ValidationError(ErrorKind::id_mismatch, "labeled id '" + id + "' has no split");
      }
    }
    for (const auto& [id, split] : splits_) {
      if (split != Split::test && !labels_.contains(id)) {
        throw ValidationError(ErrorKind::invalid_argument,
                              "id '" + id + "' in split " + to_string(split) + " has no label");
      }
    }
  }

  const LabelSpace& label_space() const noexcept { return label_space_; }
  const std::map<std::string, std::size_t>& labels() const noexcept { return labels_; }
  const std::map<std::string, Split>& splits() const noexcept { return splits_; }

  std::vector<std::string> ids_in(Split split) const {
    std::vector<std::string> out;
    for (const auto& [id, s] : splits_) {
      if (s == split) out.push_back(id);
    }
    return out;
  }

  bool is_labeled(const std::string& id) const { return labels_.contains(id); }

  std::size_t label_of(const std::string& id) const {
    auto it = labels_.find(id);
    if (it == labels_.end()) throw ValidationError(ErrorKind::invalid_argument, "id '" + id + "' is unlabeled");
    return it->second;
  }

  /// Returns a copy with the given ids moved to `split`.
  LabeledDataset with_split(const std::vector<std::string>& ids, Split split) const {
    auto splits = splits_;
    for (const auto& id : ids) splits.at(id) = split;
    return LabeledDataset(label_space_, labels_, std::move(splits));
  }

 private:
  LabelSpace label_space_;
  std::map<std::string, std::size_t> labels_;
  std::map<std::string, Split> splits_;
};

struct RawLabel {
  std::string id;
  std::string class_name;
  Split split = Split::train;
};

/// Maps class names to integer codes.
inline LabeledDataset encode_labels(const std::vector<RawLabel>& raw, const LabelSpace& space) {
  std::map<std::string, std::size_t> labels;
  std::map<std::string, Split> splits;
  for (const auto& item : raw) {
    auto index = space.index_of(item.class_name);
    if (!index) {
      throw ValidationError(ErrorKind::unknown_class,
                            "example '" + item.id + "' has class '" + item.class_name + "'");
    }
    if (!labels.emplace(item.id, *index).second) {
      throw ValidationError(ErrorKind::duplicate_id, "example '" + item.id + "' appears twice");
    }
    splits.emplace(item.id, item.split);
  }
  return LabeledDataset(space, std::move(labels), std::move(splits));
}

inline std::vector<RawLabel> decode_labels(const LabeledDataset& data) {
  std::vector<RawLabel> out;
  for (const auto& [id, label] : data.labels()) {
    out.push_back({id, data.label_space().name(label), data.splits().at(id)});
  }
  return out;
}

/// Lowest index wins on ties.
inline std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace stackfuse
