#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "stackfuse/core.hpp"
#include "stackfuse/dataio.hpp"
#include "stackfuse/manifest.hpp"

namespace stackfuse {

/// Synthetic stand-in for a set of fine-tuned base models.
///
/// Each example gets a uniform true label and a shared "hard" flag with
/// probability `hard_fraction`. Model m is right with probability
/// accuracies[m] on easy examples and max(accuracies[m] - hard_penalty, 1/k)
/// on hard ones; otherwise it picks a uniformly random wrong class. The hard
/// flag is what correlates the models' mistakes.
struct SynthSpec {
  std::size_t n_classes = 2;
  std::size_t n_train = 1000;
  std::size_t n_test = 500;
  std::vector<double> accuracies;
  double hard_fraction = 0.0;
  double hard_penalty = 0.0;
  double confidence_lo = 0.55;
  double confidence_hi = 0.95;
  Seed seed{0};
  std::string task = "synthetic";
  std::vector<std::string> class_names;  // default: human/generated, A..F, or c0..c{k-1}
  std::vector<std::string> model_names;  // default: model_1..model_M

  std::size_t n_models() const noexcept { return accuracies.size(); }

  LabelSpace label_space() const {
    if (!class_names.empty()) return LabelSpace(class_names);
    if (n_classes == 2) return LabelSpace::binary();
    if (n_classes == 6) return LabelSpace::attribution();
    std::vector<std::string> names;
    for (std::size_t c = 0; c < n_classes; ++c) names.push_back("c" + std::to_string(c));
    return LabelSpace(names);
  }

  std::vector<std::string> resolved_model_names() const {
    if (!model_names.empty()) return model_names;
    std::vector<std::string> names;
    for (std::size_t m = 0; m < n_models(); ++m) names.push_back("model_" + std::to_string(m + 1));
    return names;
  }

  double chance() const { return 1.0 / static_cast<double>(n_classes); }

  /// Accuracy on hard examples, clamped at chance.
  double hard_accuracy(std::size_t m) const { return std::max(accuracies[m] - hard_penalty, chance()); }

  /// Expected accuracy of model m: (1 - rho) a_m + rho max(a_m - delta, 1/k).
  double effective_accuracy(std::size_t m) const {
    return (1.0 - hard_fraction) * accuracies[m] + hard_fraction * hard_accuracy(m);
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw ValidationError(ErrorKind::invalid_argument, "synth spec: " + what); };
    if (n_classes < 2) fail("need at least 2 classes");
    if (!class_names.empty() && class_names.size() != n_classes) fail("class_names length != n_classes");
    if (n_train == 0 || n_test == 0) fail("split sizes must be positive");
    if (accuracies.empty()) fail("need at least one base model");
    if (!model_names.empty() && model_names.size() != accuracies.size()) fail("model_names length != model count");
    for (double a : accuracies) {
      if (!(a >= chance() - 1e-12 && a <= 1.0)) fail("accuracies must lie in [1/k, 1]");
    }
    if (!(hard_fraction >= 0.0 && hard_fraction < 1.0)) fail("hard_fraction must lie in [0,1)");
    if (!(hard_penalty >= 0.0)) fail("hard_penalty must be nonnegative");
    if (!(confidence_lo > chance() && confidence_lo < confidence_hi && confidence_hi <= 1.0)) {
      fail("confidence range must satisfy 1/k < lo < hi <= 1");
    }
    label_space();
  }
};

struct SyntheticTask {
  std::vector<ProbabilitySet> sets;
  LabeledDataset labels;
  std::vector<bool> hard;                                    // by example index
  std::vector<std::vector<std::size_t>> designed_predictions;  // [model][example index]
  std::vector<std::string> ids;
};

inline std::string synthetic_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ex%06zu", index);
  return buf;
}

namespace detail {

/// Splits `mass` over `slots` classes by normalized uniform draws, redrawn
/// until every share stays below `cap`; falls back to an even split.
inline std::vector<double> random_partition(Rng& rng, std::size_t slots, double mass, double cap) {
  std::vector<double> shares(slots);
  for (int attempt = 0; attempt < 64; ++attempt) {
    double total = 0.0;
    for (auto& s : shares) {
      s = rng.uniform() + 1e-12;
      total += s;
    }
    double biggest = 0.0;
    for (auto& s : shares) {
      s = mass * s / total;
      biggest = std::max(biggest, s);
    }
    if (biggest < cap) return shares;
  }
  std::fill(shares.begin(), shares.end(), mass / static_cast<double>(slots));
  return shares;
}

}  // namespace detail

/// Generates M probability sets and the gold labels. Example i (train ids
/// first, then test) draws from its own stream derive_seed(seed, i), so the
/// output does not depend on generation order.
inline SyntheticTask generate_synthetic_task(const SynthSpec& spec) {
  spec.validate();
  const std::size_t k = spec.n_classes;
  const std::size_t n = spec.n_train + spec.n_test;
  const std::size_t n_models = spec.n_models();
  const auto space = spec.label_space();
  const auto names = spec.resolved_model_names();

  SyntheticTask task;
  task.hard.resize(n);
  task.designed_predictions.assign(n_models, std::vector<std::size_t>(n));
  std::vector<ProbabilitySet::Rows> rows(n_models);
  ProbabilitySet::SplitTags splits;
  std::map<std::string, std::size_t> labels;

  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(spec.seed, i));
    const auto id = synthetic_id(i);
    task.ids.push_back(id);
    const Split split = i < spec.n_train ? Split::train : Split::test;
    splits.emplace(id, split);

    const auto truth = static_cast<std::size_t>(rng.below(k));
    labels.emplace(id, truth);
    const bool hard = rng.bernoulli(spec.hard_fraction);
    task.hard[i] = hard;

    for (std::size_t m = 0; m < n_models; ++m) {
      const double accuracy = hard ? spec.hard_accuracy(m) : spec.accuracies[m];
      std::size_t predicted = truth;
      if (!rng.bernoulli(accuracy)) predicted = (truth + 1 + static_cast<std::size_t>(rng.below(k - 1))) % k;
      task.designed_predictions[m][i] = predicted;

      const double confidence = rng.uniform(spec.confidence_lo, spec.confidence_hi);
      const auto shares = detail::random_partition(rng, k - 1, 1.0 - confidence, confidence);
      std::vector<double> probs(k);
      for (std::size_t c = 0, s = 0; c < k; ++c) probs[c] = c == predicted ? confidence : shares[s++];
      double total = 0.0;
      for (double p : probs) total += p;
      for (double& p : probs) p /= total;
      rows[m].emplace(id, std::move(probs));
    }
  }

  for (std::size_t m = 0; m < n_models; ++m) task.sets.emplace_back(names[m], space, std::move(rows[m]), splits);
  task.labels = LabeledDataset(space, std::move(labels), std::move(splits));
  return task;
}

/// Meta-classifier grid used by generated manifests: {concat, average} x
/// {voting, one-vs-rest, ECOC, linear SVC}.
inline std::vector<MetaConfig> default_meta_grid() {
  return {MetaConfig{MetaKind::voting, BaseKind::logreg, std::nullopt},
          MetaConfig{MetaKind::one_vs_rest, BaseKind::logreg, std::nullopt},
          MetaConfig{MetaKind::ecoc, BaseKind::logreg, std::nullopt},
          MetaConfig{MetaKind::linear_svc, BaseKind::logreg, std::nullopt}};
}

/// Writes one JSONL file per model, labels.jsonl and a ready-to-run manifest.json.
inline ExperimentManifest write_synthetic_task(const SyntheticTask& task, const SynthSpec& spec,
                                               const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ExperimentManifest manifest;
  manifest.task = spec.task;
  manifest.label_space = spec.label_space();
  manifest.seed = spec.seed;
  manifest.train.seed = spec.seed;
  manifest.metas = default_meta_grid();
  manifest.labels_file = "labels.jsonl";
  manifest.base_dir = dir;
  for (const auto& set : task.sets) {
    manifest.model_order.push_back(set.model_name());
    const std::filesystem::path file = set.model_name() + ".jsonl";
    manifest.probability_files[set.model_name()] = file;
    save_probability_file(dir / file, set);
  }
  save_labels_file(dir / "labels.jsonl", task.labels);
  save_manifest(manifest, dir / "manifest.json");
  return manifest;
}

inline Json synth_spec_json(const SynthSpec& s) {
  Json j{{"n_classes", s.n_classes},     {"n_train", s.n_train},           {"n_test", s.n_test},
         {"accuracies", s.accuracies},   {"hard_fraction", s.hard_fraction}, {"hard_penalty", s.hard_penalty},
         {"confidence_lo", s.confidence_lo}, {"confidence_hi", s.confidence_hi}, {"seed", s.seed.value},
         {"task", s.task}};
  if (!s.class_names.empty()) j["class_names"] = s.class_names;
  if (!s.model_names.empty()) j["model_names"] = s.model_names;
  return j;
}

inline SynthSpec synth_spec_from_json(const Json& j) {
  try {
    SynthSpec s;
    s.n_classes = j.at("n_classes").get<std::size_t>();
    s.n_train = j.at("n_train").get<std::size_t>();
    s.n_test = j.at("n_test").get<std::size_t>();
    s.accuracies = j.at("accuracies").get<std::vector<double>>();
    s.hard_fraction = j.value("hard_fraction", 0.0);
    s.hard_penalty = j.value("hard_penalty", 0.0);
    s.confidence_lo = j.value("confidence_lo", s.confidence_lo);
    s.confidence_hi = j.value("confidence_hi", s.confidence_hi);
    s.seed = Seed{j.value("seed", std::uint64_t{0})};
    s.task = j.value("task", s.task);
    if (j.contains("class_names")) s.class_names = j.at("class_names").get<std::vector<std::string>>();
    if (j.contains("model_names")) s.model_names = j.at("model_names").get<std::vector<std::string>>();
    s.validate();
    return s;
  } catch (const Json::exception& e) {
    throw ValidationError(ErrorKind::schema, std::string("synth spec: ") + e.what());
  }
}

inline SynthSpec load_synth_spec(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  try {
    return synth_spec_from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw ValidationError(ErrorKind::schema, path.string() + ": " + e.what());
  }
}

/// Five binary detectors with accuracies in the 0.61-0.67 band.
inline SynthSpec binary_detection_spec(Seed seed, std::size_t n_train = 4000, std::size_t n_test = 2000) {
  SynthSpec s;
  s.task = "binary-synthetic";
  s.n_classes = 2;
  s.n_train = n_train;
  s.n_test = n_test;
  s.accuracies = {0.61, 0.64, 0.67, 0.61, 0.62};
  s.hard_fraction = 0.3;
  s.hard_penalty = 0.15;
  s.confidence_lo = 0.55;
  s.confidence_hi = 0.95;
  s.seed = seed;
  return s;
}

/// Five six-way attribution models with accuracies around 0.56-0.60.
inline SynthSpec attribution_spec(Seed seed, std::size_t n_train = 4000, std::size_t n_test = 2000) {
  SynthSpec s;
  s.task = "attribution-synthetic";
  s.n_classes = 6;
  s.n_train = n_train;
  s.n_test = n_test;
  s.accuracies = {0.60, 0.58, 0.56, 0.58, 0.59};
  s.hard_fraction = 0.3;
  s.hard_penalty = 0.15;
  s.confidence_lo = 0.3;
  s.confidence_hi = 0.9;
  s.seed = seed;
  return s;
}

}  // namespace stackfuse
