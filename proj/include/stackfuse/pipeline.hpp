#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stackfuse/dataio.hpp"
#include "stackfuse/fusion.hpp"
#include "stackfuse/manifest.hpp"
#include "stackfuse/meta_model.hpp"
#include "stackfuse/metrics.hpp"

namespace stackfuse {

// ---------------------------------------------------------------------------
// Train/validation carve-out

struct TrainValSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
};

/// Stratified holdout over the labeled train split. Each class contributes
/// round(fraction * count) validation ids, at least one, and keeps at least
/// one for training. Ids are shuffled per class from `seed`.
inline TrainValSplit split_train_val(const LabeledDataset& data, double fraction, Seed seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ValidationError(ErrorKind::invalid_argument, "validation fraction must lie in (0,1)");
  }
  const std::size_t k = data.label_space().size();
  std::vector<std::vector<std::string>> by_class(k);
  for (const auto& id : data.ids_in(Split::train)) by_class[data.label_of(id)].push_back(id);

  TrainValSplit out;
  for (std::size_t c = 0; c < k; ++c) {
    auto& ids = by_class[c];
    if (ids.empty()) continue;
    if (ids.size() < 2) {
      throw ValidationError(ErrorKind::empty_class, "class '" + data.label_space().name(c) +
                                                        "' has fewer than 2 training examples; cannot stratify");
    }
    Rng rng(derive_seed(seed, c));
    rng.shuffle(ids);
    auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ids.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, ids.size() - 1);
    out.val.insert(out.val.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    out.train.insert(out.train.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  if (out.train.empty()) throw ValidationError(ErrorKind::empty_input, "no labeled training examples");
  return out;
}

// ---------------------------------------------------------------------------
// Phase-gated label access

enum class Phase { split, selection, refit, final_evaluation };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::split: return "split";
    case Phase::selection: return "selection";
    case Phase::refit: return "refit";
    case Phase::final_evaluation: return "final_evaluation";
  }
  return "?";
}

struct LabelAccess {
  Phase phase;
  Split split;
  std::vector<std::string> ids;
};

/// Raised when code asks for labels its phase is not entitled to.
class LeakageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Sole holder of gold labels during an experiment. Every read names the
/// phase it happens in and is logged; reads that would leak are refused:
///   train labels: split, selection, refit
///   val labels:   selection (scoring), refit (merge)
///   test labels:  final_evaluation only
class LabelVault {
 public:
  explicit LabelVault(LabeledDataset data) : data_(std::move(data)) {}

  const LabelSpace& label_space() const noexcept { return data_.label_space(); }

  std::vector<std::string> ids_in(Split split) const { return data_.ids_in(split); }

  bool test_fully_labeled() const {
    for (const auto& id : data_.ids_in(Split::test)) {
      if (!data_.is_labeled(id)) return false;
    }
    return true;
  }

  std::vector<std::size_t> labels(Phase phase, Split split, const std::vector<std::string>& ids) {
    if (!allowed(phase, split)) {
      throw LeakageError(std::string("phase ") + to_string(phase) + " may not read " + to_string(split) + " labels");
    }
    std::vector<std::size_t> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
      if (data_.splits().at(id) != split) {
        throw LeakageError("id '" + id + "' is not in the " + std::string(to_string(split)) + " split");
      }
      out.push_back(data_.label_of(id));
    }
    log_.push_back({phase, split, ids});
    return out;
  }

  /// Carves the validation set out of the train split (reads train labels).
  TrainValSplit carve_validation(double fraction, Seed seed) {
    auto pool = data_.ids_in(Split::train);
    labels(Phase::split, Split::train, pool);
    auto split = split_train_val(data_, fraction, seed);
    data_ = data_.with_split(split.val, Split::val);
    return split;
  }

  const std::vector<LabelAccess>& log() const noexcept { return log_; }

 private:
  static bool allowed(Phase phase, Split split) {
    switch (split) {
      case Split::train: return phase != Phase::final_evaluation;
      case Split::val: return phase == Phase::selection || phase == Phase::refit;
      case Split::test: return phase == Phase::final_evaluation;
    }
    return false;
  }

  LabeledDataset data_;
  std::vector<LabelAccess> log_;
};

// ---------------------------------------------------------------------------
// Experiment

struct ConfigResult {
  FusionStrategy fusion = FusionStrategy::concat;
  MetaConfig meta;
  std::optional<EvalReport> val;  // empty when training failed
  std::string error;
};

struct RunResult {
  std::string task;
  Seed seed{0};
  std::uint64_t manifest_hash = 0;
  LabelSpace label_space;
  std::vector<ConfigResult> configs;
  std::size_t chosen = 0;
  MetaModel final_model;
  std::vector<std::string> refit_ids;  // train ∪ val, as used for the final fit
  std::optional<EvalReport> test;      // empty in prediction-only runs
  std::vector<EvalReport> base_models;
  std::map<std::string, std::size_t> test_predictions;
  std::vector<LabelAccess> label_log;

  const ConfigResult& chosen_config() const { return configs.at(chosen); }
};

/// Probability sets plus labels, loaded once and cross-checked.
struct LoadedInputs {
  std::vector<ProbabilitySet> sets;  // in manifest model order
  LabeledDataset labels;
};

/// Loads every file and verifies, before any training, that each model
/// covers exactly the labeled ids with matching splits.
inline LoadedInputs load_inputs(const ExperimentManifest& manifest) {
  manifest.validate();
  LoadedInputs in;
  in.labels = load_labels_file(manifest.resolve(manifest.labels_file), manifest.label_space);
  for (const auto& name : manifest.model_order) {
    auto set = load_probability_file(manifest.resolve(manifest.probability_files.at(name)), manifest.label_space);
    if (set.model_name() != name) {
      throw ValidationError(ErrorKind::invalid_argument, "file for '" + name + "' declares model '" + set.model_name() + "'");
    }
    std::vector<std::string> missing;
    for (const auto& [id, split] : in.labels.splits()) {
      auto it = set.split_tags().find(id);
      if (it == set.split_tags().end()) {
        missing.push_back(id);
      } else if (it->second != split) {
        throw ValidationError(ErrorKind::id_mismatch, name + ": example '" + id + "' split differs from labels file");
      }
    }
    if (!missing.empty()) {
      if (missing.size() > 5) missing.resize(5);
      throw ValidationError(ErrorKind::id_mismatch, name + ": missing probability rows for " + join(missing));
    }
    if (set.size() != in.labels.splits().size()) {
      throw ValidationError(ErrorKind::id_mismatch, name + ": has rows for ids absent from the labels file");
    }
    in.sets.push_back(std::move(set));
  }
  if (in.labels.ids_in(Split::test).empty()) throw ValidationError(ErrorKind::empty_input, "no test examples");
  return in;
}

/// Base-model rows: each model's own argmax against the test labels.
inline std::vector<EvalReport> evaluate_base_models(const std::vector<ProbabilitySet>& sets, LabelVault& vault) {
  if (!vault.test_fully_labeled()) {
    throw ValidationError(ErrorKind::invalid_argument, "test split is unlabeled; base models cannot be evaluated");
  }
  const auto ids = vault.ids_in(Split::test);
  const auto truth = vault.labels(Phase::final_evaluation, Split::test, ids);
  std::vector<EvalReport> out;
  for (const auto& set : sets) {
    std::vector<std::size_t> pred;
    pred.reserve(ids.size());
    for (const auto& id : ids) pred.push_back(argmax(set.row(id)));
    out.push_back(evaluate(truth, pred, vault.label_space().size(), set.model_name()));
  }
  return out;
}

inline std::vector<EvalReport> evaluate_base_models(const ExperimentManifest& manifest) {
  auto inputs = load_inputs(manifest);
  LabelVault vault(std::move(inputs.labels));
  return evaluate_base_models(inputs.sets, vault);
}

inline std::string config_label(FusionStrategy fusion, const MetaConfig& meta) {
  return std::string(to_string(fusion)) + "/" + meta.name();
}

/// Runs the full protocol on already-loaded inputs:
///   1. carve a stratified validation set out of train
///   2. for each (fusion, meta-classifier): fit on train, score f_macro on val
///   3. keep the best (first in manifest order on ties)
///   4. refit it on train ∪ val, predict test, evaluate if labeled
inline RunResult run_experiment(const ExperimentManifest& manifest, LoadedInputs inputs) {
  manifest.validate();
  RunResult result;
  result.task = manifest.task;
  result.seed = manifest.seed;
  result.manifest_hash = manifest_hash(manifest);
  result.label_space = manifest.label_space;

  TrainConfig cfg = manifest.train;
  cfg.seed = manifest.seed;
  const std::size_t k = manifest.label_space.size();

  LabelVault vault(std::move(inputs.labels));
  const auto split = vault.carve_validation(manifest.validation_fraction, manifest.seed);
  const auto test_ids = vault.ids_in(Split::test);

  std::map<FusionStrategy, FusedFeatures> fused;
  for (auto strategy : manifest.fusions) {
    if (!fused.contains(strategy)) fused.emplace(strategy, fuse(strategy, inputs.sets, manifest.model_order));
  }

  std::optional<double> best_score;
  for (auto strategy : manifest.fusions) {
    const auto& features = fused.at(strategy);
    for (const auto& meta : manifest.metas) {
      ConfigResult entry{strategy, meta, std::nullopt, {}};
      try {
        auto train = make_training_set(features.matrix(split.train),
                                       vault.labels(Phase::selection, Split::train, split.train), k);
        const auto model = train_meta(train, meta, strategy, cfg);
        const auto pred = predict(model, features.matrix(split.val));
        const auto truth = vault.labels(Phase::selection, Split::val, split.val);
        entry.val = evaluate(truth, pred, k, config_label(strategy, meta));
        if (!best_score || entry.val->f_macro > *best_score) {
          best_score = entry.val->f_macro;
          result.chosen = result.configs.size();
        }
      } catch (const ValidationError& e) {
        entry.error = e.what();
      }
      result.configs.push_back(std::move(entry));
    }
  }
  if (!best_score) {
    std::string why = result.configs.empty() ? "" : result.configs.front().error;
    throw ValidationError(ErrorKind::invalid_argument, "every configuration failed to train: " + why);
  }

  // Merge-and-retrain: the validation rows rejoin training for the final fit.
  const auto& winner = result.configs[result.chosen];
  const auto& features = fused.at(winner.fusion);
  result.refit_ids = split.train;
  result.refit_ids.insert(result.refit_ids.end(), split.val.begin(), split.val.end());
  std::sort(result.refit_ids.begin(), result.refit_ids.end());
  std::vector<std::size_t> refit_labels;
  {
    const auto train_labels = vault.labels(Phase::refit, Split::train, split.train);
    const auto val_labels = vault.labels(Phase::refit, Split::val, split.val);
    std::map<std::string, std::size_t> merged;
    for (std::size_t i = 0; i < split.train.size(); ++i) merged.emplace(split.train[i], train_labels[i]);
    for (std::size_t i = 0; i < split.val.size(); ++i) merged.emplace(split.val[i], val_labels[i]);
    for (const auto& id : result.refit_ids) refit_labels.push_back(merged.at(id));
  }
  auto refit = make_training_set(features.matrix(result.refit_ids), std::move(refit_labels), k);
  result.final_model = train_meta(refit, winner.meta, winner.fusion, cfg);

  const auto test_pred = predict(result.final_model, features.matrix(test_ids));
  for (std::size_t i = 0; i < test_ids.size(); ++i) result.test_predictions.emplace(test_ids[i], test_pred[i]);

  if (vault.test_fully_labeled()) {
    const auto truth = vault.labels(Phase::final_evaluation, Split::test, test_ids);
    result.test = evaluate(truth, test_pred, k, config_label(winner.fusion, winner.meta));
    result.base_models = evaluate_base_models(inputs.sets, vault);
  }
  result.label_log = vault.log();
  return result;
}

inline RunResult run_experiment(const ExperimentManifest& manifest) {
  return run_experiment(manifest, load_inputs(manifest));
}

// ---------------------------------------------------------------------------
// Reporting

/// "Ensemble with Voting classifier (P^C as a input feature)"
inline std::string ensemble_row_label(FusionStrategy fusion, const MetaConfig& meta) {
  return std::string("Ensemble with ") + display_name(meta.kind) + " classifier (" + fusion_symbol(fusion) +
         " as a input feature)";
}

/// Results table: one row per base model, then the ensemble row if given.
/// Metrics print with three decimals.
inline std::string render_table(const std::vector<EvalReport>& base_models, const std::optional<EvalReport>& ensemble = {},
                                const std::string& ensemble_label = {}) {
  std::vector<std::pair<std::string, const EvalReport*>> rows;
  for (const auto& r : base_models) rows.emplace_back(r.config, &r);
  if (ensemble) rows.emplace_back(ensemble_label, &*ensemble);
  std::size_t width = 5;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());

  std::ostringstream out;
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };
  out << "| " << pad("Model") << " | Acc   | F_macro | Prec  | Rec   |\n";
  out << "|" << std::string(width + 2, '-') << "|-------|---------|-------|-------|\n";
  for (const auto& [name, r] : rows) {
    out << "| " << pad(name) << " | " << format3(r->acc) << " | " << format3(r->f_macro) << "   | " << format3(r->prec)
        << " | " << format3(r->rec) << " |\n";
  }
  return out.str();
}

inline std::string render_table(const RunResult& result) {
  const auto& chosen = result.chosen_config();
  return render_table(result.base_models, result.test, ensemble_row_label(chosen.fusion, chosen.meta));
}

/// result.json: {task, seed, configs, chosen, test, base_models, ...}.
inline Json result_json(const RunResult& r) {
  Json configs = Json::array();
  for (const auto& c : r.configs) {
    Json entry{{"fusion", to_string(c.fusion)}, {"meta", c.meta.name()}};
    entry["val"] = c.val ? metrics_json(*c.val) : Json(nullptr);
    if (!c.error.empty()) entry["error"] = c.error;
    configs.push_back(entry);
  }
  const auto& chosen = r.chosen_config();
  Json base = Json::array();
  for (const auto& b : r.base_models) {
    Json row = metrics_json(b);
    row["model"] = b.config;
    base.push_back(row);
  }
  std::ostringstream hash;
  hash << std::hex << r.manifest_hash;
  return Json{{"task", r.task},
              {"seed", r.seed.value},
              {"manifest_hash", hash.str()},
              {"averaging", "macro"},
              {"configs", configs},
              {"chosen",
               {{"fusion", to_string(chosen.fusion)},
                {"meta", chosen.meta.name()},
                {"label", ensemble_row_label(chosen.fusion, chosen.meta)},
                {"val", metrics_json(*chosen.val)}}},
              {"test", r.test ? metrics_json(*r.test) : Json(nullptr)},
              {"base_models", base}};
}

/// Writes result.json, report.txt, model.json, predictions.jsonl and one
/// full validation report per configuration under reports/.
inline void write_run_outputs(const RunResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "reports");
  detail::open_for_write(dir / "result.json") << result_json(r).dump(2) << '\n';
  for (std::size_t i = 0; i < r.configs.size(); ++i) {
    const auto& c = r.configs[i];
    if (!c.val) continue;
    std::string name = std::to_string(i) + "_" + to_string(c.fusion) + "_" + c.meta.name();
    std::replace_if(name.begin(), name.end(), [](char ch) { return ch == '(' || ch == ')' || ch == ',' || ch == '='; }, '_');
    detail::open_for_write(dir / "reports" / (name + ".json")) << report_json(*c.val, r.label_space).dump(2) << '\n';
  }
  if (r.test) {
    detail::open_for_write(dir / "test_report.json") << report_json(*r.test, r.label_space).dump(2) << '\n';
    detail::open_for_write(dir / "report.txt") << render_table(r);
  }
  save_meta_model(r.final_model, dir / "model.json");
  auto preds = detail::open_for_write(dir / "predictions.jsonl");
  for (const auto& [id, cls] : r.test_predictions) {
    preds << Json{{"id", id}, {"label", r.label_space.name(cls)}}.dump() << '\n';
  }
}

}  // namespace stackfuse
