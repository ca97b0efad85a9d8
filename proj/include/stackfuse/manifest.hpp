#pragma once

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stackfuse/dataio.hpp"

namespace stackfuse {

/// Everything one experiment needs. Relative paths resolve against `base_dir`.
struct ExperimentManifest {
  std::string task;
  LabelSpace label_space;
  std::vector<std::string> model_order;
  std::map<std::string, std::filesystem::path> probability_files;
  std::filesystem::path labels_file;
  std::vector<FusionStrategy> fusions{FusionStrategy::concat, FusionStrategy::average};
  std::vector<MetaConfig> metas;
  Seed seed{0};
  double validation_fraction = 0.2;
  TrainConfig train;  // seed is overwritten by `seed`
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : base_dir / p; }

  void validate() const {
    auto fail = [](const std::string& what) { throw ValidationError(ErrorKind::invalid_argument, "manifest: " + what); };
    if (task.empty()) fail("task name is empty");
    if (label_space.size() < 2) fail("needs at least 2 classes");
    if (model_order.empty()) fail("model_order is empty");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) fail("validation_fraction must lie in (0,1)");
    if (fusions.empty()) fail("no fusion strategies");
    if (metas.empty()) fail("no meta-classifiers");
    if (labels_file.empty()) fail("labels_file missing");
    for (const auto& name : model_order) {
      if (!probability_files.contains(name)) fail("no probability file for model '" + name + "'");
    }
    if (probability_files.size() != model_order.size()) fail("probability_files lists models missing from model_order");
    train.validate();
  }
};

namespace detail {

inline Json train_config_json(const TrainConfig& c) {
  return Json{{"lr_step", c.lr_step},
              {"lr_l2", c.lr_l2},
              {"lr_max_iters", c.lr_max_iters},
              {"lr_tol", c.lr_tol},
              {"svm_c", c.svm_c},
              {"svm_epochs", c.svm_epochs},
              {"rf_trees", c.rf_trees},
              {"rf_max_features", c.rf_max_features == MaxFeatures::sqrt ? "sqrt" : "all"},
              {"rf_bootstrap", c.rf_bootstrap},
              {"nb_var_smoothing", c.nb_var_smoothing}};
}

inline TrainConfig train_config_from(const Json& j) {
  TrainConfig c;
  c.lr_step = j.value("lr_step", c.lr_step);
  c.lr_l2 = j.value("lr_l2", c.lr_l2);
  c.lr_max_iters = j.value("lr_max_iters", c.lr_max_iters);
  c.lr_tol = j.value("lr_tol", c.lr_tol);
  c.svm_c = j.value("svm_c", c.svm_c);
  c.svm_epochs = j.value("svm_epochs", c.svm_epochs);
  c.rf_trees = j.value("rf_trees", c.rf_trees);
  const auto mf = j.value("rf_max_features", std::string("sqrt"));
  if (mf == "sqrt") {
    c.rf_max_features = MaxFeatures::sqrt;
  } else if (mf == "all") {
    c.rf_max_features = MaxFeatures::all;
  } else {
    throw ValidationError(ErrorKind::invalid_argument, "rf_max_features must be \"sqrt\" or \"all\"");
  }
  c.rf_bootstrap = j.value("rf_bootstrap", c.rf_bootstrap);
  c.nb_var_smoothing = j.value("nb_var_smoothing", c.nb_var_smoothing);
  return c;
}

inline Json meta_config_json(const MetaConfig& m) {
  Json j{{"kind", to_string(m.kind)}};
  if (m.kind == MetaKind::one_vs_rest || m.kind == MetaKind::ecoc) j["base"] = to_string(m.base);
  if (m.code_length) j["code_length"] = *m.code_length;
  return j;
}

inline MetaConfig meta_config_from(const Json& j) {
  MetaConfig m;
  if (j.is_string()) {
    m.kind = parse_meta_kind(j.get<std::string>());
    return m;
  }
  m.kind = parse_meta_kind(j.at("kind").get<std::string>());
  if (j.contains("base")) m.base = parse_base_kind(j.at("base").get<std::string>());
  if (j.contains("code_length") && !j.at("code_length").is_null()) m.code_length = j.at("code_length").get<std::size_t>();
  return m;
}

}  // namespace detail

inline Json manifest_json(const ExperimentManifest& m) {
  Json files = Json::object();
  for (const auto& [name, path] : m.probability_files) files[name] = path.generic_string();
  Json fusions = Json::array();
  for (auto f : m.fusions) fusions.push_back(to_string(f));
  Json metas = Json::array();
  for (const auto& meta : m.metas) metas.push_back(detail::meta_config_json(meta));
  return Json{{"task", m.task},
              {"classes", m.label_space.names()},
              {"model_order", m.model_order},
              {"probability_files", files},
              {"labels_file", m.labels_file.generic_string()},
              {"fusions", fusions},
              {"meta_classifiers", metas},
              {"seed", m.seed.value},
              {"validation_fraction", m.validation_fraction},
              {"train_config", detail::train_config_json(m.train)}};
}

inline ExperimentManifest manifest_from_json(const Json& j, const std::filesystem::path& base_dir) {
  try {
    ExperimentManifest m;
    m.task = j.at("task").get<std::string>();
    m.label_space = LabelSpace(j.at("classes").get<std::vector<std::string>>());
    m.model_order = j.at("model_order").get<std::vector<std::string>>();
    for (const auto& [name, path] : j.at("probability_files").items()) m.probability_files[name] = path.get<std::string>();
    m.labels_file = j.at("labels_file").get<std::string>();
    if (j.contains("fusions")) {
      m.fusions.clear();
      for (const auto& f : j.at("fusions")) m.fusions.push_back(parse_fusion(f.get<std::string>()));
    }
    for (const auto& meta : j.at("meta_classifiers")) m.metas.push_back(detail::meta_config_from(meta));
    m.seed = Seed{j.value("seed", std::uint64_t{0})};
    m.validation_fraction = j.value("validation_fraction", 0.2);
    if (j.contains("train_config")) m.train = detail::train_config_from(j.at("train_config"));
    m.train.seed = m.seed;
    m.base_dir = base_dir;
    m.validate();
    return m;
  } catch (const Json::exception& e) {
    throw ValidationError(ErrorKind::schema, std::string("manifest: ") + e.what());
  }
}

inline ExperimentManifest load_manifest(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ValidationError(ErrorKind::schema, path.string() + ": " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

inline void save_manifest(const ExperimentManifest& m, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  out << manifest_json(m).dump(2) << '\n';
}

/// Provenance hash over the canonical manifest text (paths as written).
inline std::uint64_t manifest_hash(const ExperimentManifest& m) { return fnv1a(manifest_json(m).dump()); }

}  // namespace stackfuse
