#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stackfuse/core.hpp"
#include "stackfuse/meta_model.hpp"
#include "stackfuse/metrics.hpp"

namespace stackfuse {

using Json = nlohmann::json;

inline constexpr int kModelSchemaVersion = 1;
inline constexpr const char* kModelFormat = "stackfuse.meta_model";

namespace detail {

inline std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(ErrorKind::io, "cannot open " + path.string());
  return in;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(ErrorKind::io, "cannot write " + path.string());
  return out;
}

inline Json parse_line(const std::string& line, const std::string& source, std::size_t line_no) {
  try {
    Json j = Json::parse(line);
    if (!j.is_object()) throw ValidationError(ErrorKind::malformed_line, source + ":" + std::to_string(line_no) + ": expected a JSON object");
    return j;
  } catch (const Json::exception& e) {
    throw ValidationError(ErrorKind::malformed_line, source + ":" + std::to_string(line_no) + ": " + e.what());
  }
}

inline bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

/// Probability and label files only carry train/test; validation is carved out later.
inline Split parse_file_split(const Json& value, const std::string& where) {
  if (!value.is_string()) throw ValidationError(ErrorKind::malformed_line, where + ": split must be a string");
  const auto text = value.get<std::string>();
  if (text == "train") return Split::train;
  if (text == "test") return Split::test;
  throw ValidationError(ErrorKind::malformed_line, where + ": split must be \"train\" or \"test\", got \"" + text + "\"");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Probability files: header {"model", "classes"} then {"id", "split", "probs"}

inline ProbabilitySet read_probability_file(std::istream& in, const LabelSpace& expected,
                                            const std::string& source = "<stream>") {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::blank(line)) break;
  }
  if (line_no == 0 || detail::blank(line)) throw ValidationError(ErrorKind::malformed_line, source + ": missing header line");

  const Json header = detail::parse_line(line, source, line_no);
  const std::string where = source + ":" + std::to_string(line_no);
  if (!header.contains("model") || !header["model"].is_string() || !header.contains("classes") ||
      !header["classes"].is_array()) {
    throw ValidationError(ErrorKind::malformed_line, where + ": header needs \"model\" and \"classes\"");
  }
  std::vector<std::string> classes;
  for (const auto& c : header["classes"]) {
    if (!c.is_string()) throw ValidationError(ErrorKind::malformed_line, where + ": class names must be strings");
    classes.push_back(c.get<std::string>());
  }
  if (classes != expected.names()) {
    throw ValidationError(ErrorKind::class_order_mismatch,
                          where + ": file classes [" + join(classes) + "] != expected [" + join(expected.names()) + "]");
  }
  const auto model = header["model"].get<std::string>();

  ProbabilitySet::Rows rows;
  ProbabilitySet::SplitTags splits;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    const std::string at = source + ":" + std::to_string(line_no);
    const Json j = detail::parse_line(line, source, line_no);
    if (!j.contains("id") || !j["id"].is_string() || !j.contains("split") || !j.contains("probs") ||
        !j["probs"].is_array()) {
      throw ValidationError(ErrorKind::malformed_line, at + ": row needs \"id\", \"split\" and \"probs\"");
    }
    const auto id = j["id"].get<std::string>();
    const Split split = detail::parse_file_split(j["split"], at);
    std::vector<double> probs;
    for (const auto& p : j["probs"]) {
      if (!p.is_number()) throw ValidationError(ErrorKind::malformed_line, at + ": probabilities must be numbers");
      probs.push_back(p.get<double>());
    }
    validate_probability_row(probs, expected.size(), at);
    if (!rows.emplace(id, std::move(probs)).second) {
      throw ValidationError(ErrorKind::duplicate_id, at + ": id '" + id + "' already seen");
    }
    splits.emplace(id, split);
  }
  return ProbabilitySet(model, expected, std::move(rows), std::move(splits));
}

inline ProbabilitySet load_probability_file(const std::filesystem::path& path, const LabelSpace& expected) {
  auto in = detail::open_for_read(path);
  return read_probability_file(in, expected, path.string());
}

inline void write_probability_file(std::ostream& out, const ProbabilitySet& set) {
  out << Json{{"model", set.model_name()}, {"classes", set.label_space().names()}}.dump() << '\n';
  for (const auto& [id, probs] : set.rows()) {
    Json row;
    row["id"] = id;
    row["split"] = to_string(set.split_of(id));
    row["probs"] = probs;
    out << row.dump() << '\n';
  }
}

inline void save_probability_file(const std::filesystem::path& path, const ProbabilitySet& set) {
  auto out = detail::open_for_write(path);
  write_probability_file(out, set);
}

// ---------------------------------------------------------------------------
// Label files: {"id", "split", "label": string | null}

inline LabeledDataset read_labels_file(std::istream& in, const LabelSpace& space, const std::string& source = "<stream>") {
  std::map<std::string, std::size_t> labels;
  std::map<std::string, Split> splits;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    const std::string at = source + ":" + std::to_string(line_no);
    const Json j = detail::parse_line(line, source, line_no);
    if (!j.contains("id") || !j["id"].is_string() || !j.contains("split") || !j.contains("label")) {
      throw ValidationError(ErrorKind::malformed_line, at + ": row needs \"id\", \"split\" and \"label\"");
    }
    const auto id = j["id"].get<std::string>();
    const Split split = detail::parse_file_split(j["split"], at);
    if (!splits.emplace(id, split).second) throw ValidationError(ErrorKind::duplicate_id, at + ": id '" + id + "' already seen");
    const auto& label = j["label"];
    if (label.is_null()) {
      if (split != Split::test) throw ValidationError(ErrorKind::malformed_line, at + ": only test rows may be unlabeled");
      continue;
    }
    if (!label.is_string()) throw ValidationError(ErrorKind::malformed_line, at + ": label must be a string or null");
    auto index = space.index_of(label.get<std::string>());
    if (!index) {
      throw ValidationError(ErrorKind::unknown_class, at + ": example '" + id + "' has class '" + label.get<std::string>() + "'");
    }
    labels.emplace(id, *index);
  }
  return LabeledDataset(space, std::move(labels), std::move(splits));
}

inline LabeledDataset load_labels_file(const std::filesystem::path& path, const LabelSpace& space) {
  auto in = detail::open_for_read(path);
  return read_labels_file(in, space, path.string());
}

/// Writes train/test rows; val rows are written back as train.
inline void write_labels_file(std::ostream& out, const LabeledDataset& data) {
  for (const auto& [id, split] : data.splits()) {
    Json row;
    row["id"] = id;
    row["split"] = split == Split::test ? "test" : "train";
    row["label"] = data.is_labeled(id) ? Json(data.label_space().name(data.label_of(id))) : Json(nullptr);
    out << row.dump() << '\n';
  }
}

inline void save_labels_file(const std::filesystem::path& path, const LabeledDataset& data) {
  auto out = detail::open_for_write(path);
  write_labels_file(out, data);
}

// ---------------------------------------------------------------------------
// Reports

inline Json metrics_json(const EvalReport& r) {
  return Json{{"acc", r.acc}, {"f_macro", r.f_macro}, {"prec", r.prec}, {"rec", r.rec}};
}

inline Json report_json(const EvalReport& r, const LabelSpace& space) {
  Json j = metrics_json(r);
  j["config"] = r.config;
  j["averaging"] = "macro";
  Json per_class = Json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    per_class.push_back({{"class", space.name(c)},
                         {"precision", r.per_class[c].precision},
                         {"recall", r.per_class[c].recall},
                         {"f1", r.per_class[c].f1}});
  }
  j["per_class"] = per_class;
  Json cm = Json::array();
  for (std::size_t t = 0; t < r.confusion.n_classes; ++t) {
    Json row = Json::array();
    for (std::size_t p = 0; p < r.confusion.n_classes; ++p) row.push_back(r.confusion(t, p));
    cm.push_back(row);
  }
  j["confusion"] = cm;
  return j;
}

// ---------------------------------------------------------------------------
// Meta-model documents

namespace detail {

inline Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

inline Matrix matrix_from(const Json& j, std::size_t rows, std::size_t cols) {
  if (!j.is_array() || j.size() != rows) throw ValidationError(ErrorKind::schema, "matrix row count mismatch");
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto values = j[r].get<std::vector<double>>();
    if (values.size() != cols) throw ValidationError(ErrorKind::schema, "matrix column count mismatch");
    std::copy(values.begin(), values.end(), m.row(r).begin());
  }
  return m;
}

inline Json to_json(const LinearModel& m) { return Json{{"weights", matrix_json(m.weights)}, {"bias", m.bias}}; }

inline LinearModel linear_from(const Json& j) {
  LinearModel m;
  m.bias = j.at("bias").get<std::vector<double>>();
  const auto& w = j.at("weights");
  const std::size_t cols = w.empty() ? 0 : w.at(0).size();
  m.weights = matrix_from(w, m.bias.size(), cols);
  return m;
}

inline Json to_json(const GaussianNBModel& m) {
  return Json{{"class_priors", m.class_priors}, {"means", matrix_json(m.means)}, {"variances", matrix_json(m.variances)}};
}

inline GaussianNBModel nb_from(const Json& j, std::size_t dim) {
  GaussianNBModel m;
  m.class_priors = j.at("class_priors").get<std::vector<double>>();
  m.means = matrix_from(j.at("means"), m.class_priors.size(), dim);
  m.variances = matrix_from(j.at("variances"), m.class_priors.size(), dim);
  for (double v : m.variances.data()) {
    if (!(v > 0.0)) throw ValidationError(ErrorKind::schema, "naive bayes variances must be positive");
  }
  return m;
}

inline Json to_json(const ForestModel& m) {
  Json trees = Json::array();
  for (const auto& tree : m.trees) {
    Json feature = Json::array(), threshold = Json::array(), left = Json::array(), right = Json::array(),
         histogram = Json::array();
    for (const auto& node : tree.nodes) {
      feature.push_back(node.feature);
      threshold.push_back(node.threshold);
      left.push_back(node.left);
      right.push_back(node.right);
      histogram.push_back(node.histogram);
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"histogram", histogram}});
  }
  Json seeds = Json::array();
  for (auto s : m.tree_seeds) seeds.push_back(s.value);
  return Json{{"n_trees", m.n_trees}, {"n_classes", m.n_classes}, {"dim", m.dim}, {"tree_seeds", seeds}, {"trees", trees}};
}

inline ForestModel forest_from(const Json& j) {
  ForestModel m;
  m.n_trees = j.at("n_trees").get<std::size_t>();
  m.n_classes = j.at("n_classes").get<std::size_t>();
  m.dim = j.at("dim").get<std::size_t>();
  for (const auto& s : j.at("tree_seeds")) m.tree_seeds.push_back(Seed{s.get<std::uint64_t>()});
  for (const auto& t : j.at("trees")) {
    const auto feature = t.at("feature").get<std::vector<std::int64_t>>();
    const auto threshold = t.at("threshold").get<std::vector<double>>();
    const auto left = t.at("left").get<std::vector<std::size_t>>();
    const auto right = t.at("right").get<std::vector<std::size_t>>();
    const auto histogram = t.at("histogram").get<std::vector<std::vector<std::size_t>>>();
    const std::size_t n = feature.size();
    if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || histogram.size() != n) {
      throw ValidationError(ErrorKind::schema, "tree arrays disagree in length");
    }
    DecisionTree tree;
    for (std::size_t i = 0; i < n; ++i) {
      DecisionTree::Node node{feature[i], threshold[i], left[i], right[i], histogram[i]};
      if (node.feature >= 0) {
        if (static_cast<std::size_t>(node.feature) >= m.dim || node.left >= n || node.right >= n || node.left <= i ||
            node.right <= i) {
          throw ValidationError(ErrorKind::schema, "tree node references are invalid");
        }
      } else {
        std::size_t total = 0;
        for (auto c : node.histogram) total += c;
        if (node.histogram.size() != m.n_classes || total == 0) {
          throw ValidationError(ErrorKind::schema, "leaf histogram must be nonempty with one count per class");
        }
      }
      tree.nodes.push_back(std::move(node));
    }
    m.trees.push_back(std::move(tree));
  }
  if (m.trees.size() != m.n_trees || m.tree_seeds.size() != m.n_trees) {
    throw ValidationError(ErrorKind::schema, "tree count does not match n_trees");
  }
  return m;
}

inline Json to_json(const LinearSvmModel& m) {
  Json machines = Json::array();
  for (const auto& s : m.machines) {
    machines.push_back({{"weights", s.weights}, {"bias", s.bias}, {"platt_a", s.platt.a}, {"platt_b", s.platt.b}});
  }
  return Json{{"n_classes", m.n_classes}, {"dim", m.dim}, {"machines", machines}};
}

inline LinearSvmModel svm_from(const Json& j) {
  LinearSvmModel m;
  m.n_classes = j.at("n_classes").get<std::size_t>();
  m.dim = j.at("dim").get<std::size_t>();
  for (const auto& s : j.at("machines")) {
    BinarySvm svm;
    svm.weights = s.at("weights").get<std::vector<double>>();
    svm.bias = s.at("bias").get<double>();
    svm.platt = {s.at("platt_a").get<double>(), s.at("platt_b").get<double>()};
    if (svm.weights.size() != m.dim) throw ValidationError(ErrorKind::schema, "svm weight length mismatch");
    m.machines.push_back(std::move(svm));
  }
  const std::size_t expected = m.n_classes == 2 ? 1 : m.n_classes;
  if (m.machines.size() != expected) throw ValidationError(ErrorKind::schema, "svm machine count mismatch");
  return m;
}

inline Json to_json(const BinaryModel& m) {
  if (const auto* lr = std::get_if<LinearModel>(&m)) {
    Json j = to_json(*lr);
    j["type"] = "logreg";
    return j;
  }
  Json j = to_json(std::get<LinearSvmModel>(m));
  j["type"] = "linear_svc";
  return j;
}

inline BinaryModel binary_from(const Json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "logreg") return linear_from(j);
  if (type == "linear_svc") return svm_from(j);
  throw ValidationError(ErrorKind::schema, "unknown binary model type '" + type + "'");
}

inline Json code_json(const CodeMatrix& code) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < code.n_classes; ++r) {
    Json row = Json::array();
    for (std::size_t l = 0; l < code.length; ++l) row.push_back(code(r, l));
    rows.push_back(row);
  }
  return rows;
}

inline CodeMatrix code_from(const Json& j) {
  CodeMatrix code;
  code.n_classes = j.size();
  code.length = code.n_classes ? j.at(0).size() : 0;
  for (const auto& row : j) {
    const auto values = row.get<std::vector<int>>();
    if (values.size() != code.length) throw ValidationError(ErrorKind::schema, "ragged code matrix");
    for (int v : values) code.entries.push_back(static_cast<std::int8_t>(v));
  }
  validate_code_matrix(code);
  return code;
}

struct ParamsWriter {
  Json operator()(const LinearModel& m) const { return to_json(m); }
  Json operator()(const ForestModel& m) const { return to_json(m); }
  Json operator()(const GaussianNBModel& m) const { return to_json(m); }
  Json operator()(const LinearSvmModel& m) const { return to_json(m); }
  Json operator()(const VotingModel& m) const {
    return Json{{"logreg", to_json(m.logreg)},
                {"random_forest", to_json(m.forest)},
                {"gaussian_nb", to_json(m.naive_bayes)},
                {"linear_svc", to_json(m.svm)}};
  }
  Json operator()(const OvRModel& m) const {
    Json members = Json::array();
    for (const auto& b : m.members) members.push_back(to_json(b));
    return Json{{"base", to_string(m.base_kind)}, {"members", members}};
  }
  Json operator()(const ECOCModel& m) const {
    Json columns = Json::array();
    for (const auto& b : m.columns) columns.push_back(to_json(b));
    return Json{{"base", to_string(m.base_kind)}, {"code", code_json(m.code)}, {"columns", columns}};
  }
};

}  // namespace detail

inline Json meta_model_json(const MetaModel& model) {
  Json j;
  j["format"] = kModelFormat;
  j["version"] = kModelSchemaVersion;
  j["kind"] = to_string(model.config.kind);
  j["base"] = to_string(model.config.base);
  j["code_length"] = model.config.code_length ? Json(*model.config.code_length) : Json(nullptr);
  j["fusion"] = to_string(model.fusion);
  j["seed"] = model.seed.value;
  j["n_classes"] = model.n_classes;
  j["feature_dim"] = model.feature_dim;
  j["params"] = std::visit(detail::ParamsWriter{}, model.model);
  return j;
}

/// Canonical text form: sorted keys, shortest round-trip doubles.
inline std::string serialize_meta_model(const MetaModel& model) { return meta_model_json(model).dump(1) + "\n"; }

inline MetaModel meta_model_from_json(const Json& j) {
  try {
    if (!j.is_object() || j.value("format", std::string{}) != kModelFormat) {
      throw ValidationError(ErrorKind::schema, "not a meta-model document");
    }
    const int version = j.at("version").get<int>();
    if (version != kModelSchemaVersion) {
      throw ValidationError(ErrorKind::version, "model schema version " + std::to_string(version) + " is not supported");
    }
    MetaModel m;
    m.config.kind = parse_meta_kind(j.at("kind").get<std::string>());
    m.config.base = parse_base_kind(j.at("base").get<std::string>());
    if (!j.at("code_length").is_null()) m.config.code_length = j.at("code_length").get<std::size_t>();
    m.fusion = parse_fusion(j.at("fusion").get<std::string>());
    m.seed = Seed{j.at("seed").get<std::uint64_t>()};
    m.n_classes = j.at("n_classes").get<std::size_t>();
    m.feature_dim = j.at("feature_dim").get<std::size_t>();
    const Json& p = j.at("params");
    switch (m.config.kind) {
      case MetaKind::logreg: m.model = detail::linear_from(p); break;
      case MetaKind::random_forest: m.model = detail::forest_from(p); break;
      case MetaKind::gaussian_nb: m.model = detail::nb_from(p, m.feature_dim); break;
      case MetaKind::linear_svc: m.model = detail::svm_from(p); break;
      case MetaKind::voting: {
        VotingModel v;
        v.n_classes = m.n_classes;
        v.logreg = detail::linear_from(p.at("logreg"));
        v.forest = detail::forest_from(p.at("random_forest"));
        v.naive_bayes = detail::nb_from(p.at("gaussian_nb"), m.feature_dim);
        v.svm = detail::svm_from(p.at("linear_svc"));
        m.model = std::move(v);
        break;
      }
      case MetaKind::one_vs_rest: {
        OvRModel o;
        o.base_kind = parse_base_kind(p.at("base").get<std::string>());
        for (const auto& b : p.at("members")) o.members.push_back(detail::binary_from(b));
        if (o.members.size() != m.n_classes) throw ValidationError(ErrorKind::schema, "one member per class expected");
        m.model = std::move(o);
        break;
      }
      case MetaKind::ecoc: {
        ECOCModel e;
        e.base_kind = parse_base_kind(p.at("base").get<std::string>());
        e.code = detail::code_from(p.at("code"));
        for (const auto& b : p.at("columns")) e.columns.push_back(detail::binary_from(b));
        if (e.columns.size() != e.code.length || e.code.n_classes != m.n_classes) {
          throw ValidationError(ErrorKind::schema, "ECOC columns do not match the code matrix");
        }
        m.model = std::move(e);
        break;
      }
    }
    return m;
  } catch (const Json::exception& e) {
    throw ValidationError(ErrorKind::schema, e.what());
  }
}

inline MetaModel parse_meta_model(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ValidationError(ErrorKind::schema, std::string("unreadable model document: ") + e.what());
  }
  return meta_model_from_json(j);
}

inline void save_meta_model(const MetaModel& model, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  out << serialize_meta_model(model);
}

inline MetaModel load_meta_model(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_meta_model(buffer.str());
}

}  // namespace stackfuse
