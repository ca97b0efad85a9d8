#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "stackfuse/pipeline.hpp"
#include "stackfuse/synth.hpp"
#include "test_support.hpp"

namespace stackfuse {
namespace {

using testing::TempDir;

LabeledDataset balanced_labels(std::size_t per_class, std::size_t k = 2) {
  std::map<std::string, std::size_t> labels;
  std::map<std::string, Split> splits;
  for (std::size_t i = 0; i < per_class * k; ++i) {
    const auto id = synthetic_id(i);
    labels.emplace(id, i % k);
    splits.emplace(id, Split::train);
  }
  return LabeledDataset(k == 2 ? LabelSpace::binary() : LabelSpace::attribution(), labels, splits);
}

// ---------------------------------------------------------------------------
// Stratified split

TEST(SplitTest, EightyTwentyStratified) {
  const auto data = balanced_labels(50);
  const auto split = split_train_val(data, 0.2, Seed{1});
  EXPECT_EQ(split.train.size(), 80u);
  EXPECT_EQ(split.val.size(), 20u);
  std::vector<std::size_t> per_class(2, 0);
  for (const auto& id : split.val) ++per_class[data.label_of(id)];
  EXPECT_EQ(per_class, (std::vector<std::size_t>{10, 10}));
}

TEST(SplitTest, HalfOfTwoPerClass) {
  const auto data = balanced_labels(2, 6);
  const auto split = split_train_val(data, 0.5, Seed{2});
  EXPECT_EQ(split.train.size(), 6u);
  EXPECT_EQ(split.val.size(), 6u);
}

TEST(SplitTest, DisjointCoveringDeterministic) {
  const auto data = balanced_labels(37, 6);
  const auto a = split_train_val(data, 0.2, Seed{5});
  std::set<std::string> all(a.train.begin(), a.train.end());
  for (const auto& id : a.val) EXPECT_TRUE(all.insert(id).second) << id;
  EXPECT_EQ(all.size(), data.ids_in(Split::train).size());

  const auto b = split_train_val(data, 0.2, Seed{5});
  EXPECT_EQ(a.val, b.val);
  EXPECT_NE(a.val, split_train_val(data, 0.2, Seed{6}).val);
}

TEST(SplitTest, SingletonClassRejected) {
  LabeledDataset data(LabelSpace::binary(), {{"a", 0}, {"b", 0}, {"c", 1}},
                      {{"a", Split::train}, {"b", Split::train}, {"c", Split::train}});
  EXPECT_THROW(split_train_val(data, 0.2, Seed{0}), ValidationError);
  EXPECT_THROW(split_train_val(balanced_labels(5), 1.0, Seed{0}), ValidationError);
}

// ---------------------------------------------------------------------------
// Label vault

TEST(LabelVaultTest, EnforcesPhasePolicy) {
  auto data = balanced_labels(10);
  std::map<std::string, Split> splits = data.splits();
  splits.at(synthetic_id(0)) = Split::test;
  LabelVault vault(LabeledDataset(data.label_space(), data.labels(), splits));
  const auto split = vault.carve_validation(0.2, Seed{1});
  const std::vector<std::string> test_ids{synthetic_id(0)};

  EXPECT_THROW(vault.labels(Phase::selection, Split::test, test_ids), LeakageError);
  EXPECT_THROW(vault.labels(Phase::refit, Split::test, test_ids), LeakageError);
  EXPECT_THROW(vault.labels(Phase::split, Split::val, split.val), LeakageError);
  EXPECT_THROW(vault.labels(Phase::final_evaluation, Split::train, split.train), LeakageError);
  // Asking for a val id under the train split is also refused.
  EXPECT_THROW(vault.labels(Phase::selection, Split::train, split.val), LeakageError);

  EXPECT_NO_THROW(vault.labels(Phase::selection, Split::val, split.val));
  EXPECT_NO_THROW(vault.labels(Phase::final_evaluation, Split::test, test_ids));
  ASSERT_EQ(vault.log().size(), 3u);
  EXPECT_EQ(vault.log()[0].phase, Phase::split);
  EXPECT_EQ(vault.log()[2].split, Split::test);
}

// ---------------------------------------------------------------------------
// Full protocol on small generated tasks

ExperimentManifest prepare(const TempDir& dir, const SynthSpec& spec) {
  write_synthetic_task(generate_synthetic_task(spec), spec, dir.path());
  auto m = load_manifest(dir.path() / "manifest.json");
  m.train.rf_trees = 20;
  return m;
}

SynthSpec tiny_spec(std::size_t k, std::uint64_t seed) {
  auto spec = k == 2 ? binary_detection_spec(Seed{seed}, 300, 150) : attribution_spec(Seed{seed}, 300, 150);
  return spec;
}

TEST(ExperimentTest, ChoosesArgmaxAndRefitsOnTrainPlusVal) {
  TempDir dir("exp_argmax");
  const auto manifest = prepare(dir, tiny_spec(6, 1));
  const auto result = run_experiment(manifest);
  ASSERT_EQ(result.configs.size(), manifest.fusions.size() * manifest.metas.size());
  for (const auto& c : result.configs) {
    ASSERT_TRUE(c.val) << c.error;
    EXPECT_LE(c.val->f_macro, result.chosen_config().val->f_macro);
  }
  // First index wins ties.
  for (std::size_t i = 0; i < result.chosen; ++i) {
    EXPECT_LT(result.configs[i].val->f_macro, result.chosen_config().val->f_macro);
  }

  auto train = load_labels_file(manifest.resolve(manifest.labels_file), manifest.label_space).ids_in(Split::train);
  EXPECT_EQ(result.refit_ids, train);
  EXPECT_TRUE(result.test);
  EXPECT_EQ(result.test_predictions.size(), 150u);
  EXPECT_EQ(result.base_models.size(), 5u);
}

TEST(ExperimentTest, TestLabelsReadOnlyAtTheEnd) {
  TempDir dir("exp_log");
  const auto result = run_experiment(prepare(dir, tiny_spec(2, 2)));
  bool seen_final = false;
  for (const auto& access : result.label_log) {
    if (access.split == Split::test) {
      EXPECT_EQ(access.phase, Phase::final_evaluation);
    }
    if (access.phase == Phase::final_evaluation) {
      seen_final = true;
    } else {
      EXPECT_FALSE(seen_final) << "label read after final evaluation began";
    }
  }
  EXPECT_TRUE(seen_final);
}

TEST(ExperimentTest, SingletonGridPicksItsOnlyConfig) {
  TempDir dir("exp_single");
  auto manifest = prepare(dir, tiny_spec(2, 3));
  manifest.fusions = {FusionStrategy::average};
  manifest.metas = {MetaConfig{MetaKind::gaussian_nb, BaseKind::logreg, std::nullopt}};
  const auto result = run_experiment(manifest);
  EXPECT_EQ(result.chosen, 0u);
  EXPECT_EQ(result.final_model.config.kind, MetaKind::gaussian_nb);
  EXPECT_EQ(result.final_model.feature_dim, 2u);
}

TEST(ExperimentTest, SameManifestSameResult) {
  TempDir dir("exp_repeat");
  const auto manifest = prepare(dir, tiny_spec(2, 4));
  const auto a = run_experiment(manifest);
  const auto b = run_experiment(manifest);
  EXPECT_EQ(result_json(a).dump(), result_json(b).dump());
  EXPECT_EQ(serialize_meta_model(a.final_model), serialize_meta_model(b.final_model));
}

TEST(ExperimentTest, UnlabeledTestSkipsEvaluation) {
  TempDir dir("exp_unlabeled");
  const auto manifest = prepare(dir, tiny_spec(2, 5));
  auto inputs = load_inputs(manifest);
  auto labels = inputs.labels.labels();
  for (const auto& id : inputs.labels.ids_in(Split::test)) labels.erase(id);
  inputs.labels = LabeledDataset(manifest.label_space, labels, inputs.labels.splits());
  const auto result = run_experiment(manifest, std::move(inputs));
  EXPECT_FALSE(result.test);
  EXPECT_TRUE(result.base_models.empty());
  EXPECT_EQ(result.test_predictions.size(), 150u);
  for (const auto& access : result.label_log) EXPECT_NE(access.split, Split::test);
}

TEST(ExperimentTest, MissingIdRejectedBeforeTraining) {
  TempDir dir("exp_missing");
  const auto manifest = prepare(dir, tiny_spec(2, 6));
  const auto path = manifest.resolve(manifest.probability_files.at("model_3"));
  std::vector<std::string> lines;
  {
    std::ifstream in(path);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
  }
  lines.pop_back();
  {
    std::ofstream out(path);
    for (const auto& line : lines) out << line << '\n';
  }
  try {
    load_inputs(manifest);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::id_mismatch);
    EXPECT_NE(std::string(e.what()).find("model_3"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// Base-model evaluation and reporting

TEST(BaseModelTest, OracleAndUniformModels) {
  const auto space = LabelSpace::binary();
  ProbabilitySet::Rows oracle_rows, uniform_rows;
  ProbabilitySet::SplitTags splits;
  std::map<std::string, std::size_t> labels;
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < 40; ++i) {
    const auto id = synthetic_id(i);
    const std::size_t y = (i * 7) % 3 == 0 ? 0 : 1;
    zeros += y == 0;
    labels.emplace(id, y);
    splits.emplace(id, Split::test);
    oracle_rows.emplace(id, y == 0 ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0});
    uniform_rows.emplace(id, std::vector<double>{0.5, 0.5});
  }
  std::vector<ProbabilitySet> sets{ProbabilitySet("oracle", space, oracle_rows, splits),
                                   ProbabilitySet("uniform", space, uniform_rows, splits)};
  LabelVault vault(LabeledDataset(space, labels, splits));
  const auto reports = evaluate_base_models(sets, vault);
  EXPECT_EQ(reports[0].acc, 1.0);
  EXPECT_EQ(reports[0].f_macro, 1.0);
  // Uniform rows tie; argmax picks class 0 for every example.
  EXPECT_DOUBLE_EQ(reports[1].acc, static_cast<double>(zeros) / 40.0);
}

TEST(ReportTest, TableHasThreeDecimalsAndEnsembleRow) {
  const std::vector<std::size_t> truth{0, 1, 1, 0}, guess{0, 1, 0, 0};
  const auto a = evaluate(truth, guess, 2, "model_1");
  const auto e = evaluate(truth, truth, 2, "ensemble");
  const auto label = ensemble_row_label(FusionStrategy::concat, MetaConfig{MetaKind::voting, BaseKind::logreg, {}});
  EXPECT_EQ(label, "Ensemble with Voting classifier (P^C as a input feature)");
  const auto table = render_table({a}, e, label);
  EXPECT_NE(table.find("| 0.750 |"), std::string::npos);
  EXPECT_NE(table.find("| 1.000 |"), std::string::npos);
  EXPECT_NE(table.find(label), std::string::npos);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
}

TEST(ReportTest, RunOutputsWritten) {
  TempDir dir("exp_outputs");
  const auto result = run_experiment(prepare(dir, tiny_spec(2, 7)));
  const auto out = dir.path() / "out";
  write_run_outputs(result, out);
  for (const auto* name : {"result.json", "report.txt", "model.json", "predictions.jsonl", "test_report.json"}) {
    EXPECT_TRUE(std::filesystem::exists(out / name)) << name;
  }
  const auto model = load_meta_model(out / "model.json");
  EXPECT_EQ(serialize_meta_model(model), serialize_meta_model(result.final_model));
  std::ifstream in(out / "result.json");
  const auto j = Json::parse(in);
  EXPECT_EQ(j.at("base_models").size(), 5u);
  EXPECT_EQ(j.at("configs").size(), 8u);
}

}  // namespace
}  // namespace stackfuse
