#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "stackfuse/learners.hpp"
#include "test_support.hpp"

namespace stackfuse {
namespace {

using testing::accuracy;
using testing::blobs;
using testing::random_dataset;

TrainingSet line_data() {
  return make_training_set(Matrix::from_rows({{-1.0}, {1.0}}), {0, 1}, 2);
}

// ---------------------------------------------------------------------------
// Logistic regression

TEST(LogRegTest, SeparableLineFitsPerfectly) {
  TrainConfig cfg;
  cfg.lr_l2 = 1e-4;
  const auto data = line_data();
  const auto model = train_logreg(data, cfg);
  // Exhaustive margin check: every training point on the correct side.
  const auto margins = binary_margins(model, data.x);
  EXPECT_LT(margins[0], 0.0);
  EXPECT_GT(margins[1], 0.0);
  EXPECT_EQ(accuracy(predict(model, data.x), data.y), 1.0);
}

TEST(LogRegTest, MirrorSymmetricDataIsUndecidedAtOrigin) {
  const auto model = train_logreg(line_data(), TrainConfig{});
  const auto p = predict_proba(model, Matrix::from_rows({{0.0}}));
  EXPECT_NEAR(p(0, 0), 0.5, 1e-9);
  EXPECT_NEAR(p(0, 1), 0.5, 1e-9);
}

// Central finite differences with h = 1e-5 at random parameter points.
TEST(LogRegTest, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = random_dataset(40, 5, 3, seed);
    const LogRegObjective objective(data, 1e-2);
    Rng rng(Seed{seed + 1000});
    std::vector<double> theta(objective.n_params());
    for (double& v : theta) v = rng.uniform(-2.0, 2.0);
    std::vector<double> grad(theta.size());
    objective.value_and_gradient(theta, grad);
    constexpr double h = 1e-5;
    double worst = 0.0;
    for (std::size_t p = 0; p < theta.size(); ++p) {
      auto plus = theta, minus = theta;
      plus[p] += h;
      minus[p] -= h;
      const double fd = (objective.value(plus) - objective.value(minus)) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad[p]));
    }
    EXPECT_LT(worst, 1e-5) << "seed " << seed;
  }
}

TEST(LogRegTest, LossNeverIncreasesAcrossAcceptedSteps) {
  const auto data = random_dataset(200, 6, 4, 21);
  LogRegTrace trace;
  TrainConfig cfg;
  cfg.lr_step = 50.0;  // deliberately too large so backtracking must engage
  cfg.lr_max_iters = 200;
  train_logreg(data, cfg, &trace);
  ASSERT_GT(trace.losses.size(), 2u);
  for (std::size_t i = 1; i < trace.losses.size(); ++i) EXPECT_LE(trace.losses[i], trace.losses[i - 1]);
}

TEST(LogRegTest, ZeroWeightsGiveUniformProbabilities) {
  LinearModel model{Matrix(3, 2), {0.0, 0.0, 0.0}};
  const auto p = predict_proba(model, Matrix::from_rows({{1.0, -4.0}, {0.0, 0.0}}));
  for (double v : p.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(LogRegTest, RejectsSingleClassAndNonFinite) {
  EXPECT_THROW(train_logreg(make_training_set(Matrix::from_rows({{0.0}, {1.0}}), {1, 1}, 2), TrainConfig{}),
               ValidationError);
  auto data = line_data();
  data.x(0, 0) = std::nan("");
  try {
    train_logreg(data, TrainConfig{});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::non_finite);
  }
}

TEST(LogRegTest, DeterministicAndDimensionChecked) {
  const auto data = random_dataset(100, 4, 3, 5);
  const auto a = train_logreg(data, TrainConfig{});
  const auto b = train_logreg(data, TrainConfig{});
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
  EXPECT_THROW(predict_proba(a, Matrix(1, 5)), ValidationError);
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes

TEST(GaussianNBTest, FarClustersSeparatePerfectly) {
  Rng rng(Seed{3});
  Matrix x(200, 1);
  std::vector<std::size_t> y;
  for (std::size_t i = 0; i < 200; ++i) {
    const std::size_t c = i % 2;
    // Uniform on [-sqrt(3), sqrt(3)] has unit variance.
    x(i, 0) = (c ? 100.0 : 0.0) + rng.uniform(-std::sqrt(3.0), std::sqrt(3.0));
    y.push_back(c);
  }
  const auto data = make_training_set(x, y, 2);
  const auto model = train_gaussian_nb(data, TrainConfig{});
  EXPECT_EQ(accuracy(predict(model, data.x), data.y), 1.0);

  // Brute-force posterior from independently computed moments.
  const auto p = predict_proba(model, data.x);
  for (std::size_t i = 0; i < 200; i += 17) {
    std::vector<double> joint(2);
    for (std::size_t c = 0; c < 2; ++c) {
      double mean = 0.0, var = 0.0, count = 0.0;
      for (std::size_t j = 0; j < 200; ++j) {
        if (y[j] == c) {
          mean += x(j, 0);
          count += 1.0;
        }
      }
      mean /= count;
      for (std::size_t j = 0; j < 200; ++j) {
        if (y[j] == c) var += (x(j, 0) - mean) * (x(j, 0) - mean);
      }
      var /= count;
      joint[c] = 0.5 * std::exp(-0.5 * (x(i, 0) - mean) * (x(i, 0) - mean) / var) /
                 std::sqrt(2 * std::numbers::pi * var);
    }
    const double total = joint[0] + joint[1];
    EXPECT_NEAR(p(i, y[i]), joint[y[i]] / total, 1e-9);
  }
}

TEST(GaussianNBTest, EqualClassesGiveEqualPriors) {
  const auto data = make_training_set(Matrix::from_rows({{0.0}, {1.0}, {2.0}, {3.0}}), {0, 1, 0, 1}, 2);
  const auto nb = train_gaussian_nb(data, TrainConfig{});
  EXPECT_DOUBLE_EQ(nb.class_priors[0], 0.5);
  EXPECT_DOUBLE_EQ(nb.class_priors[1], 0.5);
}

TEST(GaussianNBTest, ConstantFeatureUsesFloor) {
  const auto data = make_training_set(Matrix::from_rows({{1.0, 0.0}, {1.0, 1.0}, {1.0, 4.0}, {1.0, 5.0}}), {0, 0, 1, 1}, 2);
  TrainConfig cfg;
  const auto nb = train_gaussian_nb(data, cfg);
  const double max_var = 4.25;  // variance of {0,1,4,5}
  EXPECT_DOUBLE_EQ(nb.variances(0, 0), cfg.nb_var_smoothing * max_var);
  EXPECT_DOUBLE_EQ(nb.variances(1, 0), cfg.nb_var_smoothing * max_var);
  const auto p = predict_proba(nb, data.x);
  EXPECT_TRUE(p.all_finite());
}

TEST(GaussianNBTest, LogSpaceStaysFiniteOnExtremeInputs) {
  const auto nb = train_gaussian_nb(random_dataset(50, 3, 3, 9), TrainConfig{});
  const auto p = predict_proba(nb, Matrix::from_rows({{1e6, -1e6, 1e6}, {-1e6, -1e6, -1e6}, {0.5, 0.5, 0.5}}));
  EXPECT_TRUE(p.all_finite());
  EXPECT_NO_THROW(testing::expect_simplex_rows(p, 1e-9));
}

TEST(GaussianNBTest, EmptyClassRejected) {
  const auto data = make_training_set(Matrix::from_rows({{0.0}, {1.0}}), {0, 1}, 3);
  try {
    train_gaussian_nb(data, TrainConfig{});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_class);
  }
}

// ---------------------------------------------------------------------------
// Random forest

struct BestSplit {
  double weighted_gini = 0.0;
};

double gini(const std::vector<std::size_t>& labels, std::size_t k) {
  if (labels.empty()) return 0.0;
  double s = 1.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double p = static_cast<double>(std::count(labels.begin(), labels.end(), c)) / static_cast<double>(labels.size());
    s -= p * p;
  }
  return s;
}

// Exhaustive oracle: try every feature and every midpoint between distinct
// sorted values, return the smallest size-weighted child Gini.
double brute_force_root_gini(const TrainingSet& data) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < data.dim(); ++f) {
    std::vector<double> values;
    for (std::size_t i = 0; i < data.size(); ++i) values.push_back(data.x(i, f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t v = 0; v + 1 < values.size(); ++v) {
      const double t = 0.5 * (values[v] + values[v + 1]);
      std::vector<std::size_t> left, right;
      for (std::size_t i = 0; i < data.size(); ++i) (data.x(i, f) <= t ? left : right).push_back(data.y[i]);
      const double w = (static_cast<double>(left.size()) * gini(left, data.n_classes) +
                        static_cast<double>(right.size()) * gini(right, data.n_classes)) /
                       static_cast<double>(data.size());
      best = std::min(best, w);
    }
  }
  return best;
}

TEST(RandomForestTest, SingleUnbootstrappedTreeFitsTrainingSet) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = random_dataset(20, 3, 3, 200 + seed);
    TrainConfig cfg;
    cfg.seed = Seed{seed};
    cfg.rf_trees = 1;
    cfg.rf_bootstrap = false;
    cfg.rf_max_features = MaxFeatures::all;
    const auto forest = train_random_forest(data, cfg);
    EXPECT_EQ(accuracy(predict(forest, data.x), data.y), 1.0);

    const auto& root = forest.trees[0].nodes[0];
    ASSERT_GE(root.feature, 0);
    std::vector<std::size_t> left, right;
    for (std::size_t i = 0; i < data.size(); ++i) {
      (data.x(i, static_cast<std::size_t>(root.feature)) <= root.threshold ? left : right).push_back(data.y[i]);
    }
    const double root_gini = (static_cast<double>(left.size()) * gini(left, 3) +
                              static_cast<double>(right.size()) * gini(right, 3)) / 20.0;
    EXPECT_NEAR(root_gini, brute_force_root_gini(data), 1e-12);
  }
}

TEST(RandomForestTest, PureInputRejected) {
  const auto data = make_training_set(Matrix::from_rows({{0.0}, {1.0}}), {0, 0}, 2);
  EXPECT_THROW(train_random_forest(data, TrainConfig{}), ValidationError);
  EXPECT_THROW(train_random_forest(make_training_set(Matrix(0, 1), {}, 2), TrainConfig{}), ValidationError);
}

TEST(RandomForestTest, SeedDeterminesForest) {
  const auto data = random_dataset(80, 4, 2, 33);
  TrainConfig cfg;
  cfg.rf_trees = 10;
  cfg.seed = Seed{1};
  const auto a = train_random_forest(data, cfg);
  const auto b = train_random_forest(data, cfg);
  cfg.seed = Seed{2};
  const auto c = train_random_forest(data, cfg);
  const auto pa = predict_proba(a, data.x);
  EXPECT_EQ(pa, predict_proba(b, data.x));
  EXPECT_NE(pa, predict_proba(c, data.x));
  EXPECT_EQ(a.tree_seeds, b.tree_seeds);
  EXPECT_EQ(a.trees.size(), 10u);
}

TEST(RandomForestTest, AgreeingPureLeavesGiveCertainty) {
  const auto data = blobs({{0.0, 0.0}, {10.0, 10.0}}, 30, 1.0, 4);
  TrainConfig cfg;
  cfg.rf_trees = 25;
  const auto forest = train_random_forest(data, cfg);
  const auto p = predict_proba(forest, Matrix::from_rows({{0.0, 0.0}, {10.0, 10.0}}));
  EXPECT_EQ(p(0, 0), 1.0);
  EXPECT_EQ(p(1, 1), 1.0);
}

TEST(RandomForestTest, LeavesAreNonEmpty) {
  const auto forest = train_random_forest(random_dataset(60, 3, 3, 8), TrainConfig{});
  for (const auto& tree : forest.trees) {
    for (const auto& node : tree.nodes) {
      if (node.feature >= 0) continue;
      std::size_t total = 0;
      for (auto c : node.histogram) total += c;
      EXPECT_GT(total, 0u);
    }
  }
}

// ---------------------------------------------------------------------------
// Linear SVM

// Perceptron oracle: converges (zero mistakes in an epoch) iff separable.
bool perceptron_separable(const TrainingSet& data, std::size_t max_epochs = 1000) {
  std::vector<double> w(data.dim() + 1, 0.0);
  for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
    std::size_t mistakes = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double label = data.y[i] == 1 ? 1.0 : -1.0;
      double s = w.back();
      for (std::size_t j = 0; j < data.dim(); ++j) s += w[j] * data.x(i, j);
      if (label * s <= 0.0) {
        ++mistakes;
        for (std::size_t j = 0; j < data.dim(); ++j) w[j] += label * data.x(i, j);
        w.back() += label;
      }
    }
    if (mistakes == 0) return true;
  }
  return false;
}

TEST(LinearSvmTest, SeparableBlobsFitPerfectly) {
  const auto data = blobs({{-2.0, -1.0}, {2.0, 1.5}}, 50, 1.0, 12);
  ASSERT_TRUE(perceptron_separable(data));
  const auto svm = train_linear_svm(data, TrainConfig{});
  EXPECT_EQ(accuracy(predict(svm, data.x), data.y), 1.0);
}

TEST(LinearSvmTest, RescaledFeaturesStillSeparatedAfterRetrain) {
  auto data = blobs({{-2.0, -1.0}, {2.0, 1.5}}, 50, 1.0, 13);
  for (double& v : data.x.data()) v *= 2.0;
  ASSERT_TRUE(perceptron_separable(data));
  const auto svm = train_linear_svm(data, TrainConfig{});
  EXPECT_EQ(accuracy(predict(svm, data.x), data.y), 1.0);
}

TEST(LinearSvmTest, SingleClassRejected) {
  EXPECT_THROW(train_linear_svm(make_training_set(Matrix::from_rows({{0.0}, {1.0}}), {0, 0}, 2), TrainConfig{}),
               ValidationError);
}

TEST(LinearSvmTest, MulticlassUsesHighestMargin) {
  const auto data = blobs({{0.0, 0.0}, {8.0, 0.0}, {0.0, 8.0}}, 40, 1.0, 14);
  const auto svm = train_linear_svm(data, TrainConfig{});
  EXPECT_EQ(svm.machines.size(), 3u);
  EXPECT_EQ(accuracy(predict(svm, data.x), data.y), 1.0);
}

TEST(LinearSvmTest, PlattMapIsIncreasingInMargin) {
  const auto data = blobs({{-1.0}, {1.0}}, 60, 1.5, 15);
  const auto svm = train_linear_svm(data, TrainConfig{});
  const auto& platt = svm.machines[0].platt;
  EXPECT_LT(platt.a, 0.0);
  EXPECT_LT(platt(-1.0), platt(0.0));
  EXPECT_LT(platt(0.0), platt(1.0));
}

TEST(LinearSvmTest, SeededShuffleIsDeterministic) {
  const auto data = random_dataset(100, 3, 2, 16);
  TrainConfig cfg;
  cfg.seed = Seed{5};
  const auto a = train_linear_svm(data, cfg);
  const auto b = train_linear_svm(data, cfg);
  EXPECT_EQ(a.machines[0].weights, b.machines[0].weights);
  EXPECT_EQ(a.machines[0].bias, b.machines[0].bias);
}

// ---------------------------------------------------------------------------
// Shared contracts

TEST(LearnerContractTest, EveryLearnerEmitsSimplexRows) {
  for (std::size_t k : {2u, 3u, 6u}) {
    const auto data = random_dataset(90, 5, k, 300 + k);
    Rng rng(Seed{k});
    Matrix probe(40, 5);
    for (double& v : probe.data()) v = rng.uniform(-2.0, 3.0);
    TrainConfig cfg;
    cfg.rf_trees = 15;
    EXPECT_NO_THROW(testing::expect_simplex_rows(predict_proba(train_logreg(data, cfg), probe), 1e-9));
    EXPECT_NO_THROW(testing::expect_simplex_rows(predict_proba(train_gaussian_nb(data, cfg), probe), 1e-9));
    EXPECT_NO_THROW(testing::expect_simplex_rows(predict_proba(train_random_forest(data, cfg), probe), 1e-9));
    EXPECT_NO_THROW(testing::expect_simplex_rows(predict_proba(train_linear_svm(data, cfg), probe), 1e-9));
  }
}

TEST(TrainConfigTest, RejectsNonPositiveSettings) {
  TrainConfig cfg;
  cfg.svm_c = 0.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.lr_l2 = -1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.rf_trees = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

}  // namespace
}  // namespace stackfuse
