#include <gtest/gtest.h>

#include "stackfuse/metrics.hpp"
#include "test_support.hpp"

namespace stackfuse {
namespace {

using Labels = std::vector<std::size_t>;

TEST(ConfusionTest, PerfectPrediction) {
  const auto cm = confusion(Labels{0, 1}, Labels{0, 1}, 2);
  EXPECT_EQ(cm(0, 0), 1u);
  EXPECT_EQ(cm(1, 1), 1u);
  EXPECT_EQ(cm(0, 1), 0u);
  EXPECT_EQ(cm(1, 0), 0u);
}

TEST(ConfusionTest, AllWrong) {
  const auto cm = confusion(Labels{0, 0}, Labels{1, 1}, 2);
  EXPECT_EQ(cm(0, 1), 2u);
  EXPECT_EQ(cm.total(), 2u);
}

// Quadratic pair-counting oracle: for every (t, p) cell, count matching positions.
TEST(ConfusionTest, MatchesPairCountingOracle) {
  Rng rng(Seed{50});
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + rng.below(5);
    Labels truth(50), pred(50);
    for (std::size_t i = 0; i < 50; ++i) {
      truth[i] = rng.below(k);
      pred[i] = rng.below(k);
    }
    const auto cm = confusion(truth, pred, k);
    for (std::size_t t = 0; t < k; ++t) {
      for (std::size_t p = 0; p < k; ++p) {
        std::size_t count = 0;
        for (std::size_t i = 0; i < 50; ++i) count += truth[i] == t && pred[i] == p;
        EXPECT_EQ(cm(t, p), count);
      }
    }
  }
}

TEST(ConfusionTest, RejectsBadInput) {
  EXPECT_THROW(confusion(Labels{0, 1}, Labels{0}, 2), ValidationError);
  EXPECT_THROW(confusion(Labels{0, 2}, Labels{0, 1}, 2), ValidationError);
  EXPECT_THROW(confusion(Labels{}, Labels{}, 2), ValidationError);
}

TEST(EvaluateTest, PerfectPredictionsScoreOne) {
  for (std::size_t k : {2u, 6u}) {
    Labels y;
    for (std::size_t i = 0; i < 3 * k; ++i) y.push_back(i % k);
    const auto r = evaluate(y, y, k);
    EXPECT_EQ(r.acc, 1.0);
    EXPECT_EQ(r.f_macro, 1.0);
    EXPECT_EQ(r.prec, 1.0);
    EXPECT_EQ(r.rec, 1.0);
  }
}

// Hand-computed: A has P=R=1/2; B has P=2/3, R=1; C has P=1, R=1/2.
TEST(EvaluateTest, ThreeClassWorkedExample) {
  const Labels truth{0, 0, 1, 1, 2, 2};
  const Labels pred{0, 1, 1, 1, 2, 0};
  const auto r = evaluate(truth, pred, 3);
  EXPECT_NEAR(r.per_class[0].f1, 0.5, 1e-15);
  EXPECT_NEAR(r.per_class[1].f1, 0.8, 1e-15);
  EXPECT_NEAR(r.per_class[2].f1, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.f_macro, (0.5 + 0.8 + 2.0 / 3.0) / 3.0, 1e-15);
  EXPECT_NEAR(r.f_macro, 0.6556, 5e-5);
  EXPECT_NEAR(r.acc, 4.0 / 6.0, 1e-15);
  EXPECT_NEAR(r.prec, (0.5 + 2.0 / 3.0 + 1.0) / 3.0, 1e-15);
  EXPECT_NEAR(r.rec, (0.5 + 1.0 + 0.5) / 3.0, 1e-15);
}

TEST(EvaluateTest, AbsentClassCountsAsZeroInMacroMean) {
  const Labels truth{0, 1, 0, 1};
  const auto r = evaluate(truth, truth, 3);
  EXPECT_EQ(r.per_class[2].precision, 0.0);
  EXPECT_EQ(r.per_class[2].recall, 0.0);
  EXPECT_EQ(r.per_class[2].f1, 0.0);
  EXPECT_NEAR(r.f_macro, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(r.acc, 1.0);
}

TEST(EvaluateTest, MacroF1InvariantUnderClassRelabeling) {
  Rng rng(Seed{60});
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 6;
    Labels truth(80), pred(80);
    for (std::size_t i = 0; i < 80; ++i) {
      truth[i] = rng.below(k);
      pred[i] = rng.bernoulli(0.6) ? truth[i] : rng.below(k);
    }
    std::vector<std::size_t> perm{0, 1, 2, 3, 4, 5};
    rng.shuffle(perm);
    Labels t2(80), p2(80);
    for (std::size_t i = 0; i < 80; ++i) {
      t2[i] = perm[truth[i]];
      p2[i] = perm[pred[i]];
    }
    EXPECT_NEAR(evaluate(truth, pred, k).f_macro, evaluate(t2, p2, k).f_macro, 1e-12);
  }
}

TEST(EvaluateTest, AccuracyIsCountWeightedRecall) {
  Rng rng(Seed{61});
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 2 + rng.below(5);
    Labels truth(100), pred(100);
    for (std::size_t i = 0; i < 100; ++i) {
      truth[i] = rng.below(k);
      pred[i] = rng.below(k);
    }
    const auto r = evaluate(truth, pred, k);
    double weighted = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const auto support = static_cast<double>(std::count(truth.begin(), truth.end(), c));
      weighted += support * r.per_class[c].recall;
    }
    EXPECT_NEAR(r.acc, weighted / 100.0, 1e-12);
  }
}

TEST(EvaluateTest, RepeatedEvaluationIsBitIdentical) {
  const Labels truth{0, 1, 2, 1, 0, 2, 2};
  const Labels pred{0, 2, 2, 1, 1, 2, 0};
  const auto a = evaluate(truth, pred, 3);
  const auto b = evaluate(truth, pred, 3);
  EXPECT_EQ(a.f_macro, b.f_macro);
  EXPECT_EQ(a.confusion, b.confusion);
}

TEST(Format3Test, ThreeDecimals) {
  EXPECT_EQ(format3(0.7333), "0.733");
  EXPECT_EQ(format3(1.0), "1.000");
}

}  // namespace
}  // namespace stackfuse
