#include <gtest/gtest.h>

#include <cmath>

#include "afgn/metrics.hpp"
#include "afgn/rng.hpp"
#include "oracles.hpp"

using afgn::ScoredSet;

namespace {

ScoredSet make(std::vector<double> scores, std::vector<int> labels) {
  return {std::move(scores), std::move(labels)};
}

ScoredSet random_set(size_t n, afgn::Rng& rng, bool with_ties) {
  ScoredSet set;
  for (size_t i = 0; i < n; ++i) {
    double s = with_ties ? std::floor(rng.uniform() * 8) / 8.0 : rng.uniform();
    set.add(s, rng.uniform() < 0.5 ? 1 : 0);
  }
  return set;
}

}  // namespace

TEST(Accuracy, Examples) {
  EXPECT_DOUBLE_EQ(accuracy(make({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0})), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(make({0.1, 0.2, 0.9, 0.8}, {1, 1, 0, 0})), 0.0);
  EXPECT_DOUBLE_EQ(accuracy(make({0.9, 0.2}, {1, 0})), 1.0);
  EXPECT_THROW(accuracy(ScoredSet{}), afgn::ValueError);
}

TEST(Accuracy, ThresholdIsInclusive) {
  EXPECT_DOUBLE_EQ(accuracy(make({0.5}, {1})), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(make({0.5}, {0})), 0.0);
}

TEST(AveragePrecision, Examples) {
  // every positive above every negative
  EXPECT_DOUBLE_EQ(average_precision(make({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})),
                   1.0);
  // ranks: 0.9 (pos, prec 1/1), 0.7 (neg), 0.6 (pos, prec 2/3)
  EXPECT_NEAR(average_precision(make({0.9, 0.7, 0.6}, {1, 0, 1})),
              (1.0 + 2.0 / 3.0) / 2.0, 1e-12);
  // single positive ranked last of three
  EXPECT_NEAR(average_precision(make({0.9, 0.7, 0.6}, {0, 0, 1})), 1.0 / 3.0,
              1e-12);
  EXPECT_THROW(average_precision(make({0.5, 0.4}, {0, 0})), afgn::ValueError);
}

TEST(AveragePrecision, ExhaustiveAgainstStepAreaOracle) {
  // all label patterns with >= 1 positive for every n <= 8, against three
  // kinds of score vectors
  afgn::Rng rng(211);
  for (size_t n = 1; n <= 8; ++n) {
    std::vector<double> distinct(n), ties(n), rand_scores(n);
    for (size_t i = 0; i < n; ++i) {
      distinct[i] = 1.0 - 0.1 * static_cast<double>(i);
      ties[i] = (i % 3 == 0) ? 0.5 : (i % 3 == 1 ? 0.25 : 0.75);
      rand_scores[i] = rng.uniform();
    }
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
      std::vector<int> labels(n);
      for (size_t i = 0; i < n; ++i) labels[i] = (mask >> i) & 1;
      for (const auto& scores : {distinct, ties, rand_scores}) {
        double got = average_precision(make(scores, labels));
        double want = oracle::ap_step_area(scores, labels);
        ASSERT_NEAR(got, want, 1e-12)
            << "n=" << n << " mask=" << mask;
      }
    }
  }
}

TEST(Auroc, Examples) {
  EXPECT_DOUBLE_EQ(auroc(make({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})), 1.0);
  // pos {0.35, 0.8} vs neg {0.1, 0.4}: 3 of 4 pairs ordered correctly
  EXPECT_DOUBLE_EQ(auroc(make({0.35, 0.8, 0.1, 0.4}, {1, 1, 0, 0})), 0.75);
  // all ties
  EXPECT_DOUBLE_EQ(auroc(make({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0})), 0.5);
  EXPECT_THROW(auroc(make({0.5, 0.4}, {1, 1})), afgn::ValueError);
  EXPECT_THROW(auroc(make({0.5, 0.4}, {0, 0})), afgn::ValueError);
}

TEST(Auroc, RankSumMatchesPairwiseBruteForce) {
  afgn::Rng rng(223);
  for (int trial = 0; trial < 200; ++trial) {
    size_t n = 2 + rng.uniform_index(49);
    bool ties = trial % 2 == 0;
    ScoredSet set = random_set(n, rng, ties);
    if (set.positives() == 0 || set.positives() == set.size()) continue;
    double got = auroc(set);
    double want = oracle::auroc_pairwise(set.scores, set.labels);
    ASSERT_NEAR(got, want, 1e-9) << "trial " << trial;
  }
}

TEST(Auroc, InvariantUnderStrictlyIncreasingTransform) {
  afgn::Rng rng(227);
  for (int trial = 0; trial < 50; ++trial) {
    ScoredSet set = random_set(20, rng, trial % 2 == 0);
    if (set.positives() == 0 || set.positives() == set.size()) continue;
    ScoredSet warped = set;
    for (double& s : warped.scores) s = std::exp(3.0 * s) + s * s * s;
    ASSERT_NEAR(auroc(set), auroc(warped), 1e-12);
  }
}

TEST(Auroc, LabelReversalFlipsScore) {
  afgn::Rng rng(229);
  for (int trial = 0; trial < 50; ++trial) {
    ScoredSet set = random_set(16, rng, true);
    if (set.positives() == 0 || set.positives() == set.size()) continue;
    ScoredSet rev = set;
    for (int& l : rev.labels) l = 1 - l;
    ASSERT_NEAR(auroc(set) + auroc(rev), 1.0, 1e-12);
  }
}

TEST(Metrics, RangesOnRandomSets) {
  afgn::Rng rng(233);
  for (int trial = 0; trial < 100; ++trial) {
    ScoredSet set = random_set(12, rng, trial % 3 == 0);
    if (set.positives() == 0) continue;
    double ap = average_precision(set);
    ASSERT_GE(ap, 0.0);
    ASSERT_LE(ap, 1.0);
    if (set.positives() < set.size()) {
      double roc = auroc(set);
      ASSERT_GE(roc, 0.0);
      ASSERT_LE(roc, 1.0);
    }
  }
}

TEST(Report, CsvSchema) {
  std::string path = ::testing::TempDir() + "/afgn_report_test.csv";
  afgn::write_report_csv(path, {{"fp-high", 10, 0.9, 0.95, 0.97},
                                {"mean", 10, 0.9, 0.95, 0.97}});
  std::ifstream in(path);
  ASSERT_TRUE(in.good());
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  EXPECT_EQ(header, "source_tag,n,accuracy,average_precision,auroc");
  EXPECT_EQ(row1, "fp-high,10,0.900000,0.950000,0.970000");
  EXPECT_EQ(row2.substr(0, 5), "mean,");
}
