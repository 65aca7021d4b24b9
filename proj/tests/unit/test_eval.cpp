#include <gtest/gtest.h>

#include <cmath>

#include "gcn/eval.hpp"
#include "support/oracles.hpp"

namespace {

TEST(Perplexity, UniformModelEqualsVocabularySize) {
  gcn::Vocabulary v({U'a', U'b', U'c'});
  auto m = gcn::ModelParameters<double>::zeros({6, 2, 3, 2});
  EXPECT_NEAR(gcn::review_perplexity(m, v, {0.3, 1}, "abcab"), 6.0, 1e-9);
  EXPECT_THROW(gcn::review_perplexity(m, v, {0, 0}, ""), gcn::ArgumentError);
}

TEST(Perplexity, DeterministicModelIsOne) {
  // One cell: STR drives it positive, 'a' negative. Positive predicts 'a',
  // negative predicts EOS, so "a" is generated with probability one.
  gcn::Vocabulary v({U'a'});
  auto m = gcn::ModelParameters<double>::zeros({4, 0, 1, 1});
  auto& w = m.layers[0];
  w.input(0, gcn::Vocabulary::kStr) = 10;
  w.input(0, 3) = -10;
  w.bias(1) = 10;
  w.bias(2) = -10;
  w.bias(3) = 10;
  m.output.weight(3, 0) = 1000;
  m.output.weight(gcn::Vocabulary::kEos, 0) = -1000;
  EXPECT_NEAR(gcn::review_perplexity(m, v, {}, "a"), 1.0, 1e-12);
  EXPECT_GT(gcn::review_perplexity(m, v, {}, "aa"), 1e6);
}

TEST(Perplexity, SummaryMeanAndLowerMedian) {
  auto s = gcn::summarize_perplexities({2, 4, 100});
  EXPECT_NEAR(s.mean, 35.333333333, 1e-8);
  EXPECT_EQ(s.median, 4);
  EXPECT_EQ(gcn::lower_median({1, 2, 3, 4}), 2);
  EXPECT_THROW(gcn::summarize_perplexities({}), gcn::EmptyCollectionError);
}

TEST(Perplexity, SummaryOverIdenticalReviews) {
  std::vector<gcn::ReviewRecord> recs(3, oracle::review("u", "i", 3, "c", "abab"));
  auto c = gcn::ReviewCollection::from_records(recs);
  auto v = gcn::build_vocabulary(c);
  auto m = gcn::random_parameters<double>({v.size(), 0, 4, 1}, 1, 0.3);
  auto s = gcn::perplexity_summary(m, v, c, gcn::AuxSchema{});
  EXPECT_DOUBLE_EQ(s.mean, s.median);
  EXPECT_DOUBLE_EQ(s.per_review[0], gcn::review_perplexity(m, v, {}, "abab"));
}

TEST(AccuracyConfusion, HandCount) {
  auto all = gcn::accuracy_confusion({0, 1, 2}, {0, 1, 2}, 3);
  EXPECT_EQ(all.accuracy, 1.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(all.confusion[i][j], i == j ? 1u : 0u);
  auto r = gcn::accuracy_confusion({0, 2, 2}, {0, 1, 2}, 3);
  EXPECT_NEAR(r.accuracy, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(r.confusion[1][2], 1u);
  EXPECT_EQ(r.confusion[1][1], 0u);
  EXPECT_THROW(gcn::accuracy_confusion({0}, {0, 1}, 2), gcn::ArgumentError);
}

TEST(BinaryAuc, Examples) {
  EXPECT_DOUBLE_EQ(gcn::binary_auc({3, 2, 1, 0}, {1, 0, 1, 0}), 0.75);
  EXPECT_DOUBLE_EQ(gcn::binary_auc({0.9, 0.8, 0.1}, {1, 1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(gcn::binary_auc({0.1, 0.2, 0.9}, {1, 1, 0}), 0.0);
  EXPECT_DOUBLE_EQ(gcn::binary_auc({1, 1, 1, 1}, {1, 0, 1, 0}), 0.5);
  EXPECT_THROW(gcn::binary_auc({1, 2}, {1, 1}), gcn::UndefinedMetricError);
}

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& l) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (l[i] && !l[j]) {
        den += 1;
        num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return num / den;
}

TEST(BinaryAuc, MatchesPairwiseAndMonotoneInvariant) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> d(0, 6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s, t;
    std::vector<int> l;
    for (int i = 0; i < 15; ++i) {
      s.push_back(d(rng));
      t.push_back(std::exp(s.back()) * 3 - 1);
      l.push_back(i % 3 == 0);
    }
    EXPECT_NEAR(gcn::binary_auc(s, l), pairwise_auc(s, l), 1e-12);
    EXPECT_NEAR(gcn::binary_auc(s, l), gcn::binary_auc(t, l), 1e-12);
  }
}

TEST(RecallAtFraction, TopTenPercentOfTen) {
  std::vector<double> first{9, 1, 2, 3, 4, 5, 6, 7, 8, 0};
  EXPECT_EQ(gcn::recall_at_fraction({first}, {0}, 0.1), 1.0);
  EXPECT_EQ(gcn::recall_at_fraction({first}, {8}, 0.1), 0.0);
  EXPECT_EQ(gcn::recall_at_fraction({first}, {8}, 0.2), 1.0);
}

TEST(MulticlassAuc, Examples) {
  std::vector<std::vector<double>> onehot{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}};
  EXPECT_DOUBLE_EQ(gcn::multiclass_auc(onehot, {0, 1, 2, 0}).auc, 1.0);
  std::vector<std::vector<double>> same(4, std::vector<double>(3, 0.2));
  EXPECT_DOUBLE_EQ(gcn::multiclass_auc(same, {0, 1, 2, 0}).auc, 0.5);
  auto skipped = gcn::multiclass_auc(same, {0, 1, 0, 1});
  EXPECT_EQ(skipped.skipped_classes, 1u);

  std::vector<std::vector<double>> s{{0.6, 0.3, 0.1}, {0.2, 0.5, 0.3}, {0.5, 0.1, 0.4}, {0.1, 0.7, 0.2}};
  const std::vector<int> truth{0, 2, 2, 1};
  double expected = 0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> col;
    std::vector<int> lab;
    for (std::size_t i = 0; i < s.size(); ++i) {
      col.push_back(s[i][c]);
      lab.push_back(truth[i] == c);
    }
    expected += pairwise_auc(col, lab) / 3;
  }
  EXPECT_NEAR(gcn::multiclass_auc(s, truth).auc, expected, 1e-12);
}

TEST(MetricsReport, TextAndJson) {
  gcn::MetricsReport r;
  r.task = "category";
  r.cases = 3;
  r.accuracy = 2.0 / 3.0;
  r.labels = {"x", "y"};
  r.confusion = {{1, 0}, {1, 1}};
  const auto text = r.to_text();
  EXPECT_NE(text.find("accuracy=0.6666666666666666"), std::string::npos);
  EXPECT_NE(text.find("y\t1\t1"), std::string::npos);
  EXPECT_EQ(r.to_json()["confusion"][1][0], 1);
  EXPECT_EQ(gcn::format_fixed(0.5, 3), "0.500");
}

}  // namespace
