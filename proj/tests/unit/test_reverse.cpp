#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "gcn/reverse.hpp"
#include "support/oracles.hpp"

namespace {

using gcn::AuxVector;
using gcn::ModelParameters;
using gcn::Vocabulary;

ModelParameters<double> with_aux(int aux_dim, std::uint64_t seed, double scale = 0.7) {
  return gcn::random_parameters<double>({4, aux_dim, 2, 1}, seed, scale);
}

ModelParameters<double> zero_aux_columns(ModelParameters<double> p) {
  const int V = p.config.vocab_size;
  p.layers[0].input.rightCols(p.layers[0].input.cols() - V).setZero();
  return p;
}

TEST(SequenceLoglik, UniformModelAnalytic) {
  Vocabulary v({U'a'});
  auto m = ModelParameters<double>::zeros({4, 0, 3, 1});
  // "aaa" encodes to 3 characters plus EOS: four scored targets.
  EXPECT_NEAR(gcn::sequence_loglik(m, v, {}, "aaa"), 4 * std::log(0.25), 1e-12);
  EXPECT_NEAR(gcn::sequence_loglik(m, v, {}, "aaa"), -5.545177, 1e-6);
}

TEST(SequenceLoglik, MatchesChainRuleOracle) {
  Vocabulary v({U'a'});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto m = with_aux(2, seed, 1.0);
    const AuxVector aux{0.3, -0.9};
    for (const std::string text : {"a", "aa", "a?a", "??a?"}) {
      const auto seq = gcn::encode_text(text, v);
      EXPECT_NEAR(gcn::sequence_loglik(m, v, aux, text), oracle::chain_rule_loglik(m, seq, aux), 1e-9);
    }
  }
}

TEST(SequenceLoglik, NegatesSequenceNll) {
  Vocabulary v({U'a', U'b'});
  auto m = gcn::random_parameters<double>({5, 1, 4, 2}, 3, 0.5);
  const auto [inputs, targets] = gcn::teacher_forcing<double>(gcn::encode_with_aux("abba", {0.4}, v));
  auto init = gcn::zero_states<double>(m.config, 1);
  auto fwd = gcn::stack_forward<double>(m, inputs, init);
  EXPECT_NEAR(gcn::sequence_loglik(m, v, {0.4}, "abba") + gcn::sequence_nll<double>(fwd.logits, targets), 0.0, 1e-9);
}

TEST(SequenceLoglik, TerminatedSequencesFormSubDistribution) {
  // Over non-EOS symbols {STR, UNK, a}: terminated sequences of length <= 4
  // plus the mass of all unterminated length-5 prefixes sum to exactly one.
  auto m = with_aux(1, 4, 1.5);
  const AuxVector aux{0.5};
  const int symbols[] = {0, 2, 3};
  auto prob = [&](std::vector<int> idx) {
    gcn::EncodedSequence s;
    s.indices = std::move(idx);
    s.aux.assign(s.indices.size(), aux);
    double total = 0;
    for (double lp : gcn::position_log_probs(m, s)) total += lp;
    return std::exp(total);
  };
  double terminated = 0, open = 0;
  std::function<void(std::vector<int>)> walk = [&](std::vector<int> prefix) {
    if (prefix.size() == 6) {
      open += prob(prefix);
      return;
    }
    auto done = prefix;
    done.push_back(gcn::Vocabulary::kEos);
    terminated += prob(done);
    for (int s : symbols) {
      auto next = prefix;
      next.push_back(s);
      walk(next);
    }
  };
  walk({gcn::Vocabulary::kStr});
  EXPECT_LE(terminated, 1.0 + 1e-9);
  EXPECT_NEAR(terminated + open, 1.0, 1e-9);
}

TEST(Classify, TiesGoToFirstCandidateAndPosteriorsEqualPriors) {
  Vocabulary v({U'a'});
  auto m = zero_aux_columns(with_aux(3, 1));
  gcn::ClassificationRequest req{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {0.2, 0.5, 0.3}, "aa"};
  auto r = gcn::classify(req, m, v);
  EXPECT_EQ(r.log_likelihoods[0], r.log_likelihoods[1]);
  EXPECT_EQ(r.log_likelihoods[1], r.log_likelihoods[2]);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(std::exp(r.log_posteriors[c]), req.priors[c], 1e-12);
  req.priors.clear();
  EXPECT_EQ(gcn::classify(req, m, v).argmax_index, 0u);
}

TEST(Classify, ArgmaxInvariantUnderUniformPriorScale) {
  Vocabulary v({U'a'});
  auto m = with_aux(2, 8, 1.5);
  gcn::ClassificationRequest req{{{1, 0}, {0, 1}, {0.5, 0.5}}, {}, "a?aa"};
  auto uniform = gcn::classify(req, m, v);
  req.priors = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  auto explicit_uniform = gcn::classify(req, m, v);
  EXPECT_EQ(uniform.argmax_index, explicit_uniform.argmax_index);
  EXPECT_EQ(uniform.argmax_index, gcn::detail::first_argmax(uniform.log_likelihoods));
  req.priors = {0.5, 0.6, -0.1};
  EXPECT_THROW(gcn::classify(req, m, v), gcn::ArgumentError);
  req.priors = {0.5, 0.5};
  EXPECT_THROW(gcn::classify(req, m, v), gcn::ArgumentError);
}

TEST(Trace, RowsAreDistributionsAndEndAtClassifyPosteriors) {
  Vocabulary v({U'a'});
  auto m = with_aux(2, 3, 1.5);
  gcn::ClassificationRequest req{{{1, 0}, {0, 1}}, {0.3, 0.7}, "aa?a"};
  auto tm = gcn::prefix_posterior_trace(req, m, v);
  ASSERT_EQ(tm.rows.size(), 5u);
  EXPECT_EQ(tm.rows[0], req.priors);
  for (const auto& row : tm.rows) EXPECT_NEAR(row[0] + row[1], 1.0, 1e-9);
  auto r = gcn::classify(req, m, v);
  for (int c = 0; c < 2; ++c) EXPECT_NEAR(tm.rows.back()[c], std::exp(r.log_posteriors[c]), 1e-12);

  auto flat = gcn::prefix_posterior_trace(req, zero_aux_columns(m), v);
  for (const auto& row : flat.rows) {
    EXPECT_NEAR(row[0], 0.3, 1e-12);
    EXPECT_NEAR(row[1], 0.7, 1e-12);
  }
}

TEST(Trace, PrefixRowsScoreWithoutEos) {
  Vocabulary v({U'a'});
  auto m = with_aux(1, 6, 1.5);
  gcn::ClassificationRequest req{{{-1}, {1}}, {}, "aaa"};
  auto tm = gcn::prefix_posterior_trace(req, m, v);
  // Row 2 is the posterior after "aa": sum of the first two character terms only.
  auto partial = [&](const AuxVector& aux) {
    auto lps = gcn::position_log_probs(m, gcn::encode_with_aux("aaa", aux, v));
    return lps[0] + lps[1];
  };
  const double a = partial({-1}), b = partial({1});
  EXPECT_NEAR(tm.rows[2][0], 1 / (1 + std::exp(b - a)), 1e-12);
}

gcn::AuxSchema rating_schema() { return gcn::AuxSchema({gcn::AuxSlot{}}); }

TEST(RatingGrid, DegenerateCases) {
  Vocabulary v({U'a'});
  auto m = with_aux(1, 2);
  EXPECT_EQ(gcn::rating_grid_argmax_trace(m, v, rating_schema(), {3.0}, "aaa"), (std::vector<double>(4, 3.0)));
  const auto flat = zero_aux_columns(m);
  const auto grid = gcn::default_rating_grid();
  ASSERT_EQ(grid.size(), 51u);
  EXPECT_EQ(gcn::rating_grid_argmax_trace(flat, v, rating_schema(), grid, "aa"), (std::vector<double>(3, 0.0)));
  const auto curve = gcn::rating_likelihood_curve(flat, v, rating_schema(), grid, "aa");
  for (double c : curve) EXPECT_EQ(c, curve[0]);
  EXPECT_THROW(gcn::rating_grid_argmax_trace(m, v, rating_schema(), {}, "a"), gcn::ArgumentError);
  EXPECT_THROW(gcn::rating_grid_argmax_trace(m, v, gcn::AuxSchema{}, {1.0}, "a"), gcn::ArgumentError);
}

TEST(RatingGrid, CurveMatchesSequenceLoglik) {
  Vocabulary v({U'a'});
  auto m = with_aux(1, 5, 1.0);
  const std::vector<double> grid{0.0, 1.5, 5.0, 10.0};
  auto curve = gcn::rating_likelihood_curve(m, v, rating_schema(), grid, "a?a");
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_EQ(curve[i], gcn::sequence_loglik(m, v, {gcn::scale_rating(grid[i])}, "a?a"));
}

TEST(Sentiment, ScoreUsesBandMaxima) {
  const std::vector<double> grid{1.0, 2.0, 3.0, 4.0, 5.0};
  EXPECT_DOUBLE_EQ(gcn::sentiment_score(grid, {-5, -4, 0, -2, -1}), 3.0);
  EXPECT_THROW(gcn::sentiment_score({1.0, 2.0}, {0, 0}), gcn::ArgumentError);
}

}  // namespace
