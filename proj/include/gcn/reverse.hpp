#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gcn/aux.hpp"
#include "gcn/encoding.hpp"
#include "gcn/error.hpp"
#include "gcn/lstm.hpp"
#include "gcn/parallel.hpp"
#include "gcn/scoring.hpp"
#include "gcn/vocabulary.hpp"

namespace gcn {

struct ClassificationRequest {
  std::vector<AuxVector> candidates;
  std::vector<double> priors;  // empty means uniform
  std::string text;
};

struct ClassificationResult {
  std::vector<double> log_likelihoods;
  std::vector<double> log_posteriors;
  std::size_t argmax_index = 0;
};

/// Posterior over candidates after each prefix. Row t has seen t characters;
/// the last row (t = text length) also includes the EOS term.
struct TraceMatrix {
  std::vector<std::vector<double>> rows;
};

/// ln P(text | aux): every position after STR, EOS included, teacher-forced
/// from zero state.
template <typename Scalar>
double sequence_loglik(const ModelParameters<Scalar>& p, const Vocabulary& vocab, const AuxVector& aux,
                       const std::string& text) {
  double total = 0.0;
  for (double lp : position_log_probs(p, encode_with_aux(text, aux, vocab))) total += lp;
  return total;
}

namespace detail {

inline std::vector<double> resolved_priors(const ClassificationRequest& req) {
  if (req.candidates.empty()) throw ArgumentError("classification needs at least one candidate");
  if (req.priors.empty()) return std::vector<double>(req.candidates.size(), 1.0 / static_cast<double>(req.candidates.size()));
  if (req.priors.size() != req.candidates.size()) throw ArgumentError("one prior per candidate is required");
  double total = 0.0;
  for (double v : req.priors) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("priors must be finite and non-negative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("priors must sum to 1");
  return req.priors;
}

inline std::vector<double> log_normalize(const std::vector<double>& scores) {
  double m = -std::numeric_limits<double>::infinity();
  for (double s : scores) m = std::max(m, s);
  double acc = 0.0;
  for (double s : scores) acc += std::exp(s - m);
  const double lse = m + std::log(acc);
  std::vector<double> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(s - lse);
  return out;
}

/// Index of the largest value; ties go to the lowest index.
inline std::size_t first_argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

/// Cumulative prefix log-likelihoods for every candidate: [candidate][t],
/// t = 0..n where n is the character count; entry n includes EOS.
template <typename Scalar>
std::vector<std::vector<double>> prefix_logliks(const ModelParameters<Scalar>& p, const Vocabulary& vocab,
                                                const std::vector<AuxVector>& candidates, const std::string& text) {
  std::vector<std::vector<double>> out(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t c) {
    const auto lps = position_log_probs(p, encode_with_aux(text, candidates[c], vocab));
    std::vector<double> cum(lps.size() + 1, 0.0);
    // lps holds n character terms followed by the EOS term.
    for (std::size_t t = 0; t < lps.size(); ++t) cum[t + 1] = cum[t] + lps[t];
    const std::size_t n = lps.size() - 1;
    std::vector<double> rows(cum.begin(), cum.begin() + static_cast<std::ptrdiff_t>(n) + 1);
    rows[n] = cum[n + 1];
    out[c] = std::move(rows);
  });
  return out;
}

}  // namespace detail

/// Bayes-rule classification: score_c = ln P(text | aux_c) + ln prior_c.
template <typename Scalar>
ClassificationResult classify(const ClassificationRequest& req, const ModelParameters<Scalar>& p, const Vocabulary& vocab) {
  const auto priors = detail::resolved_priors(req);
  ClassificationResult r;
  r.log_likelihoods.resize(req.candidates.size());
  parallel_for(req.candidates.size(),
               [&](std::size_t c) { r.log_likelihoods[c] = sequence_loglik(p, vocab, req.candidates[c], req.text); });
  std::vector<double> scores(req.candidates.size());
  for (std::size_t c = 0; c < scores.size(); ++c) scores[c] = r.log_likelihoods[c] + std::log(priors[c]);
  r.log_posteriors = detail::log_normalize(scores);
  r.argmax_index = detail::first_argmax(scores);
  return r;
}

template <typename Scalar>
TraceMatrix prefix_posterior_trace(const ClassificationRequest& req, const ModelParameters<Scalar>& p,
                                   const Vocabulary& vocab) {
  const auto priors = detail::resolved_priors(req);
  const auto cum = detail::prefix_logliks(p, vocab, req.candidates, req.text);
  TraceMatrix tm;
  const std::size_t rows = cum[0].size();
  tm.rows.reserve(rows);
  tm.rows.push_back(priors);
  for (std::size_t t = 1; t < rows; ++t) {
    std::vector<double> scores(req.candidates.size());
    for (std::size_t c = 0; c < scores.size(); ++c) scores[c] = cum[c][t] + std::log(priors[c]);
    auto logpost = detail::log_normalize(scores);
    for (double& v : logpost) v = std::exp(v);
    tm.rows.push_back(std::move(logpost));
  }
  return tm;
}

namespace detail {

inline void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw ArgumentError("rating grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ArgumentError("rating grid must be strictly increasing");
}

inline std::vector<AuxVector> rating_candidates(const AuxSchema& schema, const std::vector<double>& grid,
                                                const AuxFields& fixed) {
  if (!schema.find(SlotKind::Rating)) throw ArgumentError("schema has no rating slot");
  std::vector<AuxVector> out;
  for (double g : grid) {
    AuxFields f = fixed;
    f.rating = g;
    out.push_back(encode_aux(f, schema));
  }
  return out;
}

}  // namespace detail

/// Grid value maximizing the prefix likelihood after each prefix, ties to the
/// lowest value. One entry per prefix length 0..n.
template <typename Scalar>
std::vector<double> rating_grid_argmax_trace(const ModelParameters<Scalar>& p, const Vocabulary& vocab,
                                             const AuxSchema& schema, const std::vector<double>& grid,
                                             const std::string& text, const AuxFields& fixed = {}) {
  detail::check_grid(grid);
  const auto cum = detail::prefix_logliks(p, vocab, detail::rating_candidates(schema, grid, fixed), text);
  std::vector<double> out;
  for (std::size_t t = 0; t < cum[0].size(); ++t) {
    std::vector<double> col(grid.size());
    for (std::size_t c = 0; c < grid.size(); ++c) col[c] = cum[c][t];
    out.push_back(grid[detail::first_argmax(col)]);
  }
  return out;
}

/// ln P(text | rating = g) for every grid value g.
template <typename Scalar>
std::vector<double> rating_likelihood_curve(const ModelParameters<Scalar>& p, const Vocabulary& vocab,
                                            const AuxSchema& schema, const std::vector<double>& grid,
                                            const std::string& text, const AuxFields& fixed = {}) {
  detail::check_grid(grid);
  const auto cands = detail::rating_candidates(schema, grid, fixed);
  std::vector<double> out(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) { out[i] = sequence_loglik(p, vocab, cands[i], text); });
  return out;
}

/// 0.0, 0.1, ..., 5.0.
inline std::vector<double> default_rating_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 50; ++i) g.push_back(i / 10.0);
  return g;
}

/// Best log-likelihood over grid values >= 4.0 minus best over values <= 2.0.
inline double sentiment_score(const std::vector<double>& grid, const std::vector<double>& curve) {
  if (grid.size() != curve.size()) throw ArgumentError("grid and curve differ in length");
  double pos = -std::numeric_limits<double>::infinity();
  double neg = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] >= 4.0 - 1e-9) pos = std::max(pos, curve[i]);
    if (grid[i] <= 2.0 + 1e-9) neg = std::max(neg, curve[i]);
  }
  if (!std::isfinite(pos) || !std::isfinite(neg)) throw ArgumentError("grid must cover both <= 2.0 and >= 4.0");
  return pos - neg;
}

}  // namespace gcn
