#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcn/aux.hpp"
#include "gcn/corpus.hpp"
#include "gcn/encoding.hpp"
#include "gcn/error.hpp"
#include "gcn/parallel.hpp"
#include "gcn/scoring.hpp"
#include "gcn/utf8.hpp"

namespace gcn {

/// exp(mean NLL) over the scored positions (every character plus EOS), base e.
template <typename Scalar>
double review_perplexity(const ModelParameters<Scalar>& p, const Vocabulary& vocab, const AuxVector& aux,
                         const std::string& text) {
  if (text.empty()) throw ArgumentError("cannot compute the perplexity of an empty text");
  const auto lps = position_log_probs(p, encode_with_aux(text, aux, vocab));
  double nll = 0.0;
  for (double lp : lps) nll -= lp;
  return std::exp(nll / static_cast<double>(lps.size()));
}

/// Lower middle element for even counts.
inline double lower_median(std::vector<double> v) {
  if (v.empty()) throw ArgumentError("median of an empty list");
  const std::size_t k = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

struct PerplexitySummary {
  double mean = 0.0;
  double median = 0.0;
  std::vector<double> per_review;
};

inline PerplexitySummary summarize_perplexities(std::vector<double> values) {
  if (values.empty()) throw EmptyCollectionError("no perplexities to summarize");
  PerplexitySummary s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  s.median = lower_median(values);
  s.per_review = std::move(values);
  return s;
}

template <typename Scalar>
PerplexitySummary perplexity_summary(const ModelParameters<Scalar>& p, const Vocabulary& vocab,
                                     const ReviewCollection& testset, const AuxSchema& schema) {
  if (testset.empty()) throw EmptyCollectionError("test set is empty");
  std::vector<double> ppl(testset.size());
  parallel_for(testset.size(), [&](std::size_t i) {
    const auto& r = testset[i];
    ppl[i] = review_perplexity(p, vocab, encode_aux(AuxFields::of(r), schema), r.text);
  });
  return summarize_perplexities(std::move(ppl));
}

struct ConfusionResult {
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

inline ConfusionResult accuracy_confusion(const std::vector<int>& predictions, const std::vector<int>& truths,
                                          int num_classes) {
  if (predictions.size() != truths.size()) throw ArgumentError("predictions and truths differ in length");
  if (num_classes < 1) throw ArgumentError("need at least one class");
  ConfusionResult r;
  r.confusion.assign(static_cast<std::size_t>(num_classes), std::vector<std::size_t>(static_cast<std::size_t>(num_classes), 0));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const int t = truths[i], p = predictions[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) throw ArgumentError("label out of range");
    ++r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    hits += t == p;
  }
  r.accuracy = truths.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(truths.size());
  return r;
}

/// P(random positive outscores random negative), ties count one half.
/// Computed from average ranks (Mann-Whitney U).
inline double binary_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ArgumentError("scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) pos_rank_sum += avg_rank;
    i = j;
  }
  for (int l : labels) (l ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("AUC needs both positive and negative cases");
  const double u = pos_rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Candidate indices ordered by descending score, ties by index.
inline std::vector<std::size_t> rank_candidates(const std::vector<double>& scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

/// Share of cases whose true candidate ranks within the top ceil(fraction * C).
inline double recall_at_fraction(const std::vector<std::vector<double>>& scores, const std::vector<int>& truths,
                                 double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("fraction must lie in (0, 1]");
  if (scores.size() != truths.size()) throw ArgumentError("scores and truths differ in length");
  if (scores.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const std::size_t c = scores[i].size();
    const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(c) - 1e-12));
    const auto ranked = rank_candidates(scores[i]);
    for (std::size_t r = 0; r < std::min(k, c); ++r)
      if (static_cast<int>(ranked[r]) == truths[i]) {
        ++hits;
        break;
      }
  }
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

struct MulticlassAuc {
  double auc = 0.0;
  std::size_t skipped_classes = 0;
};

/// Macro average of one-vs-rest AUCs over candidate score columns. Classes
/// with no positive or no negative case are skipped and counted.
inline MulticlassAuc multiclass_auc(const std::vector<std::vector<double>>& scores, const std::vector<int>& truths) {
  if (scores.size() != truths.size()) throw ArgumentError("scores and truths differ in length");
  if (scores.empty() || scores[0].size() < 2) throw ArgumentError("need at least two candidates");
  const std::size_t C = scores[0].size();
  MulticlassAuc r;
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<double> col;
    std::vector<int> lab;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      col.push_back(scores[i][c]);
      lab.push_back(truths[i] == static_cast<int>(c));
    }
    try {
      total += binary_auc(col, lab);
      ++used;
    } catch (const UndefinedMetricError&) {
      ++r.skipped_classes;
    }
  }
  if (used == 0) throw UndefinedMetricError("no class has both positive and negative cases");
  r.auc = total / static_cast<double>(used);
  return r;
}

/// Locale-independent shortest round-trip decimal.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Fixed-point decimal, locale-independent.
inline std::string format_fixed(double v, int precision) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
  return std::string(buf, res.ptr);
}

struct MetricsReport {
  std::string task;
  std::size_t cases = 0;
  std::size_t skipped_cases = 0;
  std::optional<double> mean_perplexity;
  std::optional<double> median_perplexity;
  std::optional<double> accuracy;
  std::optional<double> auc;
  std::optional<double> recall_at_10pct;
  std::size_t auc_skipped_classes = 0;
  std::string auc_definition;
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> confusion;

  /// key=value lines followed by the labeled confusion table, if any.
  std::string to_text() const {
    std::string out;
    auto kv = [&](const std::string& k, const std::string& v) { out += k + "=" + v + "\n"; };
    kv("task", task);
    kv("cases", std::to_string(cases));
    kv("skipped_cases", std::to_string(skipped_cases));
    if (mean_perplexity) kv("mean_perplexity", format_number(*mean_perplexity));
    if (median_perplexity) kv("median_perplexity", format_number(*median_perplexity));
    if (accuracy) kv("accuracy", format_number(*accuracy));
    if (auc) {
      kv("auc", format_number(*auc));
      kv("auc_definition", auc_definition);
      kv("auc_skipped_classes", std::to_string(auc_skipped_classes));
    }
    if (recall_at_10pct) kv("recall_at_10pct", format_number(*recall_at_10pct));
    if (!confusion.empty()) {
      out += "\nconfusion (rows: true, columns: predicted)\n";
      out += "true\\pred";
      for (const auto& l : labels) out += "\t" + l;
      out += "\n";
      for (std::size_t i = 0; i < confusion.size(); ++i) {
        out += labels[i];
        for (auto n : confusion[i]) out += "\t" + std::to_string(n);
        out += "\n";
      }
    }
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["task"] = task;
    j["cases"] = cases;
    j["skipped_cases"] = skipped_cases;
    if (mean_perplexity) j["mean_perplexity"] = *mean_perplexity;
    if (median_perplexity) j["median_perplexity"] = *median_perplexity;
    if (accuracy) j["accuracy"] = *accuracy;
    if (auc) {
      j["auc"] = *auc;
      j["auc_definition"] = auc_definition;
      j["auc_skipped_classes"] = auc_skipped_classes;
    }
    if (recall_at_10pct) j["recall_at_10pct"] = *recall_at_10pct;
    if (!confusion.empty()) {
      j["labels"] = labels;
      j["confusion"] = confusion;
    }
    return j;
  }
};

}  // namespace gcn
