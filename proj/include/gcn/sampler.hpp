#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "gcn/aux.hpp"
#include "gcn/error.hpp"
#include "gcn/lstm.hpp"
#include "gcn/model.hpp"
#include "gcn/utf8.hpp"
#include "gcn/vocabulary.hpp"

namespace gcn {

inline constexpr const char* kSamplerRng = "mt19937_64";
/// Requested temperatures below this decode greedily.
inline constexpr double kGreedyTemperature = 0.01;

struct GenerationConfig {
  double temperature = 1.0;
  std::size_t max_length = 2000;
  std::uint64_t seed = 0;
};

enum class Termination { Eos, Budget };

struct GenerationResult {
  std::string text;
  Termination terminated_by = Termination::Budget;
};

/// p_i^(1/T), renormalized. Computed as softmax(ln p / T); zero entries stay zero.
inline std::vector<double> temperature_sharpen(const std::vector<double>& p, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ArgumentError("temperature must be positive");
  std::vector<double> logits(p.size());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || !std::isfinite(p[i])) throw ArgumentError("probabilities must be finite and non-negative");
    logits[i] = p[i] > 0.0 ? std::log(p[i]) / temperature : -std::numeric_limits<double>::infinity();
    m = std::max(m, logits[i]);
  }
  if (!std::isfinite(m)) throw ArgumentError("distribution has no mass");
  std::vector<double> out(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += out[i] = std::exp(logits[i] - m);
  for (double& v : out) v /= total;
  return out;
}

/// Inverse-CDF draw. The distribution must sum to 1 within 1e-9.
template <typename Rng>
std::size_t sample_categorical(const std::vector<double>& p, Rng& rng) {
  double total = 0.0;
  for (double v : p) {
    if (v < 0.0 || !std::isfinite(v)) throw ArgumentError("probabilities must be finite and non-negative");
    total += v;
  }
  if (p.empty() || std::abs(total - 1.0) > 1e-9) throw ArgumentError("distribution does not sum to 1");
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last_positive = i;
    cum += p[i];
    if (u < cum) return i;
  }
  return last_positive;
}

/// Next-symbol distribution for sampling: STR and UNK are removed (they have
/// no textual realization) and the rest renormalized.
template <typename Derived>
std::vector<double> emission_distribution(const Eigen::MatrixBase<Derived>& logits) {
  std::vector<double> p(static_cast<std::size_t>(logits.size()));
  const double lse = log_sum_exp(logits);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (i == Vocabulary::kStr || i == Vocabulary::kUnk) continue;
    total += p[static_cast<std::size_t>(i)] = std::exp(static_cast<double>(logits(i)) - lse);
  }
  if (!(total > 0.0)) {
    // Every emittable symbol underflowed; fall back to the largest logit among them.
    Eigen::Index best = Vocabulary::kEos;
    for (Eigen::Index i = Vocabulary::kEos; i < logits.size(); ++i)
      if (i != Vocabulary::kUnk && logits(i) > logits(best)) best = i;
    std::fill(p.begin(), p.end(), 0.0);
    p[static_cast<std::size_t>(best)] = 1.0;
    return p;
  }
  for (double& v : p) v /= total;
  return p;
}

/// Samples one review conditioned on `aux`, starting from STR with zero state.
/// Stops at EOS or after `max_length` characters.
template <typename Scalar>
GenerationResult generate(const ModelParameters<Scalar>& p, const Vocabulary& vocab, const AuxVector& aux,
                          const GenerationConfig& cfg) {
  if (static_cast<int>(aux.size()) != p.config.aux_dim)
    throw ArgumentError("aux width " + std::to_string(aux.size()) + " does not match model aux dim " +
                        std::to_string(p.config.aux_dim));
  if (p.config.vocab_size != vocab.size()) throw ArgumentError("vocabulary does not match model");
  if (cfg.max_length < 1) throw ArgumentError("max length must be at least 1");
  if (!(cfg.temperature > 0.0)) throw ArgumentError("temperature must be positive");

  std::mt19937_64 rng(cfg.seed);
  auto states = zero_states<Scalar>(p.config, 1);
  const Matrix<Scalar> aux_col = aux_column<Scalar>(aux);
  GenerationResult result;
  std::u32string text;
  int current = Vocabulary::kStr;
  while (text.size() < cfg.max_length) {
    const Matrix<Scalar> z = forward_step(p, InputBatch<Scalar>{{current}, aux_col}, states);
    if (!z.allFinite()) throw NumericError("non-finite logits during generation");
    const auto dist = emission_distribution(z.col(0));
    std::size_t next;
    if (cfg.temperature < kGreedyTemperature) {
      next = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    } else {
      next = sample_categorical(temperature_sharpen(dist, cfg.temperature), rng);
    }
    current = static_cast<int>(next);
    if (current == Vocabulary::kEos) {
      result.terminated_by = Termination::Eos;
      break;
    }
    text.push_back(vocab.character(current));
  }
  result.text = utf8::encode(text);
  return result;
}

}  // namespace gcn
