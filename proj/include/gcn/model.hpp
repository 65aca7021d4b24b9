#pragma once

#include <cstdint>
#include <vector>

#include "gcn/aux.hpp"
#include "gcn/encoding.hpp"
#include "gcn/error.hpp"
#include "gcn/lstm.hpp"
#include "gcn/stream.hpp"
#include "gcn/vocabulary.hpp"

namespace gcn {

/// Dense concatenated input [one-hot character; aux].
inline std::vector<double> concat_input(const std::vector<double>& char_onehot, const AuxVector& aux,
                                        const ModelConfig& cfg) {
  if (static_cast<int>(char_onehot.size()) != cfg.vocab_size) throw ArgumentError("one-hot width does not match vocabulary");
  if (static_cast<int>(aux.size()) != cfg.aux_dim) throw ArgumentError("aux width does not match model");
  std::vector<double> x(char_onehot);
  x.insert(x.end(), aux.begin(), aux.end());
  return x;
}

inline std::vector<double> one_hot(int index, int size) {
  if (index < 0 || index >= size) throw ArgumentError("one-hot index out of range");
  std::vector<double> v(static_cast<std::size_t>(size), 0.0);
  v[static_cast<std::size_t>(index)] = 1.0;
  return v;
}

/// Model over `vocab` conditioned on `schema`, weights uniform on [-0.08, 0.08].
template <typename Scalar = float>
ModelParameters<Scalar> init_model(const Vocabulary& vocab, const AuxSchema& schema, int hidden, int layers,
                                   std::uint64_t seed) {
  if (hidden < 1 || layers < 1) throw ArgumentError("hidden size and layer count must be >= 1");
  ModelConfig cfg{vocab.size(), schema.total_dim(), hidden, layers};
  return random_parameters<Scalar>(cfg, seed, 0.08);
}

/// Widens an unconditioned model's first-layer input matrix by `aux_dim` zero
/// columns. Every other array is copied, so predictions are unchanged for any aux.
template <typename Scalar>
ModelParameters<Scalar> transplant(const ModelParameters<Scalar>& source, int aux_dim) {
  if (source.config.aux_dim != 0)
    throw ArgumentError("transplant source must be unconditioned (aux dim " + std::to_string(source.config.aux_dim) + ")");
  if (aux_dim < 0) throw ArgumentError("aux dim must be non-negative");
  auto out = source;
  out.config.aux_dim = aux_dim;
  auto& w = out.layers[0].input;
  Matrix<Scalar> widened = Matrix<Scalar>::Zero(w.rows(), w.cols() + aux_dim);
  widened.leftCols(w.cols()) = w;
  w = std::move(widened);
  return out;
}

template <typename Scalar>
ModelParameters<Scalar> transplant(const ModelParameters<Scalar>& source, const AuxSchema& schema) {
  return transplant(source, schema.total_dim());
}

template <typename Scalar>
Matrix<Scalar> aux_column(const AuxVector& aux) {
  Matrix<Scalar> m(static_cast<Eigen::Index>(aux.size()), 1);
  for (std::size_t i = 0; i < aux.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = static_cast<Scalar>(aux[i]);
  return m;
}

/// Kernel inputs for a training segment.
template <typename Scalar>
std::vector<InputBatch<Scalar>> segment_inputs(const StreamSegment& seg, const BatchStream& stream) {
  std::vector<InputBatch<Scalar>> out;
  out.reserve(seg.inputs.size());
  const auto& table = stream.aux_table();
  for (std::size_t t = 0; t < seg.inputs.size(); ++t) {
    InputBatch<Scalar> in;
    in.chars = seg.inputs[t];
    in.aux.resize(stream.aux_dim(), static_cast<Eigen::Index>(in.chars.size()));
    for (std::size_t b = 0; b < in.chars.size(); ++b) {
      const auto& a = table[static_cast<std::size_t>(seg.owners[t][b])];
      for (int k = 0; k < stream.aux_dim(); ++k) in.aux(k, static_cast<Eigen::Index>(b)) = static_cast<Scalar>(a[static_cast<std::size_t>(k)]);
    }
    out.push_back(std::move(in));
  }
  return out;
}

/// Teacher-forced single-stream inputs and targets for an encoded sequence:
/// inputs are positions 0..n-2, targets positions 1..n-1.
template <typename Scalar>
std::pair<std::vector<InputBatch<Scalar>>, std::vector<std::vector<int>>> teacher_forcing(const EncodedSequence& seq) {
  std::vector<InputBatch<Scalar>> inputs;
  std::vector<std::vector<int>> targets;
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
    inputs.push_back({{seq.indices[t]}, aux_column<Scalar>(seq.aux[t])});
    targets.push_back({seq.indices[t + 1]});
  }
  return {std::move(inputs), std::move(targets)};
}

}  // namespace gcn
