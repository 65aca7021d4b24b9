#pragma once

#include <vector>

#include "gcn/encoding.hpp"
#include "gcn/lstm.hpp"
#include "gcn/model.hpp"

namespace gcn {

/// ln P(y_t | y_<t, aux) for every position after STR, teacher-forced from
/// zero state. The last entry is the EOS term.
template <typename Scalar>
std::vector<double> position_log_probs(const ModelParameters<Scalar>& p, const EncodedSequence& seq) {
  if (seq.size() < 2) throw ArgumentError("encoded sequence must hold at least STR and EOS");
  auto states = zero_states<Scalar>(p.config, 1);
  std::vector<double> out;
  out.reserve(seq.size() - 1);
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
    if (static_cast<int>(seq.aux[t].size()) != p.config.aux_dim)
      throw ArgumentError("aux width " + std::to_string(seq.aux[t].size()) + " does not match model aux dim " +
                          std::to_string(p.config.aux_dim));
    InputBatch<Scalar> in{{seq.indices[t]}, aux_column<Scalar>(seq.aux[t])};
    const Matrix<Scalar> z = forward_step(p, in, states);
    if (!z.allFinite()) throw NumericError("non-finite logits while scoring");
    const int y = seq.indices[t + 1];
    out.push_back(static_cast<double>(z(y, 0)) - log_sum_exp(z.col(0)));
  }
  return out;
}

}  // namespace gcn
