#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gcn/corpus.hpp"
#include "gcn/encoding.hpp"
#include "gcn/error.hpp"
#include "gcn/lstm.hpp"
#include "gcn/model.hpp"
#include "gcn/scoring.hpp"
#include "gcn/stream.hpp"

namespace gcn {

struct TrainingConfig {
  std::size_t max_steps = 1000;
  std::size_t stream_count = 256;
  std::size_t segment_length = 200;
  double clip = 5.0;
  RmsPropHyper optimizer;
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;  // 0 disables held-out evaluation
  std::size_t patience = 0;    // evaluations without improvement before stopping; 0 disables
};

struct StepRecord {
  std::size_t step = 0;
  double loss = 0.0;  // mean nats per character over the segment, before the update
};

struct EvalRecord {
  std::size_t step = 0;
  double heldout_nll = 0.0;  // mean nats per scored character
};

struct TrainingLog {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  bool stopped_early = false;
};

/// Loss is not finite; carries where it happened.
class NonFiniteLossError : public NumericError {
 public:
  NonFiniteLossError(std::size_t step, std::size_t stream, std::size_t offset)
      : NumericError("non-finite loss at step " + std::to_string(step) + ", stream " + std::to_string(stream) +
                     ", segment offset " + std::to_string(offset)),
        step_(step), stream_(stream), offset_(offset) {}
  std::size_t step() const noexcept { return step_; }
  std::size_t stream() const noexcept { return stream_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t step_, stream_, offset_;
};

/// Mean per-character NLL of `reviews`, each scored from a fresh zero state.
template <typename Scalar>
double heldout_nll(const ModelParameters<Scalar>& p, const ReviewCollection& reviews, const Vocabulary& vocab,
                   const AuxSchema& schema) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& r : reviews.records()) {
    for (double lp : position_log_probs(p, encode_review(r, vocab, schema))) total -= lp;
    count += utf8::decode(r.text).size() + 1;
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

/// Per-character loss and its gradient for one segment, starting from and
/// updating `carried`. Throws NonFiniteLossError with diagnostics.
template <typename Scalar>
std::pair<double, Gradients<Scalar>> segment_step(const ModelParameters<Scalar>& p, const StreamSegment& seg,
                                                  const BatchStream& stream, std::vector<LayerState<Scalar>>& carried,
                                                  std::size_t step) {
  const auto inputs = segment_inputs<Scalar>(seg, stream);
  auto fwd = stack_forward<Scalar>(p, inputs, carried);
  for (std::size_t t = 0; t < fwd.logits.size(); ++t)
    for (Eigen::Index b = 0; b < fwd.logits[t].cols(); ++b)
      if (!fwd.logits[t].col(b).allFinite()) throw NonFiniteLossError(step, static_cast<std::size_t>(b), seg.offsets[static_cast<std::size_t>(b)]);
  const double chars = static_cast<double>(seg.inputs.size() * stream.stream_count());
  const double loss = sequence_nll<Scalar>(fwd.logits, seg.targets) / chars;
  if (!std::isfinite(loss)) throw NonFiniteLossError(step, 0, seg.offsets.front());
  auto grad = backward_bptt<Scalar>(p, fwd.cache, seg.targets);
  const auto scale = static_cast<Scalar>(1.0 / chars);
  grad.visit([&](auto& a) { a *= scale; });
  carried = std::move(fwd.final_states);
  return {loss, std::move(grad)};
}

/// Truncated-BPTT training over stateful streams with elementwise clipping and
/// RMSprop. Gradients are of the mean per-character loss. Carried state is
/// reset at every epoch boundary. Deterministic for a fixed configuration.
template <typename Scalar>
TrainingLog train(ModelParameters<Scalar>& model, const BatchStream& stream, const TrainingConfig& cfg,
                  const ReviewCollection* heldout = nullptr, const Vocabulary* vocab = nullptr,
                  const AuxSchema* schema = nullptr, const std::function<void(const StepRecord&)>& on_step = {},
                  const std::function<void(const EvalRecord&)>& on_eval = {}) {
  if (stream.aux_dim() != model.config.aux_dim) throw ArgumentError("stream aux dim does not match the model");
  if (cfg.clip <= 0) throw ArgumentError("clip bound must be positive");
  if (cfg.eval_every && (!heldout || !vocab || !schema))
    throw ArgumentError("held-out evaluation needs reviews, vocabulary and schema");

  TrainingLog log;
  auto opt = OptimizerState<Scalar>::for_model(model, cfg.optimizer);
  auto carried = zero_states<Scalar>(model.config, static_cast<int>(stream.stream_count()));
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    const auto seg = stream.segment(step);
    if (seg.index_in_epoch == 0) carried = zero_states<Scalar>(model.config, static_cast<int>(stream.stream_count()));
    auto [loss, grad] = segment_step(model, seg, stream, carried, step);
    rmsprop_update(model, clip_gradients(std::move(grad), cfg.clip), opt);
    log.steps.push_back({step, loss});
    if (on_step) on_step(log.steps.back());

    if (cfg.eval_every && (step + 1) % cfg.eval_every == 0) {
      log.evals.push_back({step + 1, heldout_nll(model, *heldout, *vocab, *schema)});
      if (on_eval) on_eval(log.evals.back());
      if (log.evals.back().heldout_nll < best) {
        best = log.evals.back().heldout_nll;
        since_best = 0;
      } else if (cfg.patience && ++since_best >= cfg.patience) {
        log.stopped_early = true;
        break;
      }
    }
  }
  return log;
}

}  // namespace gcn
