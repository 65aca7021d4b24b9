#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "gcn/aux.hpp"
#include "gcn/corpus.hpp"
#include "gcn/encoding.hpp"
#include "gcn/error.hpp"
#include "gcn/vocabulary.hpp"

namespace gcn {

/// One training step's worth of data: for every step t and stream b the input
/// character, the id of the review owning that position, and the target.
struct StreamSegment {
  std::size_t epoch = 0;
  std::size_t index_in_epoch = 0;
  std::vector<std::vector<int>> inputs;   // [t][b]
  std::vector<std::vector<int>> owners;   // [t][b], review ids into BatchStream::aux_table()
  std::vector<std::vector<int>> targets;  // [t][b]
  std::vector<std::size_t> offsets;       // [b] position of step 0 in the concatenation
};

/// The training corpus as `stream_count` parallel contiguous streams.
///
/// Reviews are shuffled once by seed, encoded, and concatenated. The
/// concatenation is read cyclically, so the target after the final EOS is the
/// first STR. The first stream_count * stream_length positions are split into
/// equal contiguous streams; the remainder is dropped. Each step advances all
/// streams by `segment_length`; a stream's leftover shorter than one segment
/// is skipped and the next epoch starts again from each stream's head.
class BatchStream {
 public:
  static BatchStream assemble(const ReviewCollection& train, const Vocabulary& vocab, const AuxSchema& schema,
                              std::size_t stream_count, std::size_t segment_length, std::uint64_t seed) {
    if (stream_count == 0 || segment_length == 0) throw ArgumentError("stream count and segment length must be positive");
    if (train.empty()) throw EmptyCollectionError("training collection is empty");
    BatchStream bs;
    bs.stream_count_ = stream_count;
    bs.segment_length_ = segment_length;
    bs.aux_dim_ = schema.total_dim();

    bs.order_.resize(train.size());
    std::iota(bs.order_.begin(), bs.order_.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(bs.order_.begin(), bs.order_.end(), rng);

    bs.aux_table_.reserve(train.size());
    for (std::size_t id = 0; id < train.size(); ++id) bs.aux_table_.push_back(encode_aux(AuxFields::of(train[id]), schema));
    for (std::size_t id : bs.order_) {
      for (int c : encode_text(train[id].text, vocab)) {
        bs.sequence_.push_back(c);
        bs.owner_.push_back(static_cast<int>(id));
      }
    }
    if (bs.sequence_.size() < stream_count)
      throw ArgumentError("concatenated corpus (" + std::to_string(bs.sequence_.size()) + " symbols) is shorter than " +
                          std::to_string(stream_count) + " streams");
    bs.stream_length_ = bs.sequence_.size() / stream_count;
    if (bs.stream_length_ < segment_length)
      throw ArgumentError("stream length " + std::to_string(bs.stream_length_) + " is shorter than segment length " +
                          std::to_string(segment_length));
    return bs;
  }

  std::size_t stream_count() const noexcept { return stream_count_; }
  std::size_t segment_length() const noexcept { return segment_length_; }
  std::size_t stream_length() const noexcept { return stream_length_; }
  std::size_t segments_per_epoch() const noexcept { return stream_length_ / segment_length_; }
  int aux_dim() const noexcept { return aux_dim_; }

  /// Full concatenation before truncation.
  const std::vector<int>& sequence() const noexcept { return sequence_; }
  const std::vector<int>& owners() const noexcept { return owner_; }
  /// Review ids in concatenation order.
  const std::vector<std::size_t>& review_order() const noexcept { return order_; }
  /// Aux vector of each review, by review id.
  const std::vector<AuxVector>& aux_table() const noexcept { return aux_table_; }

  int target_at(std::size_t pos) const { return sequence_[(pos + 1) % sequence_.size()]; }

  /// Segment for global training step `step`.
  StreamSegment segment(std::size_t step) const {
    StreamSegment seg;
    const std::size_t per_epoch = segments_per_epoch();
    seg.epoch = step / per_epoch;
    seg.index_in_epoch = step % per_epoch;
    const std::size_t L = segment_length_;
    seg.inputs.assign(L, std::vector<int>(stream_count_));
    seg.owners.assign(L, std::vector<int>(stream_count_));
    seg.targets.assign(L, std::vector<int>(stream_count_));
    for (std::size_t b = 0; b < stream_count_; ++b) {
      const std::size_t start = b * stream_length_ + seg.index_in_epoch * L;
      seg.offsets.push_back(start);
      for (std::size_t t = 0; t < L; ++t) {
        seg.inputs[t][b] = sequence_[start + t];
        seg.owners[t][b] = owner_[start + t];
        seg.targets[t][b] = target_at(start + t);
      }
    }
    return seg;
  }

 private:
  std::size_t stream_count_ = 0;
  std::size_t segment_length_ = 0;
  std::size_t stream_length_ = 0;
  int aux_dim_ = 0;
  std::vector<std::size_t> order_;
  std::vector<int> sequence_;
  std::vector<int> owner_;
  std::vector<AuxVector> aux_table_;
};

}  // namespace gcn
