#pragma once

#include <string>
#include <vector>

#include "gcn/aux.hpp"
#include "gcn/corpus.hpp"
#include "gcn/utf8.hpp"
#include "gcn/vocabulary.hpp"

namespace gcn {

/// STR, the review's characters, EOS, with the review's aux vector at every position.
struct EncodedSequence {
  std::vector<int> indices;
  std::vector<AuxVector> aux;

  std::size_t size() const noexcept { return indices.size(); }
};

/// Index sequence [STR, chars..., EOS]; characters outside `vocab` become UNK.
inline std::vector<int> encode_text(const std::string& text, const Vocabulary& vocab) {
  std::vector<int> out{Vocabulary::kStr};
  for (char32_t cp : utf8::decode(text)) out.push_back(vocab.index_of(cp));
  out.push_back(Vocabulary::kEos);
  return out;
}

inline EncodedSequence encode_with_aux(const std::string& text, const AuxVector& aux, const Vocabulary& vocab) {
  EncodedSequence seq;
  seq.indices = encode_text(text, vocab);
  seq.aux.assign(seq.indices.size(), aux);
  return seq;
}

inline EncodedSequence encode_review(const ReviewRecord& r, const Vocabulary& vocab, const AuxSchema& schema) {
  return encode_with_aux(r.text, encode_aux(AuxFields::of(r), schema), vocab);
}

/// Text of an index sequence. Specials are dropped; UNK has no realization.
inline std::string decode_indices(const std::vector<int>& indices, const Vocabulary& vocab) {
  std::u32string out;
  for (int i : indices)
    if (!Vocabulary::is_special(i)) out.push_back(vocab.character(i));
  return utf8::encode(out);
}

}  // namespace gcn
