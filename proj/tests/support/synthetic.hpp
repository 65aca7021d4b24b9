#pragma once

// Seeded synthetic corpora for end-to-end checks.

#include <random>
#include <string>
#include <vector>

#include "gcn/corpus.hpp"

namespace synthetic {

/// Two styles with disjoint letters: style "A" writes consonant-vowel-consonant
/// words over {b,d,g}{a,o}{b,d,g}, style "B" over {p,t,k}{e,i}{p,t,k}. Every
/// text is one 3-letter word, so its first letter reveals the style.
inline std::vector<gcn::ReviewRecord> two_style_corpus(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> three(0, 2), two(0, 1);
  const std::string cons[2] = {"bdg", "ptk"}, vow[2] = {"ao", "ei"};
  std::vector<gcn::ReviewRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int s = coin(rng) ? 1 : 0;
    std::string text{cons[s][three(rng)], vow[s][two(rng)], cons[s][three(rng)]};
    out.push_back({"user" + std::to_string(i % 50), "item" + std::to_string(i % 40), 3.0, s ? "B" : "A", text});
  }
  return out;
}

/// Five short reviews for memorization.
inline std::vector<gcn::ReviewRecord> toy_corpus() {
  const char* texts[] = {"a crisp pale ale, light and dry.", "dark stout with roasted coffee notes.",
                         "hoppy and bitter, pine on the finish.", "sweet malty amber, a bit thin.",
                         "sour and funky, tart cherry."};
  std::vector<gcn::ReviewRecord> out;
  for (int i = 0; i < 5; ++i) out.push_back({"u" + std::to_string(i), "i" + std::to_string(i), 1.0 + i, "c", texts[i]});
  return out;
}

}  // namespace synthetic
