#pragma once

// Worked example shared by the suites: source segment f5..f9 (positions
// 1..5), translation e3..e7 (positions 1..5), links
//   f6-e4, f7-e3, f8-e1, f9-e2, f5 unaligned.

#include <random>
#include <string>
#include <vector>

#include "mtnn/corpus.hpp"

namespace mtnn::fixtures {

inline Vocabulary fixture_src_vocab() {
  Vocabulary v(Side::source);
  for (int w = 5; w <= 9; ++w) v.add("f" + std::to_string(w), 1);
  return v;
}

inline Vocabulary fixture_tgt_vocab() {
  Vocabulary v(Side::target);
  for (int w = 3; w <= 7; ++w) v.add("e" + std::to_string(w), 1);
  return v;
}

inline TokenId fid(int w) { return fixture_src_vocab().lookup("f" + std::to_string(w)); }
inline TokenId eid(int w) { return fixture_tgt_vocab().lookup("e" + std::to_string(w)); }

inline AlignedSentencePair fixture_pair() {
  AlignedSentencePair p;
  for (int w = 5; w <= 9; ++w) p.src.push_back(fid(w));
  for (int w = 3; w <= 7; ++w) p.tgt.push_back(eid(w));
  p.links = {{2, 4}, {3, 3}, {4, 1}, {5, 2}};
  normalize_links(p);
  return p;
}

inline AlignedSentencePair identity_pair(int n) {
  AlignedSentencePair p;
  for (int j = 1; j <= n; ++j) {
    p.src.push_back(static_cast<TokenId>(3 + j));
    p.tgt.push_back(static_cast<TokenId>(3 + j));
    p.links.push_back({j, j});
  }
  return p;
}

inline AlignedSentencePair reversal_pair(int n) {
  auto p = identity_pair(n);
  p.links.clear();
  for (int j = 1; j <= n; ++j) p.links.push_back({j, n + 1 - j});
  normalize_links(p);
  return p;
}

// Random pair with |F|,|E| in [1, max_len] and a random link subset.
inline AlignedSentencePair random_pair(std::mt19937_64& rng, int max_len = 10,
                                       double density = 0.2) {
  std::uniform_int_distribution<int> len(1, max_len);
  std::uniform_real_distribution<double> coin(0, 1);
  AlignedSentencePair p;
  int f = len(rng), e = len(rng);
  for (int j = 0; j < f; ++j) p.src.push_back(static_cast<TokenId>(4 + rng() % 20));
  for (int i = 0; i < e; ++i) p.tgt.push_back(static_cast<TokenId>(4 + rng() % 20));
  for (int j = 1; j <= f; ++j)
    for (int i = 1; i <= e; ++i)
      if (coin(rng) < density) p.links.push_back({j, i});
  normalize_links(p);
  return p;
}

}  // namespace mtnn::fixtures
