#include <gtest/gtest.h>

#include <set>

#include "mtnn/alignment.hpp"
#include "mtnn/error.hpp"
#include "mtnn/synth.hpp"
#include "toy.hpp"

using namespace mtnn;

TEST(Synth, SeedDeterministic) {
  for (auto p : {SynthPattern::monotone, SynthPattern::reversal, SynthPattern::block_swap,
                 SynthPattern::collocation}) {
    auto a = gen_synth(p, 50, 30, 7);
    auto b = gen_synth(p, 50, 30, 7);
    EXPECT_EQ(a.src, b.src);
    EXPECT_EQ(a.tgt, b.tgt);
    EXPECT_EQ(a.align, b.align);
    EXPECT_EQ(a.src.size(), 50u);
  }
  EXPECT_NE(gen_synth(SynthPattern::monotone, 5, 30, 1).src,
            gen_synth(SynthPattern::monotone, 5, 30, 2).src);
}

TEST(Synth, PatternNames) {
  EXPECT_EQ(parse_synth_pattern("block-swap"), SynthPattern::block_swap);
  EXPECT_EQ(parse_synth_pattern("collocation"), SynthPattern::collocation);
  EXPECT_THROW(parse_synth_pattern("zigzag"), Error);
}

TEST(Synth, MonotoneInteriorIsMonotoneAdjacent) {
  auto toy = fixtures::make_toy(SynthPattern::monotone, 40, 20, 1);
  for (const auto& p : toy.pairs)
    for (int j = 2; j < p.src_len(); ++j)
      EXPECT_EQ(orientation_label(p, j), OrientationLabel::pair(Orientation::MA, Orientation::MA));
}

TEST(Synth, ReversalInteriorIsReverseAdjacent) {
  auto toy = fixtures::make_toy(SynthPattern::reversal, 40, 20, 1);
  for (const auto& p : toy.pairs)
    for (int j = 2; j < p.src_len(); ++j)
      EXPECT_EQ(orientation_label(p, j), OrientationLabel::pair(Orientation::RA, Orientation::RA));
}

TEST(Synth, BlockSwapHasReverseOrientations) {
  auto toy = fixtures::make_toy(SynthPattern::block_swap, 200, 20, 1);
  std::size_t reverse = 0;
  for (const auto& p : toy.pairs)
    for (int j = 1; j <= p.src_len(); ++j) {
      auto l = orientation_label(p, j);
      reverse += l.left == Orientation::RA || l.right == Orientation::RA;
    }
  EXPECT_GT(reverse, 0u);
}

TEST(Synth, CollocationTargetIsXorOfNeighborClasses) {
  auto c = gen_synth(SynthPattern::collocation, 100, 40, 3);
  auto cls = [](const std::string& w) { return std::stoi(w.substr(1)) % kCollocationClasses; };
  for (std::size_t s = 0; s < c.src.size(); ++s) {
    std::vector<std::string> src, tgt;
    std::istringstream a(c.src[s]), b(c.tgt[s]);
    for (std::string w; a >> w;) src.push_back(w);
    for (std::string w; b >> w;) tgt.push_back(w);
    ASSERT_EQ(src.size(), tgt.size());
    for (std::size_t j = 0; j < src.size(); ++j) {
      int left = j == 0 ? 0 : cls(src[j - 1]);
      int right = j + 1 == src.size() ? 0 : cls(src[j + 1]);
      EXPECT_EQ(tgt[j], "c" + std::to_string(left ^ right));
    }
  }
}

TEST(Synth, AlignmentsAreWithinBounds) {
  auto toy = fixtures::make_toy(SynthPattern::block_swap, 100, 20, 2);
  for (const auto& p : toy.pairs) {
    EXPECT_EQ(p.links.size(), p.src.size());
    EXPECT_GE(p.src_len(), 4);
    EXPECT_LE(p.src_len(), 12);
  }
}
