#include <gtest/gtest.h>

#include <random>

#include "fixture.hpp"
#include "mtnn/alignment.hpp"
#include "mtnn/error.hpp"
#include "oracles.hpp"

using namespace mtnn;
using fixtures::fixture_pair;

namespace {

AlignedSentencePair with_links(int f, int e, std::vector<Link> links) {
  AlignedSentencePair p;
  for (int j = 0; j < f; ++j) p.src.push_back(4);
  for (int i = 0; i < e; ++i) p.tgt.push_back(4);
  p.links = std::move(links);
  normalize_links(p);
  return p;
}

}  // namespace

TEST(Affiliation, Fixture) {
  auto a = target_affiliation(fixture_pair());
  ASSERT_TRUE(a);
  EXPECT_EQ(*a, (std::vector<int>{4, 5, 3, 2, 2}));
}

TEST(Affiliation, MiddleOfSeveral) {
  auto p = with_links(7, 1, {{2, 1}, {5, 1}, {7, 1}});
  EXPECT_EQ(target_affiliation(p)->at(0), 5);
  auto q = with_links(5, 1, {{2, 1}, {5, 1}});
  EXPECT_EQ(target_affiliation(q)->at(0), 2);
}

TEST(Affiliation, UnalignedTargetsInherit) {
  // Targets 1 and 3 aligned; target 2 is equidistant and takes the right.
  auto p = with_links(3, 4, {{1, 1}, {3, 3}});
  EXPECT_EQ(*target_affiliation(p), (std::vector<int>{1, 3, 3, 3}));
}

TEST(Affiliation, NoLinks) {
  EXPECT_FALSE(target_affiliation(with_links(3, 3, {})));
}

TEST(Attachment, Fixture) {
  auto b = source_attachment(fixture_pair());
  ASSERT_EQ(b.size(), 5u);
  EXPECT_FALSE(b[0]);
  EXPECT_EQ(b[1], 4);
  EXPECT_EQ(b[2], 3);
  EXPECT_EQ(b[3], 1);
  EXPECT_EQ(b[4], 2);
}

TEST(Attachment, LeftMost) {
  auto b = source_attachment(with_links(1, 5, {{1, 5}, {1, 3}}));
  EXPECT_EQ(b[0], 3);
}

TEST(Fertility, Labels) {
  auto p = fixture_pair();
  EXPECT_EQ(fertility_label(p, 3), 1);
  EXPECT_EQ(fertility_label(p, 1), 0);
  auto empty = with_links(4, 4, {});
  for (int j = 1; j <= 4; ++j) EXPECT_EQ(fertility_label(empty, j), 0);
}

TEST(Spans, Fixture) {
  auto s = orientation_spans(fixture_pair(), 3);
  ASSERT_TRUE(s.left && s.right);
  EXPECT_EQ(*s.left, (Interval{2, 2}));
  EXPECT_EQ(*s.right, (Interval{4, 5}));

  auto s2 = orientation_spans(fixture_pair(), 2);
  EXPECT_FALSE(s2.left);
}

TEST(Spans, Monotone) {
  auto s = orientation_spans(fixtures::identity_pair(3), 2);
  EXPECT_EQ(s.left, (Interval{1, 1}));
  EXPECT_EQ(s.right, (Interval{3, 3}));
}

TEST(Spans, EdgesHaveNoOutwardSpan) {
  auto p = fixtures::identity_pair(4);
  EXPECT_FALSE(orientation_spans(p, 1).left);
  EXPECT_FALSE(orientation_spans(p, 4).right);
}

TEST(Orientation, Fixture) {
  auto p = fixture_pair();
  EXPECT_EQ(orientation_label(p, 3), OrientationLabel::pair(Orientation::RA, Orientation::RA));
  EXPECT_EQ(orientation_label(p, 1), OrientationLabel::unaligned(Orientation::NONE));
}

TEST(Orientation, MonotoneAndReversal) {
  const int n = 7;
  auto mono = fixtures::identity_pair(n);
  auto rev = fixtures::reversal_pair(n);
  for (int j = 2; j < n; ++j) {
    EXPECT_EQ(orientation_label(mono, j), OrientationLabel::pair(Orientation::MA, Orientation::MA));
    EXPECT_EQ(orientation_label(rev, j), OrientationLabel::pair(Orientation::RA, Orientation::RA));
  }
  EXPECT_EQ(orientation_label(mono, 1), OrientationLabel::pair(Orientation::NONE, Orientation::MA));
}

TEST(Orientation, GapFromUnalignedTarget) {
  // f1-e1, f2-e3: e2 unaligned between them.
  auto p = with_links(2, 3, {{1, 1}, {2, 3}});
  EXPECT_EQ(orientation_label(p, 1), OrientationLabel::pair(Orientation::NONE, Orientation::MG));
  EXPECT_EQ(orientation_label(p, 2), OrientationLabel::pair(Orientation::MG, Orientation::NONE));
}

TEST(Orientation, UnalignedSingle) {
  auto p = with_links(3, 2, {{1, 2}, {3, 1}});
  EXPECT_EQ(orientation_label(p, 2), OrientationLabel::unaligned(Orientation::RA));
  auto q = with_links(3, 3, {{1, 1}, {3, 3}});
  EXPECT_EQ(orientation_label(q, 2), OrientationLabel::unaligned(Orientation::MG));
}

TEST(Orientation, OverlapIsReported) {
  // f2 -> {e1, e3}, f1 -> {e2}: the left span's hull sits inside f2's hull.
  auto p = with_links(2, 3, {{2, 1}, {2, 3}, {1, 2}});
  try {
    orientation_label(p, 2);
    FAIL() << "expected overlap";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::orientation_overlap);
    EXPECT_STREQ(e.category(), "orientation-overlap");
  }
}

TEST(Orientation, LabelIdsAreBijective) {
  std::vector<bool> seen(kOrientationLabels, false);
  for (int l = 0; l < kOrientationCount; ++l)
    for (int r = 0; r < kOrientationCount; ++r) {
      auto lab = OrientationLabel::pair(static_cast<Orientation>(l), static_cast<Orientation>(r));
      ASSERT_LT(lab.id(), 25u);
      EXPECT_FALSE(seen[lab.id()]);
      seen[lab.id()] = true;
      EXPECT_EQ(OrientationLabel::from_id(lab.id()), lab);
    }
  for (int o = 0; o < kOrientationCount; ++o) {
    auto lab = OrientationLabel::unaligned(static_cast<Orientation>(o));
    ASSERT_GE(lab.id(), 25u);
    ASSERT_LT(lab.id(), 30u);
    EXPECT_FALSE(seen[lab.id()]);
    seen[lab.id()] = true;
    EXPECT_EQ(OrientationLabel::from_id(lab.id()), lab);
  }
  EXPECT_EQ(OrientationLabel::pair(Orientation::RA, Orientation::RA).id(), 6u);
  EXPECT_THROW(OrientationLabel::from_id(30), Error);
}

TEST(Oracle, RandomPairsMatchBruteForce) {
  std::mt19937_64 rng(20240611);
  std::size_t overlaps = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto p = fixtures::random_pair(rng, 10, trial % 2 ? 0.15 : 0.35);
    EXPECT_EQ(target_affiliation(p), oracle::affiliation(p)) << "trial " << trial;
    for (int j = 1; j <= p.src_len(); ++j) {
      auto got = orientation_spans(p, j);
      auto want = oracle::spans(p, j);
      EXPECT_EQ(got.left, want.left) << "trial " << trial << " j " << j;
      EXPECT_EQ(got.right, want.right) << "trial " << trial << " j " << j;
      auto expect = oracle::orientation(p, j);
      if (expect) {
        EXPECT_EQ(orientation_label(p, j), *expect) << "trial " << trial << " j " << j;
      } else {
        ++overlaps;
        EXPECT_THROW(orientation_label(p, j), Error);
      }
    }
  }
  RecordProperty("overlaps", static_cast<int>(overlaps));
}

TEST(Oracle, HullsDisjointForClassifiedWords) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    auto p = fixtures::random_pair(rng, 8, 0.2);
    LinkIndex index(p);
    for (int j = 1; j <= p.src_len(); ++j) {
      auto anchor = index.target_hull(j);
      if (!anchor || !oracle::orientation(p, j)) continue;
      auto s = orientation_spans(index, j);
      for (const auto& span : {s.left, s.right}) {
        if (!span) continue;
        auto h = oracle::hull(p, span->lo, span->hi);
        EXPECT_TRUE(h.second < anchor->lo || h.first > anchor->hi);
      }
    }
  }
}

TEST(Oracle, AffiliationNeverFabricated) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    auto p = fixtures::random_pair(rng, 10, 0.1);
    auto a = target_affiliation(p);
    if (!a) continue;
    for (int v : *a) EXPECT_TRUE(oracle::aligned(p, v));
  }
}
