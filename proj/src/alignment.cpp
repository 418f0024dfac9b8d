#include "mtnn/alignment.hpp"

#include <algorithm>

#include "mtnn/error.hpp"

namespace mtnn {
namespace {

void check_position(int j, int len) {
  if (j < 1 || j > len)
    throw Error(ErrorCode::contract,
                "source position " + std::to_string(j) + " outside 1.." + std::to_string(len));
}

std::optional<Interval> hull_of(const LinkIndex& index, Interval span) {
  std::optional<Interval> hull;
  for (int s = span.lo; s <= span.hi; ++s) {
    auto h = index.target_hull(s);
    if (!h) continue;
    if (!hull)
      hull = h;
    else
      hull = Interval{std::min(hull->lo, h->lo), std::max(hull->hi, h->hi)};
  }
  return hull;
}

// Orientation of `neighbor` relative to `anchor`, where `neighbor_after` says
// whether the neighbor lies after the anchor on the source side.
Orientation classify(Interval anchor, Interval neighbor, bool neighbor_after) {
  bool target_after = neighbor.lo > anchor.hi;
  bool target_before = neighbor.hi < anchor.lo;
  if (!target_after && !target_before)
    throw Error(ErrorCode::orientation_overlap, "neighbor target hull overlaps anchor hull");
  bool monotone = neighbor_after ? target_after : target_before;
  bool adjacent = target_after ? neighbor.lo - anchor.hi == 1 : anchor.lo - neighbor.hi == 1;
  if (monotone) return adjacent ? Orientation::MA : Orientation::MG;
  return adjacent ? Orientation::RA : Orientation::RG;
}

}  // namespace

LinkIndex::LinkIndex(const AlignedSentencePair& pair)
    : src_to_tgt_(pair.src.size()), tgt_to_src_(pair.tgt.size()), link_count_(pair.links.size()) {
  for (const auto& l : pair.links) {
    src_to_tgt_[l.j - 1].push_back(l.i);
    tgt_to_src_[l.i - 1].push_back(l.j);
  }
  for (auto& v : src_to_tgt_) std::sort(v.begin(), v.end());
  for (auto& v : tgt_to_src_) std::sort(v.begin(), v.end());
}

std::optional<Interval> LinkIndex::target_hull(int j) const {
  const auto& t = targets_of(j);
  if (t.empty()) return std::nullopt;
  return Interval{t.front(), t.back()};
}

std::optional<std::vector<int>> target_affiliation(const AlignedSentencePair& pair) {
  LinkIndex index(pair);
  if (index.empty()) return std::nullopt;
  const int len = index.tgt_len();
  std::vector<int> direct(static_cast<std::size_t>(len), 0);
  for (int i = 1; i <= len; ++i) {
    const auto& s = index.sources_of(i);
    if (!s.empty()) direct[i - 1] = s[(s.size() - 1) / 2];
  }
  std::vector<int> a(direct);
  for (int i = 1; i <= len; ++i) {
    if (direct[i - 1] != 0) continue;
    for (int d = 1; d < len; ++d) {
      if (i + d <= len && direct[i + d - 1] != 0) {
        a[i - 1] = direct[i + d - 1];
        break;
      }
      if (i - d >= 1 && direct[i - d - 1] != 0) {
        a[i - 1] = direct[i - d - 1];
        break;
      }
    }
  }
  return a;
}

std::vector<std::optional<int>> source_attachment(const AlignedSentencePair& pair) {
  std::vector<std::optional<int>> b(pair.src.size());
  for (const auto& l : pair.links) {
    auto& slot = b[l.j - 1];
    if (!slot || l.i < *slot) slot = l.i;
  }
  return b;
}

int fertility_label(const AlignedSentencePair& pair, int j) {
  check_position(j, pair.src_len());
  return std::any_of(pair.links.begin(), pair.links.end(),
                     [j](const Link& l) { return l.j == j; })
             ? 1
             : 0;
}

SpanPair orientation_spans(const AlignedSentencePair& pair, int j) {
  return orientation_spans(LinkIndex(pair), j);
}

SpanPair orientation_spans(const LinkIndex& index, int j) {
  const int len = index.src_len();
  check_position(j, len);

  // The interval [lo, hi] is consistent iff every target inside its hull is
  // linked only to sources inside [lo, hi].
  auto consistent = [&index](int lo, int hi, Interval hull) {
    for (int i = hull.lo; i <= hull.hi; ++i) {
      const auto& s = index.sources_of(i);
      if (!s.empty() && (s.front() < lo || s.back() > hi)) return false;
    }
    return true;
  };

  SpanPair spans;
  if (j > 1 && index.source_aligned(j - 1)) {
    std::optional<Interval> hull;
    for (int s = j - 1; s >= 1; --s) {
      if (auto h = index.target_hull(s)) {
        hull = hull ? Interval{std::min(hull->lo, h->lo), std::max(hull->hi, h->hi)} : *h;
        if (consistent(s, j - 1, *hull)) spans.left = Interval{s, j - 1};
      }
    }
  }
  if (j < len && index.source_aligned(j + 1)) {
    std::optional<Interval> hull;
    for (int e = j + 1; e <= len; ++e) {
      if (auto h = index.target_hull(e)) {
        hull = hull ? Interval{std::min(hull->lo, h->lo), std::max(hull->hi, h->hi)} : *h;
        if (consistent(j + 1, e, *hull)) spans.right = Interval{j + 1, e};
      }
    }
  }
  return spans;
}

OrientationLabel orientation_label(const AlignedSentencePair& pair, int j) {
  return orientation_label(LinkIndex(pair), j);
}

OrientationLabel orientation_label(const LinkIndex& index, int j) {
  auto spans = orientation_spans(index, j);
  auto left_hull = spans.left ? hull_of(index, *spans.left) : std::nullopt;
  auto right_hull = spans.right ? hull_of(index, *spans.right) : std::nullopt;

  if (auto anchor = index.target_hull(j)) {
    auto ol = left_hull ? classify(*anchor, *left_hull, false) : Orientation::NONE;
    auto orr = right_hull ? classify(*anchor, *right_hull, true) : Orientation::NONE;
    return OrientationLabel::pair(ol, orr);
  }
  if (!left_hull || !right_hull) return OrientationLabel::unaligned(Orientation::NONE);
  return OrientationLabel::unaligned(classify(*left_hull, *right_hull, true));
}

std::uint32_t OrientationLabel::id() const {
  if (kind == Kind::aligned_pair)
    return static_cast<std::uint32_t>(left) * kOrientationCount + static_cast<std::uint32_t>(right);
  return kOrientationCount * kOrientationCount + static_cast<std::uint32_t>(single);
}

OrientationLabel OrientationLabel::from_id(std::uint32_t id) {
  if (id >= kOrientationLabels)
    throw Error(ErrorCode::contract, "orientation label id " + std::to_string(id) + " out of range");
  if (id < kOrientationCount * kOrientationCount)
    return pair(static_cast<Orientation>(id / kOrientationCount),
                static_cast<Orientation>(id % kOrientationCount));
  return unaligned(static_cast<Orientation>(id - kOrientationCount * kOrientationCount));
}

const char* orientation_name(Orientation o) {
  switch (o) {
    case Orientation::MA: return "MA";
    case Orientation::RA: return "RA";
    case Orientation::MG: return "MG";
    case Orientation::RG: return "RG";
    case Orientation::NONE: return "NONE";
  }
  return "?";
}

std::string to_string(const OrientationLabel& label) {
  if (label.kind == OrientationLabel::Kind::aligned_pair)
    return std::string("<") + orientation_name(label.left) + "," + orientation_name(label.right) +
           ">";
  return orientation_name(label.single);
}

}  // namespace mtnn
