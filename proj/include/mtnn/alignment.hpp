#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtnn/corpus.hpp"

namespace mtnn {

// Closed 1-based interval of positions.
struct Interval {
  int lo = 0;
  int hi = 0;
  bool operator==(const Interval&) const = default;
};

// Per-sentence link index used by every analysis below.
class LinkIndex {
 public:
  explicit LinkIndex(const AlignedSentencePair& pair);

  // Sorted linked positions on the other side (1-based).
  const std::vector<int>& targets_of(int j) const { return src_to_tgt_[j - 1]; }
  const std::vector<int>& sources_of(int i) const { return tgt_to_src_[i - 1]; }
  bool source_aligned(int j) const { return !targets_of(j).empty(); }
  std::optional<Interval> target_hull(int j) const;

  int src_len() const { return static_cast<int>(src_to_tgt_.size()); }
  int tgt_len() const { return static_cast<int>(tgt_to_src_.size()); }
  bool empty() const { return link_count_ == 0; }

 private:
  std::vector<std::vector<int>> src_to_tgt_;
  std::vector<std::vector<int>> tgt_to_src_;
  std::size_t link_count_ = 0;
};

// a_i for every target position, or nullopt when the pair has no links.
std::optional<std::vector<int>> target_affiliation(const AlignedSentencePair& pair);

// b_j: left-most linked target position of each source word, if any.
std::vector<std::optional<int>> source_attachment(const AlignedSentencePair& pair);

int fertility_label(const AlignedSentencePair& pair, int j);

struct SpanPair {
  std::optional<Interval> left;
  std::optional<Interval> right;
};

// Maximal orientation spans: the longest tight, alignment-consistent source
// intervals ending at j-1 and starting at j+1.
SpanPair orientation_spans(const AlignedSentencePair& pair, int j);
SpanPair orientation_spans(const LinkIndex& index, int j);

enum class Orientation : std::uint8_t { MA = 0, RA = 1, MG = 2, RG = 3, NONE = 4 };
inline constexpr int kOrientationCount = 5;
inline constexpr int kOrientationLabels = 30;

struct OrientationLabel {
  enum class Kind : std::uint8_t { aligned_pair, unaligned_single };
  Kind kind = Kind::unaligned_single;
  Orientation left = Orientation::NONE;    // aligned_pair only
  Orientation right = Orientation::NONE;   // aligned_pair only
  Orientation single = Orientation::NONE;  // unaligned_single only

  static OrientationLabel pair(Orientation l, Orientation r) {
    return {Kind::aligned_pair, l, r, Orientation::NONE};
  }
  static OrientationLabel unaligned(Orientation o) {
    return {Kind::unaligned_single, Orientation::NONE, Orientation::NONE, o};
  }

  // Aligned pairs occupy 0..24 (left-major), unaligned singles 25..29.
  std::uint32_t id() const;
  static OrientationLabel from_id(std::uint32_t id);

  bool operator==(const OrientationLabel&) const = default;
};

const char* orientation_name(Orientation o);
std::string to_string(const OrientationLabel& label);

// Throws ErrorCode::orientation_overlap when a neighbor span's target hull
// intersects the anchor's hull (reachable only with discontinuous links).
OrientationLabel orientation_label(const AlignedSentencePair& pair, int j);
OrientationLabel orientation_label(const LinkIndex& index, int j);

}  // namespace mtnn
