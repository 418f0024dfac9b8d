#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mtnn {

using TokenId = std::uint32_t;

enum class Side : std::uint8_t { source = 0, target = 1 };

namespace reserved {
inline constexpr TokenId unk = 0;
inline constexpr TokenId bos = 1;
inline constexpr TokenId eos = 2;
inline constexpr TokenId null = 3;
inline constexpr TokenId count = 4;
}  // namespace reserved

// Dense id <-> surface-form map. Ids 0..3 are always <unk>, <s>, </s>, <null>;
// the rest are ordered by descending corpus frequency, then by surface form.
class Vocabulary {
 public:
  explicit Vocabulary(Side side = Side::source);

  static Vocabulary build(std::istream& tokens, std::uint64_t min_count, std::size_t max_size,
                          Side side);
  static Vocabulary build_file(const std::string& token_file, std::uint64_t min_count,
                               std::size_t max_size, Side side);

  // Vocabulary file: `surface<TAB>count` per line, in id order.
  static Vocabulary load(std::istream& in, Side side);
  static Vocabulary load_file(const std::string& path, Side side);
  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;

  TokenId lookup(std::string_view form) const;
  const std::string& form(TokenId id) const { return forms_.at(id); }
  std::uint64_t count(TokenId id) const { return counts_.at(id); }
  std::size_t size() const { return forms_.size(); }
  Side side() const { return side_; }

  // FNV-1a over the forms in id order; identifies an id assignment.
  std::uint64_t digest() const;

  bool operator==(const Vocabulary& other) const {
    return side_ == other.side_ && forms_ == other.forms_ && counts_ == other.counts_;
  }

  // Appends an entry; used by loaders. Throws on duplicate forms.
  void add(std::string form, std::uint64_t count);

 private:
  Side side_;
  std::vector<std::string> forms_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, TokenId> index_;
};

bool is_reserved_form(std::string_view form);

// Alignment link with 1-based positions: source position j, target position i.
struct Link {
  int j = 0;
  int i = 0;
  auto operator<=>(const Link&) const = default;
};

struct AlignedSentencePair {
  std::vector<TokenId> src;
  std::vector<TokenId> tgt;
  std::vector<Link> links;  // sorted by (j, i), unique

  int src_len() const { return static_cast<int>(src.size()); }
  int tgt_len() const { return static_cast<int>(tgt.size()); }
};

// Sorts and de-duplicates links; validates bounds (ErrorCode::validation).
void normalize_links(AlignedSentencePair& pair, std::size_t sentence_index = 0);

// Parses one alignment line of 0-based `j-i` pairs into 1-based links.
std::vector<Link> parse_alignment_line(std::string_view line);

std::vector<TokenId> map_tokens(std::string_view line, const Vocabulary& vocab);

std::vector<AlignedSentencePair> parse_bitext(std::istream& src, std::istream& tgt,
                                              std::istream& align, const Vocabulary& src_vocab,
                                              const Vocabulary& tgt_vocab);
std::vector<AlignedSentencePair> parse_bitext(const std::string& src_path,
                                              const std::string& tgt_path,
                                              const std::string& align_path,
                                              const Vocabulary& src_vocab,
                                              const Vocabulary& tgt_vocab);

struct ContextWindow {
  std::vector<TokenId> ids;
  int center = 0;
  int m = 0;
};

// 2m+1 ids around 1-based `center`; positions before the sentence read <s>,
// positions after it read </s>.
ContextWindow window(std::span<const TokenId> sentence, int center, int m);

}  // namespace mtnn
