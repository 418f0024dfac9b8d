#include "mtnn/corpus.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "mtnn/error.hpp"

namespace mtnn {
namespace {

constexpr std::array<std::string_view, reserved::count> kReservedForms = {"<unk>", "<s>", "</s>",
                                                                          "<null>"};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r'))
      ++pos;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r') ++end;
    if (end > pos) out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  return in;
}

}  // namespace

bool is_reserved_form(std::string_view form) {
  return std::find(kReservedForms.begin(), kReservedForms.end(), form) != kReservedForms.end();
}

Vocabulary::Vocabulary(Side side) : side_(side) {
  for (auto form : kReservedForms) add(std::string(form), 0);
}

void Vocabulary::add(std::string form, std::uint64_t count) {
  auto id = static_cast<TokenId>(forms_.size());
  if (!index_.emplace(form, id).second)
    throw Error(ErrorCode::validation, "duplicate vocabulary entry '" + form + "'");
  forms_.push_back(std::move(form));
  counts_.push_back(count);
}

Vocabulary Vocabulary::build(std::istream& tokens, std::uint64_t min_count, std::size_t max_size,
                             Side side) {
  if (min_count < 1) throw Error(ErrorCode::contract, "min_count must be >= 1");
  if (max_size < reserved::count) throw Error(ErrorCode::contract, "max_size must be >= 4");

  std::map<std::string, std::uint64_t, std::less<>> freq;
  std::string line;
  while (std::getline(tokens, line)) {
    for (auto tok : split_ws(line)) {
      if (is_reserved_form(tok)) continue;
      auto it = freq.find(tok);
      if (it == freq.end())
        freq.emplace(std::string(tok), 1);
      else
        ++it->second;
    }
  }

  std::vector<std::pair<std::string, std::uint64_t>> types(freq.begin(), freq.end());
  std::stable_sort(types.begin(), types.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary vocab(side);
  for (auto& [form, count] : types) {
    if (vocab.size() >= max_size || count < min_count) break;
    vocab.add(form, count);
  }
  return vocab;
}

Vocabulary Vocabulary::build_file(const std::string& token_file, std::uint64_t min_count,
                                  std::size_t max_size, Side side) {
  auto in = open_or_throw(token_file);
  return build(in, min_count, max_size, side);
}

Vocabulary Vocabulary::load(std::istream& in, Side side) {
  Vocabulary vocab(side);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorCode::parse, "vocabulary line " + std::to_string(lineno) + ": missing tab");
    std::string form = line.substr(0, tab);
    std::uint64_t count = 0;
    auto digits = std::string_view(line).substr(tab + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), count);
    if (ec != std::errc() || ptr != digits.data() + digits.size())
      throw Error(ErrorCode::parse, "vocabulary line " + std::to_string(lineno) + ": bad count");
    if (lineno <= reserved::count) {
      if (form != kReservedForms[lineno - 1])
        throw Error(ErrorCode::parse, "vocabulary line " + std::to_string(lineno) +
                                          ": expected reserved entry " +
                                          std::string(kReservedForms[lineno - 1]));
      continue;
    }
    vocab.add(std::move(form), count);
  }
  if (lineno < reserved::count)
    throw Error(ErrorCode::parse, "vocabulary file lacks the reserved entries");
  return vocab;
}

Vocabulary Vocabulary::load_file(const std::string& path, Side side) {
  auto in = open_or_throw(path);
  return load(in, side);
}

void Vocabulary::save(std::ostream& out) const {
  for (std::size_t id = 0; id < forms_.size(); ++id) out << forms_[id] << '\t' << counts_[id] << '\n';
}

void Vocabulary::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  save(out);
}

TokenId Vocabulary::lookup(std::string_view form) const {
  auto it = index_.find(std::string(form));
  return it == index_.end() ? reserved::unk : it->second;
}

std::uint64_t Vocabulary::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (const auto& f : forms_) {
    for (char c : f) mix(static_cast<unsigned char>(c));
    mix('\n');
  }
  return h;
}

std::vector<Link> parse_alignment_line(std::string_view line) {
  std::vector<Link> links;
  for (auto tok : split_ws(line)) {
    auto dash = tok.find('-');
    int j = 0, i = 0;
    bool ok = dash != std::string_view::npos && dash > 0 && dash + 1 < tok.size();
    if (ok) {
      auto [p1, e1] = std::from_chars(tok.data(), tok.data() + dash, j);
      auto [p2, e2] = std::from_chars(tok.data() + dash + 1, tok.data() + tok.size(), i);
      ok = e1 == std::errc() && p1 == tok.data() + dash && e2 == std::errc() &&
           p2 == tok.data() + tok.size() && j >= 0 && i >= 0;
    }
    if (!ok) throw Error(ErrorCode::parse, "malformed alignment pair '" + std::string(tok) + "'");
    links.push_back({j + 1, i + 1});
  }
  return links;
}

void normalize_links(AlignedSentencePair& pair, std::size_t sentence_index) {
  std::sort(pair.links.begin(), pair.links.end());
  pair.links.erase(std::unique(pair.links.begin(), pair.links.end()), pair.links.end());
  for (const auto& l : pair.links) {
    if (l.j < 1 || l.j > pair.src_len() || l.i < 1 || l.i > pair.tgt_len())
      throw Error(ErrorCode::validation,
                  "sentence " + std::to_string(sentence_index + 1) + ": alignment link " +
                      std::to_string(l.j - 1) + "-" + std::to_string(l.i - 1) +
                      " out of bounds");
  }
}

std::vector<TokenId> map_tokens(std::string_view line, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  for (auto tok : split_ws(line)) ids.push_back(vocab.lookup(tok));
  return ids;
}

std::vector<AlignedSentencePair> parse_bitext(std::istream& src, std::istream& tgt,
                                              std::istream& align, const Vocabulary& src_vocab,
                                              const Vocabulary& tgt_vocab) {
  std::vector<AlignedSentencePair> pairs;
  std::string s, t, a;
  std::size_t lineno = 0;
  for (;;) {
    bool hs = static_cast<bool>(std::getline(src, s));
    bool ht = static_cast<bool>(std::getline(tgt, t));
    bool ha = static_cast<bool>(std::getline(align, a));
    if (!hs && !ht && !ha) break;
    ++lineno;
    if (!(hs && ht && ha))
      throw Error(ErrorCode::ingestion,
                  "line count mismatch at line " + std::to_string(lineno) + " (one input ended)");
    AlignedSentencePair pair;
    pair.src = map_tokens(s, src_vocab);
    pair.tgt = map_tokens(t, tgt_vocab);
    try {
      pair.links = parse_alignment_line(a);
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(lineno) + ": " + e.what());
    }
    normalize_links(pair, lineno - 1);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<AlignedSentencePair> parse_bitext(const std::string& src_path,
                                              const std::string& tgt_path,
                                              const std::string& align_path,
                                              const Vocabulary& src_vocab,
                                              const Vocabulary& tgt_vocab) {
  auto s = open_or_throw(src_path);
  auto t = open_or_throw(tgt_path);
  auto a = open_or_throw(align_path);
  return parse_bitext(s, t, a, src_vocab, tgt_vocab);
}

ContextWindow window(std::span<const TokenId> sentence, int center, int m) {
  const int len = static_cast<int>(sentence.size());
  if (m < 0 || center < 1 - m || center > len + m)
    throw Error(ErrorCode::contract, "window center " + std::to_string(center) +
                                         " outside padded range for m=" + std::to_string(m));
  ContextWindow w;
  w.center = center;
  w.m = m;
  w.ids.reserve(static_cast<std::size_t>(2 * m + 1));
  for (int p = center - m; p <= center + m; ++p) {
    if (p < 1)
      w.ids.push_back(reserved::bos);
    else if (p > len)
      w.ids.push_back(reserved::eos);
    else
      w.ids.push_back(sentence[static_cast<std::size_t>(p - 1)]);
  }
  return w;
}

}  // namespace mtnn
