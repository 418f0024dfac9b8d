#include "mtnn/synth.hpp"

#include <fstream>
#include <random>

#include "mtnn/error.hpp"

namespace mtnn {
namespace {

constexpr std::size_t kMinLength = 4;
constexpr std::size_t kMaxLength = 12;

std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

std::string link(std::size_t j, std::size_t i) {
  return std::to_string(j) + "-" + std::to_string(i);
}

void write_lines(const std::vector<std::string>& lines, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace

SynthPattern parse_synth_pattern(std::string_view name) {
  if (name == "monotone") return SynthPattern::monotone;
  if (name == "reversal") return SynthPattern::reversal;
  if (name == "block-swap") return SynthPattern::block_swap;
  if (name == "collocation") return SynthPattern::collocation;
  throw Error(ErrorCode::config, "unknown synthetic pattern '" + std::string(name) + "'");
}

SynthCorpus gen_synth(SynthPattern pattern, std::size_t sentences, std::size_t vocab_size,
                      std::uint64_t seed) {
  if (sentences == 0 || vocab_size == 0)
    throw Error(ErrorCode::config, "synthetic corpus sizes must be positive");
  std::mt19937_64 rng(seed);
  SynthCorpus corpus;
  for (std::size_t s = 0; s < sentences; ++s) {
    const std::size_t len = kMinLength + draw(rng, kMaxLength - kMinLength + 1);
    std::vector<std::size_t> words(len);
    for (auto& w : words) w = draw(rng, vocab_size);

    // order[i] = 0-based source position translated at target position i
    std::vector<std::size_t> order(len);
    switch (pattern) {
      case SynthPattern::monotone:
      case SynthPattern::collocation:
        for (std::size_t i = 0; i < len; ++i) order[i] = i;
        break;
      case SynthPattern::reversal:
        for (std::size_t i = 0; i < len; ++i) order[i] = len - 1 - i;
        break;
      case SynthPattern::block_swap: {
        const std::size_t split = 1 + draw(rng, len - 1);
        std::size_t i = 0;
        for (std::size_t j = split; j < len; ++j) order[i++] = j;
        for (std::size_t j = 0; j < split; ++j) order[i++] = j;
        break;
      }
    }

    std::vector<std::string> src, tgt, align;
    for (auto w : words) src.push_back("s" + std::to_string(w));
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t j = order[i];
      if (pattern == SynthPattern::collocation) {
        auto cls = [&](std::ptrdiff_t p) -> std::size_t {
          if (p < 0 || p >= static_cast<std::ptrdiff_t>(len)) return 0;
          return words[static_cast<std::size_t>(p)] % kCollocationClasses;
        };
        auto j_signed = static_cast<std::ptrdiff_t>(j);
        tgt.push_back("c" + std::to_string(cls(j_signed - 1) ^ cls(j_signed + 1)));
      } else {
        tgt.push_back("t" + std::to_string(words[j]));
      }
      align.push_back(link(j, i));
    }
    corpus.src.push_back(join(src));
    corpus.tgt.push_back(join(tgt));
    corpus.align.push_back(join(align));
  }
  return corpus;
}

void write_synth(const SynthCorpus& corpus, const std::string& prefix) {
  write_lines(corpus.src, prefix + ".src");
  write_lines(corpus.tgt, prefix + ".tgt");
  write_lines(corpus.align, prefix + ".align");
}

}  // namespace mtnn
