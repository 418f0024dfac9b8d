#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mtnn {

enum class SynthPattern { monotone, reversal, block_swap, collocation };

SynthPattern parse_synth_pattern(std::string_view name);

// Number of source word classes in the collocation pattern; a target word is
// the XOR of the classes of the two neighboring source words.
inline constexpr int kCollocationClasses = 4;

struct SynthCorpus {
  std::vector<std::string> src;
  std::vector<std::string> tgt;
  std::vector<std::string> align;  // 0-based `j-i` pairs
};

// Seed-deterministic synthetic bitext with known alignments.
SynthCorpus gen_synth(SynthPattern pattern, std::size_t sentences, std::size_t vocab_size,
                      std::uint64_t seed);

// Writes <prefix>.src, <prefix>.tgt, <prefix>.align.
void write_synth(const SynthCorpus& corpus, const std::string& prefix);

}  // namespace mtnn
