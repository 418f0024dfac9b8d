#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mtnn/alignment.hpp"
#include "mtnn/corpus.hpp"

namespace mtnn {

class ByteWriter;
class ByteReader;

enum class TaskKind : std::uint8_t { jmo = 0, tcm = 1, ori = 2, fert = 3 };

// How TCM/LTM treats unaligned source words.
enum class NullMode : std::uint8_t { predict_null = 0, skip_unaligned = 1 };

enum class LabelSpace : std::uint8_t { target_vocab, target_vocab_null, orientation30, binary };

struct TaskSpec {
  TaskKind kind = TaskKind::jmo;
  int n = 1;       // target history length, JMO only
  int m = 0;       // source half-window
  int k = 0;       // affiliation offset, JMO only
  int dprime = 0;  // target offset, TCM only
  NullMode null_mode = NullMode::skip_unaligned;
  std::uint32_t label_count = 0;

  static TaskSpec jmo(int n, int m, int k, std::uint32_t target_vocab_size);
  static TaskSpec tcm(int m, int dprime, NullMode mode, std::uint32_t target_vocab_size);
  static TaskSpec ori(int m);
  static TaskSpec fert(int m);

  std::size_t width() const;
  std::size_t history_slots() const { return kind == TaskKind::jmo ? static_cast<std::size_t>(n - 1) : 0; }
  // Vocabulary side of each context slot, in slot order.
  std::vector<Side> slot_sides() const;
  LabelSpace label_space() const;
  bool hypothesis_enumerating() const { return kind == TaskKind::jmo; }

  // Short feature name: jm, jmo1, ltm, tcm-1, tcm+1, ori, fert.
  std::string name() const;

  bool operator==(const TaskSpec&) const = default;
};

struct TaskExample {
  std::vector<TokenId> context;
  std::uint32_t label = 0;
  bool operator==(const TaskExample&) const = default;
};

// Hypothesis-enumerating: one example per target position. Empty for
// pairs without links.
std::vector<TaskExample> extract_jmo(const AlignedSentencePair& pair,
                                     const std::vector<int>& affiliation, int n, int m, int k);
std::vector<TaskExample> extract_tcm(const AlignedSentencePair& pair,
                                     const std::vector<std::optional<int>>& attachment, int m,
                                     int dprime, NullMode mode);
// Source words whose orientation cannot be classified (overlapping hulls)
// are skipped and counted in `skipped` when given.
std::vector<TaskExample> extract_ori(const AlignedSentencePair& pair, int m,
                                     std::size_t* skipped = nullptr);
std::vector<TaskExample> extract_fert(const AlignedSentencePair& pair, int m);

// Dispatches on spec.kind and derives affiliations as needed.
std::vector<TaskExample> extract(const TaskSpec& spec, const AlignedSentencePair& pair,
                                 std::size_t* skipped = nullptr);

struct ExtractStats {
  std::size_t sentences = 0;
  std::size_t skipped_sentences = 0;  // zero-link pairs for JMO
  std::size_t skipped_words = 0;      // unclassifiable orientations
};

// Sentence-order extraction over a corpus.
std::vector<TaskExample> extract_corpus(const TaskSpec& spec,
                                        const std::vector<AlignedSentencePair>& pairs,
                                        ExtractStats* stats = nullptr);

// --- example shards -------------------------------------------------------

struct Shard {
  TaskSpec spec;
  std::vector<TaskExample> examples;
};

std::string encode_shard(const TaskSpec& spec, const std::vector<TaskExample>& examples);
Shard decode_shard(std::string_view bytes);
void write_shard(const std::vector<TaskExample>& examples, const TaskSpec& spec,
                 const std::string& path);
Shard read_shard(const std::string& path);

// Kind tag plus (n, m, k, d') as stored in shard and model headers.
void write_task_spec(ByteWriter& w, const TaskSpec& spec);
TaskSpec read_task_spec(ByteReader& r);

}  // namespace mtnn
