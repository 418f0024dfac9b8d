#include "mtnn/extract.hpp"

#include "mtnn/error.hpp"

namespace mtnn {

TaskSpec TaskSpec::jmo(int n, int m, int k, std::uint32_t target_vocab_size) {
  if (n < 1 || m < 0 || k < 0) throw Error(ErrorCode::contract, "jmo requires n>=1, m>=0, k>=0");
  TaskSpec s;
  s.kind = TaskKind::jmo;
  s.n = n;
  s.m = m;
  s.k = k;
  s.label_count = target_vocab_size;
  return s;
}

TaskSpec TaskSpec::tcm(int m, int dprime, NullMode mode, std::uint32_t target_vocab_size) {
  if (m < 0) throw Error(ErrorCode::contract, "tcm requires m>=0");
  TaskSpec s;
  s.kind = TaskKind::tcm;
  s.n = 1;
  s.m = m;
  s.dprime = dprime;
  s.null_mode = mode;
  s.label_count = target_vocab_size;
  return s;
}

TaskSpec TaskSpec::ori(int m) {
  if (m < 0) throw Error(ErrorCode::contract, "ori requires m>=0");
  TaskSpec s;
  s.kind = TaskKind::ori;
  s.n = 1;
  s.m = m;
  s.label_count = kOrientationLabels;
  return s;
}

TaskSpec TaskSpec::fert(int m) {
  if (m < 0) throw Error(ErrorCode::contract, "fert requires m>=0");
  TaskSpec s;
  s.kind = TaskKind::fert;
  s.n = 1;
  s.m = m;
  s.label_count = 2;
  return s;
}

std::size_t TaskSpec::width() const {
  return history_slots() + static_cast<std::size_t>(2 * m + 1);
}

std::vector<Side> TaskSpec::slot_sides() const {
  std::vector<Side> sides(history_slots(), Side::target);
  sides.resize(width(), Side::source);
  return sides;
}

LabelSpace TaskSpec::label_space() const {
  switch (kind) {
    case TaskKind::jmo: return LabelSpace::target_vocab;
    case TaskKind::tcm:
      return dprime == 0 && null_mode == NullMode::predict_null ? LabelSpace::target_vocab_null
                                                                : LabelSpace::target_vocab;
    case TaskKind::ori: return LabelSpace::orientation30;
    case TaskKind::fert: return LabelSpace::binary;
  }
  return LabelSpace::binary;
}

std::string TaskSpec::name() const {
  switch (kind) {
    case TaskKind::jmo: return k == 0 ? "jm" : "jmo" + std::to_string(k);
    case TaskKind::tcm:
      if (dprime == 0) return "ltm";
      return dprime > 0 ? "tcm+" + std::to_string(dprime) : "tcm" + std::to_string(dprime);
    case TaskKind::ori: return "ori";
    case TaskKind::fert: return "fert";
  }
  return "?";
}

std::vector<TaskExample> extract_jmo(const AlignedSentencePair& pair,
                                     const std::vector<int>& affiliation, int n, int m, int k) {
  if (n < 1 || m < 0 || k < 0) throw Error(ErrorCode::contract, "jmo requires n>=1, m>=0, k>=0");
  std::vector<TaskExample> out;
  if (pair.links.empty()) return out;
  if (static_cast<int>(affiliation.size()) != pair.tgt_len())
    throw Error(ErrorCode::contract, "affiliation length differs from target length");

  const int len = pair.tgt_len();
  const std::size_t width = static_cast<std::size_t>(n - 1 + 2 * m + 1);
  out.reserve(static_cast<std::size_t>(len));
  for (int i = 1; i <= len; ++i) {
    TaskExample ex;
    ex.context.reserve(width);
    for (int h = 1; h < n; ++h) {
      int pos = i - h;
      ex.context.push_back(pos >= 1 ? pair.tgt[pos - 1] : reserved::bos);
    }
    int anchor = i - k;
    if (anchor < 1) {
      ex.context.resize(width, reserved::bos);
    } else {
      auto w = window(pair.src, affiliation[anchor - 1], m);
      ex.context.insert(ex.context.end(), w.ids.begin(), w.ids.end());
    }
    ex.label = pair.tgt[i - 1];
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<TaskExample> extract_tcm(const AlignedSentencePair& pair,
                                     const std::vector<std::optional<int>>& attachment, int m,
                                     int dprime, NullMode mode) {
  std::vector<TaskExample> out;
  const int len = pair.src_len();
  const int tlen = pair.tgt_len();
  for (int j = 1; j <= len; ++j) {
    const auto& b = attachment[j - 1];
    std::uint32_t label;
    if (b) {
      int pos = *b + dprime;
      label = pos < 1 ? reserved::bos : pos > tlen ? reserved::eos : pair.tgt[pos - 1];
    } else if (mode == NullMode::predict_null && dprime == 0) {
      label = reserved::null;
    } else {
      continue;
    }
    out.push_back({window(pair.src, j, m).ids, label});
  }
  return out;
}

std::vector<TaskExample> extract_ori(const AlignedSentencePair& pair, int m, std::size_t* skipped) {
  std::vector<TaskExample> out;
  LinkIndex index(pair);
  for (int j = 1; j <= pair.src_len(); ++j) {
    std::uint32_t label;
    try {
      label = orientation_label(index, j).id();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::orientation_overlap) throw;
      if (skipped) ++*skipped;
      continue;
    }
    out.push_back({window(pair.src, j, m).ids, label});
  }
  return out;
}

std::vector<TaskExample> extract_fert(const AlignedSentencePair& pair, int m) {
  std::vector<TaskExample> out;
  LinkIndex index(pair);
  out.reserve(pair.src.size());
  for (int j = 1; j <= pair.src_len(); ++j)
    out.push_back({window(pair.src, j, m).ids, index.source_aligned(j) ? 1u : 0u});
  return out;
}

std::vector<TaskExample> extract(const TaskSpec& spec, const AlignedSentencePair& pair,
                                 std::size_t* skipped) {
  switch (spec.kind) {
    case TaskKind::jmo: {
      auto a = target_affiliation(pair);
      if (!a) return {};
      return extract_jmo(pair, *a, spec.n, spec.m, spec.k);
    }
    case TaskKind::tcm:
      return extract_tcm(pair, source_attachment(pair), spec.m, spec.dprime, spec.null_mode);
    case TaskKind::ori: return extract_ori(pair, spec.m, skipped);
    case TaskKind::fert: return extract_fert(pair, spec.m);
  }
  return {};
}

std::vector<TaskExample> extract_corpus(const TaskSpec& spec,
                                        const std::vector<AlignedSentencePair>& pairs,
                                        ExtractStats* stats) {
  std::vector<TaskExample> out;
  ExtractStats local;
  for (const auto& pair : pairs) {
    ++local.sentences;
    if (spec.kind == TaskKind::jmo && pair.links.empty()) {
      ++local.skipped_sentences;
      continue;
    }
    auto ex = extract(spec, pair, &local.skipped_words);
    out.insert(out.end(), std::make_move_iterator(ex.begin()), std::make_move_iterator(ex.end()));
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace mtnn
