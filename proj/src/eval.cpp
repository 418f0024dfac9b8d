#include "mtnn/eval.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "mtnn/error.hpp"

namespace mtnn {
namespace {

constexpr std::size_t kEvalChunk = 256;

template <typename Fn>
void for_each_chunk(const NetworkParams<double>& params, const TaskWiring& wiring,
                    std::size_t width, const std::vector<TaskExample>& rows, Fn&& fn) {
  for (std::size_t start = 0; start < rows.size(); start += kEvalChunk) {
    std::span<const TaskExample> part(rows.data() + start,
                                      std::min(kEvalChunk, rows.size() - start));
    auto batch = make_batch(part, width);
    auto trace = forward(params, wiring, batch, 0.0);
    fn(batch, trace);
  }
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

double average_log_likelihood(const NetworkParams<double>& params, const TaskWiring& wiring,
                              const TaskSpec& task, const std::vector<TaskExample>& examples) {
  if (examples.empty()) throw Error(ErrorCode::empty_shard, "average log-likelihood of no examples");
  double total = 0;
  for_each_chunk(params, wiring, task.width(), examples, [&](const Batch& b, const auto& tr) {
    for (std::size_t r = 0; r < b.size(); ++r) {
      auto row = static_cast<Eigen::Index>(r);
      total += tr.logits(row, b.labels[r]) - tr.log_z[row];
    }
  });
  return total / static_cast<double>(examples.size());
}

double avg_loglik(const Model& model, std::size_t task, const std::vector<TaskExample>& examples) {
  if (task >= model.spec.tasks.size()) throw Error(ErrorCode::feature_mismatch, "no such task head");
  return average_log_likelihood(model.params.cast<double>(), model.wiring[task],
                                model.spec.tasks[task], examples);
}

double avg_loglik(const Model& model, const Shard& shard) {
  for (std::size_t t = 0; t < model.spec.tasks.size(); ++t)
    if (model.spec.tasks[t] == shard.spec) return avg_loglik(model, t, shard.examples);
  throw Error(ErrorCode::feature_mismatch,
              "model has no head for shard task " + shard.spec.name());
}

double perplexity(const Model& model, std::size_t task, const std::vector<TaskExample>& examples) {
  return std::exp(-avg_loglik(model, task, examples));
}

LikelihoodReport likelihood_report(const Model& model, const std::vector<Shard>& shards) {
  LikelihoodReport report;
  for (const auto& shard : shards) {
    report.tasks.push_back(shard.spec.name());
    report.avg_loglik.push_back(avg_loglik(model, shard));
    report.counts.push_back(shard.examples.size());
  }
  for (double v : report.avg_loglik) report.group_sum += v;
  return report;
}

void FeatureSet::add(const Model& model) {
  if (!models_.empty()) {
    const auto& first = models_.front()->model;
    if (first.src_vocab.digest() != model.src_vocab.digest() ||
        first.tgt_vocab.digest() != model.tgt_vocab.digest())
      throw Error(ErrorCode::feature_mismatch, "models were trained with different vocabularies");
  }
  auto loaded = std::make_shared<Loaded>(Loaded{model, model.params.cast<double>()});
  for (std::size_t t = 0; t < model.spec.tasks.size(); ++t) {
    auto name = model.spec.tasks[t].name();
    if (find(name)) throw Error(ErrorCode::feature_mismatch, "feature " + name + " loaded twice");
    features_.push_back({name, model.spec.tasks[t], models_.size(), t});
  }
  models_.push_back(std::move(loaded));
}

const FeatureSet::Feature* FeatureSet::find(const std::string& name) const {
  for (const auto& f : features_)
    if (f.name == name) return &f;
  return nullptr;
}

const Vocabulary& FeatureSet::src_vocab() const {
  if (models_.empty()) throw Error(ErrorCode::feature_mismatch, "no models loaded");
  return models_.front()->model.src_vocab;
}

const Vocabulary& FeatureSet::tgt_vocab() const {
  if (models_.empty()) throw Error(ErrorCode::feature_mismatch, "no models loaded");
  return models_.front()->model.tgt_vocab;
}

std::vector<double> FeatureSet::row_scores(const Feature& feature,
                                           const std::vector<TaskExample>& rows,
                                           Normalization mode, std::vector<double>* log_z) const {
  const auto& loaded = *models_.at(feature.model);
  std::vector<double> out;
  out.reserve(rows.size());
  for_each_chunk(loaded.params, loaded.model.wiring[feature.task], feature.spec.width(), rows,
                 [&](const Batch& b, const auto& tr) {
                   for (std::size_t r = 0; r < b.size(); ++r) {
                     auto row = static_cast<Eigen::Index>(r);
                     double z = tr.logits(row, b.labels[r]);
                     out.push_back(mode == Normalization::exact ? z - tr.log_z[row] : z);
                     if (log_z) log_z->push_back(tr.log_z[row]);
                   }
                 });
  return out;
}

const FeatureScore* HypothesisScore::find(const std::string& name) const {
  for (const auto& f : features)
    if (f.name == name) return &f;
  return nullptr;
}

HypothesisScore score_hypothesis(const FeatureSet& features, std::span<const TokenId> source,
                                 std::span<const TokenId> hypothesis,
                                 const std::vector<Link>& links,
                                 const std::map<std::string, double>& weights,
                                 Normalization mode) {
  if (features.empty()) throw Error(ErrorCode::feature_mismatch, "no features loaded");
  if (links.empty())
    throw Error(ErrorCode::missing_alignment, "hypothesis has no alignment; affiliation undefined");
  for (const auto& [name, _] : weights)
    if (name != "srcen" && !features.find(name))
      throw Error(ErrorCode::feature_mismatch, "weight given for unknown feature " + name);

  AlignedSentencePair pair;
  pair.src.assign(source.begin(), source.end());
  pair.tgt.assign(hypothesis.begin(), hypothesis.end());
  pair.links = links;
  normalize_links(pair);

  HypothesisScore score;
  score.src_tokens = pair.src.size();
  score.tgt_tokens = pair.tgt.size();

  for (const auto& f : features.features()) {
    auto rows = extract(f.spec, pair, &score.unclassified_orientations);
    std::vector<double> log_z;
    auto values = features.row_scores(f, rows, mode, &log_z);
    FeatureScore fs;
    fs.name = f.name;
    fs.positions = rows.size();
    for (double v : values) fs.total += v;
    for (double z : log_z) fs.log_z_sum += z;
    score.features.push_back(fs);
  }

  const auto* fert = features.find("fert");
  const auto* ori = features.find("ori");
  const auto* ltm = features.find("ltm");
  if (fert && ori && ltm) {
    LinkIndex index(pair);
    auto attach = source_attachment(pair);
    const int len = pair.src_len();
    const int tlen = pair.tgt_len();

    std::vector<TaskExample> fert_rows, ori_rows;
    std::vector<const FeatureSet::Feature*> translation;
    for (const auto& f : features.features())
      if (f.spec.kind == TaskKind::tcm) translation.push_back(&f);
    std::vector<std::vector<TaskExample>> translation_rows(translation.size());

    for (int j = 1; j <= len; ++j) {
      fert_rows.push_back({window(pair.src, j, fert->spec.m).ids,
                           index.source_aligned(j) ? 1u : 0u});
      try {
        ori_rows.push_back({window(pair.src, j, ori->spec.m).ids, orientation_label(index, j).id()});
      } catch (const Error& e) {
        if (e.code() != ErrorCode::orientation_overlap) throw;
      }
      if (!attach[j - 1]) continue;
      for (std::size_t f = 0; f < translation.size(); ++f) {
        int pos = *attach[j - 1] + translation[f]->spec.dprime;
        TokenId label = pos < 1 ? reserved::bos : pos > tlen ? reserved::eos : pair.tgt[pos - 1];
        translation_rows[f].push_back({window(pair.src, j, translation[f]->spec.m).ids, label});
      }
    }
    double combined = 0;
    for (double v : features.row_scores(*fert, fert_rows, mode)) combined += v;
    for (double v : features.row_scores(*ori, ori_rows, mode)) combined += v;
    for (std::size_t f = 0; f < translation.size(); ++f)
      for (double v : features.row_scores(*translation[f], translation_rows[f], mode)) combined += v;
    score.combined = combined;
  }

  for (const auto& [name, w] : weights) {
    if (name == "srcen") {
      if (score.combined) score.weighted_total += w * *score.combined;
    } else {
      score.weighted_total += w * score.find(name)->total;
    }
  }
  return score;
}

NbestEntry parse_nbest_line(const std::string& line) {
  NbestEntry entry;
  entry.line = line;
  if (!entry.line.empty() && entry.line.back() == '\r') entry.line.pop_back();
  std::vector<std::string> fields;
  std::size_t pos = 0;
  for (;;) {
    auto sep = entry.line.find("|||", pos);
    fields.push_back(trim(entry.line.substr(pos, sep == std::string::npos ? sep : sep - pos)));
    if (sep == std::string::npos) break;
    pos = sep + 3;
  }
  if (fields.size() < 2) throw Error(ErrorCode::parse, "n-best line lacks '|||' fields");
  if (fields.size() < 3 || fields[2].empty())
    throw Error(ErrorCode::missing_alignment, "n-best line carries no alignment");
  try {
    std::size_t used = 0;
    entry.id = std::stoul(fields[0], &used);
    if (used != fields[0].size()) throw std::invalid_argument("id");
  } catch (const std::exception&) {
    throw Error(ErrorCode::parse, "bad n-best sentence id '" + fields[0] + "'");
  }
  entry.hypothesis = fields[1];
  entry.links = parse_alignment_line(fields[2]);
  return entry;
}

std::string format_scores(const HypothesisScore& score) {
  std::ostringstream out;
  out << " |||";
  char buf[64];
  auto emit = [&](const std::string& name, double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    out << ' ' << name << '=' << buf;
  };
  for (const auto& f : score.features) emit(f.name, f.total);
  if (score.combined) emit("srcen", *score.combined);
  return out.str();
}

std::size_t score_nbest(const FeatureSet& features, const std::vector<std::string>& source_lines,
                        std::istream& nbest, std::ostream& out,
                        const std::map<std::string, double>& weights, Normalization mode) {
  std::string line;
  std::size_t count = 0;
  while (std::getline(nbest, line)) {
    if (trim(line).empty()) continue;
    auto entry = parse_nbest_line(line);
    if (entry.id >= source_lines.size())
      throw Error(ErrorCode::validation,
                  "n-best id " + std::to_string(entry.id) + " has no source sentence");
    auto src = map_tokens(source_lines[entry.id], features.src_vocab());
    auto hyp = map_tokens(entry.hypothesis, features.tgt_vocab());
    auto score = score_hypothesis(features, src, hyp, entry.links, weights, mode);
    score.sentence_id = std::to_string(entry.id);
    out << entry.line << format_scores(score);
    if (!weights.empty()) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6f", score.weighted_total);
      out << " total=" << buf;
    }
    out << '\n';
    ++count;
  }
  return count;
}

}  // namespace mtnn
