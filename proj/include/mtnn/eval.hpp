#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtnn/mtl.hpp"

namespace mtnn {

// Mean natural-log probability of the labels under the full softmax, 64-bit.
double average_log_likelihood(const NetworkParams<double>& params, const TaskWiring& wiring,
                              const TaskSpec& task, const std::vector<TaskExample>& examples);
double avg_loglik(const Model& model, std::size_t task, const std::vector<TaskExample>& examples);
// Routes the shard to the model head with an identical task spec.
double avg_loglik(const Model& model, const Shard& shard);
double perplexity(const Model& model, std::size_t task, const std::vector<TaskExample>& examples);

struct LikelihoodReport {
  std::vector<std::string> tasks;
  std::vector<double> avg_loglik;
  std::vector<std::size_t> counts;
  double group_sum = 0;
};

LikelihoodReport likelihood_report(const Model& model, const std::vector<Shard>& shards);

enum class Normalization { exact, self_normalized };

// Loaded models addressed by feature name (jm, jmo2, ltm, tcm-1, ori, ...).
class FeatureSet {
 public:
  // All models must agree on vocabularies; names must be unique.
  void add(const Model& model);

  struct Feature {
    std::string name;
    TaskSpec spec;
    std::size_t model = 0;
    std::size_t task = 0;
  };

  const std::vector<Feature>& features() const { return features_; }
  const Feature* find(const std::string& name) const;
  const Vocabulary& src_vocab() const;
  const Vocabulary& tgt_vocab() const;
  bool empty() const { return features_.empty(); }

  // Per-row log score of `labels` given contexts; exact or raw logit.
  std::vector<double> row_scores(const Feature& feature, const std::vector<TaskExample>& rows,
                                 Normalization mode, std::vector<double>* log_z = nullptr) const;

 private:
  struct Loaded {
    Model model;
    NetworkParams<double> params;
  };
  std::vector<std::shared_ptr<const Loaded>> models_;
  std::vector<Feature> features_;
};

struct FeatureScore {
  std::string name;
  double total = 0;      // sum of per-position log scores
  double log_z_sum = 0;  // sum of logZ over the same positions
  std::size_t positions = 0;
};

struct HypothesisScore {
  std::string sentence_id;
  std::size_t src_tokens = 0;
  std::size_t tgt_tokens = 0;
  std::vector<FeatureScore> features;
  // Hierarchical source-enumerating score; present when fert, ori and ltm
  // are all loaded.
  std::optional<double> combined;
  std::size_t unclassified_orientations = 0;
  double weighted_total = 0;

  const FeatureScore* find(const std::string& name) const;
};

HypothesisScore score_hypothesis(const FeatureSet& features, std::span<const TokenId> source,
                                 std::span<const TokenId> hypothesis,
                                 const std::vector<Link>& links,
                                 const std::map<std::string, double>& weights = {},
                                 Normalization mode = Normalization::exact);

struct NbestEntry {
  std::size_t id = 0;
  std::string line;
  std::string hypothesis;
  std::vector<Link> links;  // 1-based
};

NbestEntry parse_nbest_line(const std::string& line);
std::string format_scores(const HypothesisScore& score);

// Reads `id ||| tokens ||| j-i pairs` lines and writes each line with the
// feature scores appended.
std::size_t score_nbest(const FeatureSet& features, const std::vector<std::string>& source_lines,
                        std::istream& nbest, std::ostream& out,
                        const std::map<std::string, double>& weights, Normalization mode);

}  // namespace mtnn
