#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtnn/corpus.hpp"
#include "mtnn/extract.hpp"
#include "mtnn/net.hpp"

namespace mtnn {

enum class GroupKind : std::uint8_t { single = 0, hypen = 1, srcen = 2 };

const char* group_name(GroupKind g);

struct TaskGroupSpec {
  GroupKind group = GroupKind::single;
  std::vector<TaskSpec> tasks;
  int layers = 2;  // L
  int shared = 0;  // t, hidden layers shared by all tasks
  std::vector<int> widths;
  int embed_dim = 200;
  bool tensor = false;
  Activation activation = Activation::tanh;
  double alpha = 0.1;

  // Throws ErrorCode::config when the group cannot be wired.
  void validate() const;

  // Number of shared hidden layers as wired; single-task groups share
  // trivially, so they are recorded and wired with t = 0.
  int effective_shared() const { return group == GroupKind::single ? 0 : shared; }

  bool operator==(const TaskGroupSpec&) const = default;
};

struct Model {
  TaskGroupSpec spec;
  Vocabulary src_vocab{Side::source};
  Vocabulary tgt_vocab{Side::target};
  NetworkParams<float> params;
  std::vector<TaskWiring> wiring;  // one per task, same order as spec.tasks

  std::optional<std::size_t> find_task(const std::string& name) const;
  std::size_t vocab_size(Side side) const {
    return side == Side::source ? src_vocab.size() : tgt_vocab.size();
  }
};

// Layer order: shared layers 0..t-1, then each task's private layers
// t..L-1 in task order; one head per task.
std::vector<TaskWiring> wire_group(const TaskGroupSpec& spec);

Model build_group(const TaskGroupSpec& spec, Vocabulary src_vocab, Vocabulary tgt_vocab,
                  std::uint64_t seed);

// A single feedforward network for one task, built without group machinery.
Model build_standalone(const TaskSpec& task, const std::vector<int>& widths, int embed_dim,
                       bool tensor, Activation activation, double alpha, Vocabulary src_vocab,
                       Vocabulary tgt_vocab, std::uint64_t seed);

// Copies one task's path out of a group into a standalone model.
Model extract_task(const Model& group, std::size_t task);

struct TrainConfig {
  int epochs = 10;
  int batch_size = 128;
  double learning_rate = 0.1;
  int patience = 1;
  std::uint64_t seed = 1;
  int workers = 1;
  double heldout_fraction = 0.05;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 0 = before training
  double learning_rate = 0;
  std::vector<double> heldout_avg_loglik;  // per task
  double heldout_sum = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch() const;
};

struct TaskData {
  std::vector<TaskExample> train;
  std::vector<TaskExample> heldout;
};

// Last `fraction` of examples (sentence order) become held-out data.
TaskData split_heldout(std::vector<TaskExample> examples, double fraction);

// Multitask SGD. Each epoch draws max-task-size examples from every task;
// minibatches come from one task at a time in round-robin over a task order
// reshuffled every epoch.
TrainHistory train_group(Model& model, const std::vector<TaskData>& data,
                         const TrainConfig& config);

// Plain single-network SGD with the same schedule semantics.
TrainHistory train_standalone(Model& model, const TaskData& data, const TrainConfig& config);

// Checks shards against the group's tasks, then trains. Missing held-out
// shards are carved from the training shards.
TrainHistory train_group(Model& model, const std::vector<Shard>& shards,
                         const std::vector<Shard>& heldout, const TrainConfig& config);

// Sum over tasks and examples of the training objective, 64-bit.
double group_objective(const Model& model, const std::vector<std::vector<TaskExample>>& data);
double task_objective(const Model& model, std::size_t task, const std::vector<TaskExample>& data);

// --- model files ------------------------------------------------------------

std::string encode_model(const Model& model);
Model decode_model(std::string_view bytes);
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);
// Also verifies the embedded vocabularies against the given ones.
Model load_model(const std::string& path, const Vocabulary& src_vocab,
                 const Vocabulary& tgt_vocab);

}  // namespace mtnn
