#include "mtnn/mtl.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <thread>

#include "mtnn/error.hpp"
#include "mtnn/eval.hpp"

namespace mtnn {
namespace {

std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x6d746e6eu};
  return std::mt19937_64(seq);
}

// Stream 0 orders tasks; stream 1 + i shuffles task i.
constexpr std::uint64_t kOrderStream = 0;
std::uint64_t task_stream(std::size_t task) { return 1 + task; }

void check_label_space(const TaskSpec& task, const Vocabulary& tgt_vocab) {
  bool target_labels = task.kind == TaskKind::jmo || task.kind == TaskKind::tcm;
  if (target_labels && task.label_count != tgt_vocab.size())
    throw Error(ErrorCode::config, "task " + task.name() + " label space (" +
                                       std::to_string(task.label_count) +
                                       ") differs from target vocabulary size (" +
                                       std::to_string(tgt_vocab.size()) + ")");
}

// Sums batch gradients, optionally over worker threads (one chunk each).
void accumulate(const NetworkParams<float>& params, const TaskWiring& wiring, const Batch& batch,
                float alpha, int workers, Gradients<float>& grads) {
  const std::size_t rows = batch.size();
  const std::size_t chunks = std::min<std::size_t>(static_cast<std::size_t>(workers), rows);
  if (chunks <= 1) {
    auto trace = forward(params, wiring, batch, alpha);
    backward(params, wiring, batch, trace, grads);
    return;
  }
  std::vector<Gradients<float>> partial(chunks);
  std::vector<std::thread> threads;
  for (std::size_t c = 0; c < chunks; ++c) {
    threads.emplace_back([&, c] {
      std::size_t lo = rows * c / chunks, hi = rows * (c + 1) / chunks;
      Batch sub;
      sub.width = batch.width;
      sub.ids.assign(batch.ids.begin() + static_cast<std::ptrdiff_t>(lo * batch.width),
                     batch.ids.begin() + static_cast<std::ptrdiff_t>(hi * batch.width));
      sub.labels.assign(batch.labels.begin() + static_cast<std::ptrdiff_t>(lo),
                        batch.labels.begin() + static_cast<std::ptrdiff_t>(hi));
      partial[c] = Gradients<float>::zeros_like(params);
      auto trace = forward(params, wiring, sub, alpha);
      backward(params, wiring, sub, trace, partial[c]);
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& p : partial) grads.add(p);
}

void sgd_step(NetworkParams<float>& params, const TaskWiring& wiring, const Batch& batch,
              float alpha, float rate, int workers, Gradients<float>& grads) {
  grads.clear();
  accumulate(params, wiring, batch, alpha, workers, grads);
  apply_sgd(params, grads, rate / static_cast<float>(batch.size()));
}

EpochRecord evaluate_epoch(const Model& model, const std::vector<const std::vector<TaskExample>*>& heldout,
                           int epoch, double rate) {
  EpochRecord rec;
  rec.epoch = epoch;
  rec.learning_rate = rate;
  auto params = model.params.cast<double>();
  for (std::size_t t = 0; t < heldout.size(); ++t) {
    double avg = average_log_likelihood(params, model.wiring[t], model.spec.tasks[t], *heldout[t]);
    rec.heldout_avg_loglik.push_back(avg);
    rec.heldout_sum += avg;
  }
  return rec;
}

// Halves the rate after `patience` epochs without held-out improvement.
class RateSchedule {
 public:
  RateSchedule(double rate, int patience, double baseline)
      : rate_(rate), patience_(patience), best_(baseline) {}

  void observe(double heldout_sum) {
    if (heldout_sum > best_) {
      best_ = heldout_sum;
      stale_ = 0;
      return;
    }
    if (++stale_ >= patience_) {
      rate_ *= 0.5;
      stale_ = 0;
    }
  }
  double rate() const { return rate_; }

 private:
  double rate_;
  int patience_;
  double best_;
  int stale_ = 0;
};

// Endless shuffled pass over one task's examples; reshuffles on wrap.
class ExampleStream {
 public:
  ExampleStream(std::size_t size, std::mt19937_64 rng) : perm_(size), rng_(std::move(rng)) {
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  }

  void restart() {
    std::shuffle(perm_.begin(), perm_.end(), rng_);
    cursor_ = 0;
  }

  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count) {
      if (cursor_ == perm_.size()) restart();
      out.push_back(perm_[cursor_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> perm_;
  std::size_t cursor_ = 0;
  std::mt19937_64 rng_;
};

void check_task_data(const Model& model, const std::vector<TaskData>& data) {
  if (data.size() != model.spec.tasks.size())
    throw Error(ErrorCode::config, "expected data for " + std::to_string(model.spec.tasks.size()) +
                                       " tasks, got " + std::to_string(data.size()));
  for (std::size_t t = 0; t < data.size(); ++t) {
    const auto& task = model.spec.tasks[t];
    if (data[t].train.empty())
      throw Error(ErrorCode::config, "no training examples for task " + task.name());
    if (data[t].heldout.empty())
      throw Error(ErrorCode::config, "no held-out examples for task " + task.name());
    for (const auto* set : {&data[t].train, &data[t].heldout})
      for (const auto& ex : *set)
        if (ex.context.size() != task.width())
          throw Error(ErrorCode::config, "example width mismatch for task " + task.name());
  }
}

}  // namespace

const char* group_name(GroupKind g) {
  switch (g) {
    case GroupKind::single: return "single";
    case GroupKind::hypen: return "hypen";
    case GroupKind::srcen: return "srcen";
  }
  return "?";
}

void TaskGroupSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::config, msg); };
  if (tasks.empty()) fail("task group has no tasks");
  if (group == GroupKind::single && tasks.size() != 1) fail("single group must hold exactly one task");
  if (layers < 1) fail("at least one hidden layer required");
  if (static_cast<int>(widths.size()) != layers)
    fail("expected " + std::to_string(layers) + " layer widths, got " + std::to_string(widths.size()));
  for (int w : widths)
    if (w < 1) fail("layer widths must be positive");
  if (embed_dim < 1) fail("embedding dimension must be positive");
  if (alpha < 0) fail("alpha must be non-negative");
  if (shared < 0 || shared >= layers)
    fail("shared depth t=" + std::to_string(shared) + " must satisfy 0 <= t <= L-1 (L=" +
         std::to_string(layers) + ")");
  for (const auto& t : tasks)
    if (t.label_count == 0) fail("task " + t.name() + " has an empty label space");
  if (group == GroupKind::hypen) {
    if (shared != 0) fail("hypen tasks have different inputs; only t=0 is supported");
    for (const auto& t : tasks)
      if (t.kind != TaskKind::jmo) fail("hypen group accepts jm/jmo tasks only, got " + t.name());
  }
  if (group == GroupKind::srcen) {
    for (const auto& t : tasks) {
      if (t.kind == TaskKind::jmo) fail("srcen group accepts source-enumerating tasks only");
      if (t.width() != tasks.front().width())
        fail("srcen tasks must share one source window (task " + t.name() + " differs)");
    }
  }
}

std::optional<std::size_t> Model::find_task(const std::string& name) const {
  for (std::size_t t = 0; t < spec.tasks.size(); ++t)
    if (spec.tasks[t].name() == name) return t;
  return std::nullopt;
}

std::vector<TaskWiring> wire_group(const TaskGroupSpec& spec) {
  spec.validate();
  const auto shared = static_cast<std::size_t>(spec.effective_shared());
  const auto depth = static_cast<std::size_t>(spec.layers);
  std::vector<TaskWiring> wiring(spec.tasks.size());
  std::size_t next = shared;
  for (std::size_t t = 0; t < spec.tasks.size(); ++t) {
    auto& w = wiring[t];
    w.slots = spec.tasks[t].slot_sides();
    for (std::size_t l = 0; l < shared; ++l) w.layers.push_back(l);
    for (std::size_t l = shared; l < depth; ++l) w.layers.push_back(next++);
    w.head = t;
  }
  return wiring;
}

Model build_group(const TaskGroupSpec& spec, Vocabulary src_vocab, Vocabulary tgt_vocab,
                  std::uint64_t seed) {
  spec.validate();
  for (const auto& t : spec.tasks) check_label_space(t, tgt_vocab);

  Model model;
  model.spec = spec;
  model.spec.shared = spec.effective_shared();
  model.wiring = wire_group(spec);
  model.src_vocab = std::move(src_vocab);
  model.tgt_vocab = std::move(tgt_vocab);

  InitRng rng(seed);
  const auto dim = static_cast<std::size_t>(spec.embed_dim);
  model.params.src_embed = init_embedding(rng, model.src_vocab.size(), dim);
  model.params.tgt_embed = init_embedding(rng, model.tgt_vocab.size(), dim);

  const auto kind = spec.tensor ? LayerKind::tensor : LayerKind::plain;
  const auto shared = spec.effective_shared();
  auto input_width = [&](std::size_t task, int layer) -> Eigen::Index {
    if (layer == 0) return static_cast<Eigen::Index>(spec.tasks[task].width() * dim);
    return spec.widths[static_cast<std::size_t>(layer - 1)];
  };
  for (int l = 0; l < shared; ++l)
    model.params.layers.push_back(
        init_layer(rng, kind, spec.activation, input_width(0, l), spec.widths[static_cast<std::size_t>(l)]));
  for (std::size_t t = 0; t < spec.tasks.size(); ++t)
    for (int l = shared; l < spec.layers; ++l)
      model.params.layers.push_back(init_layer(rng, kind, spec.activation, input_width(t, l),
                                               spec.widths[static_cast<std::size_t>(l)]));
  for (const auto& task : spec.tasks)
    model.params.heads.push_back(init_head(rng, spec.widths.back(), task.label_count));
  return model;
}

Model build_standalone(const TaskSpec& task, const std::vector<int>& widths, int embed_dim,
                       bool tensor, Activation activation, double alpha, Vocabulary src_vocab,
                       Vocabulary tgt_vocab, std::uint64_t seed) {
  Model model;
  model.spec.group = GroupKind::single;
  model.spec.tasks = {task};
  model.spec.layers = static_cast<int>(widths.size());
  model.spec.shared = 0;
  model.spec.widths = widths;
  model.spec.embed_dim = embed_dim;
  model.spec.tensor = tensor;
  model.spec.activation = activation;
  model.spec.alpha = alpha;
  model.spec.validate();
  check_label_space(task, tgt_vocab);
  model.src_vocab = std::move(src_vocab);
  model.tgt_vocab = std::move(tgt_vocab);

  InitRng rng(seed);
  const auto dim = static_cast<std::size_t>(embed_dim);
  model.params.src_embed = init_embedding(rng, model.src_vocab.size(), dim);
  model.params.tgt_embed = init_embedding(rng, model.tgt_vocab.size(), dim);
  Eigen::Index in = static_cast<Eigen::Index>(task.width() * dim);
  TaskWiring wiring;
  wiring.slots = task.slot_sides();
  for (int w : widths) {
    wiring.layers.push_back(model.params.layers.size());
    model.params.layers.push_back(init_layer(
        rng, tensor ? LayerKind::tensor : LayerKind::plain, activation, in, w));
    in = w;
  }
  model.params.heads.push_back(init_head(rng, in, task.label_count));
  wiring.head = 0;
  model.wiring = {wiring};
  return model;
}

Model extract_task(const Model& group, std::size_t task) {
  if (task >= group.spec.tasks.size()) throw Error(ErrorCode::contract, "task index out of range");
  Model out;
  out.spec = group.spec;
  out.spec.group = GroupKind::single;
  out.spec.tasks = {group.spec.tasks[task]};
  out.spec.shared = 0;
  out.src_vocab = group.src_vocab;
  out.tgt_vocab = group.tgt_vocab;
  out.params.src_embed = group.params.src_embed;
  out.params.tgt_embed = group.params.tgt_embed;
  const auto& w = group.wiring[task];
  TaskWiring wiring;
  wiring.slots = w.slots;
  for (auto idx : w.layers) {
    wiring.layers.push_back(out.params.layers.size());
    out.params.layers.push_back(group.params.layers[idx]);
  }
  out.params.heads.push_back(group.params.heads[w.head]);
  wiring.head = 0;
  out.wiring = {wiring};
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 0 || batch_size < 1 || learning_rate <= 0 || patience < 1 || workers < 1 ||
      heldout_fraction < 0 || heldout_fraction >= 1)
    throw Error(ErrorCode::config, "invalid training configuration");
}

std::size_t TrainHistory::best_epoch() const {
  std::size_t best = 0;
  for (std::size_t e = 1; e < epochs.size(); ++e)
    if (epochs[e].heldout_sum > epochs[best].heldout_sum) best = e;
  return best;
}

TaskData split_heldout(std::vector<TaskExample> examples, double fraction) {
  TaskData data;
  std::size_t held = static_cast<std::size_t>(static_cast<double>(examples.size()) * fraction);
  if (held == 0 && fraction > 0 && examples.size() >= 2) held = 1;
  auto cut = examples.end() - static_cast<std::ptrdiff_t>(held);
  data.heldout.assign(std::make_move_iterator(cut), std::make_move_iterator(examples.end()));
  examples.erase(cut, examples.end());
  data.train = std::move(examples);
  return data;
}

TrainHistory train_group(Model& model, const std::vector<TaskData>& data,
                         const TrainConfig& config) {
  config.validate();
  check_task_data(model, data);
  const std::size_t tasks = data.size();
  const auto alpha = static_cast<float>(model.spec.alpha);

  std::vector<const std::vector<TaskExample>*> heldout;
  for (const auto& d : data) heldout.push_back(&d.heldout);

  TrainHistory history;
  history.epochs.push_back(evaluate_epoch(model, heldout, 0, config.learning_rate));
  RateSchedule schedule(config.learning_rate, config.patience, history.epochs[0].heldout_sum);

  auto order_rng = derive_rng(config.seed, kOrderStream);
  std::vector<ExampleStream> streams;
  std::size_t epoch_size = 0;
  for (std::size_t t = 0; t < tasks; ++t) {
    streams.emplace_back(data[t].train.size(), derive_rng(config.seed, task_stream(t)));
    epoch_size = std::max(epoch_size, data[t].train.size());
  }
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  auto grads = Gradients<float>::zeros_like(model.params);

  std::vector<std::size_t> order(tasks);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (auto& s : streams) s.restart();
    const auto rate = static_cast<float>(schedule.rate());
    for (std::size_t start = 0; start < epoch_size; start += batch_size) {
      const std::size_t take = std::min(batch_size, epoch_size - start);
      for (auto t : order) {
        auto rows = streams[t].next(take);
        auto batch = make_batch(data[t].train, rows, model.spec.tasks[t].width());
        sgd_step(model.params, model.wiring[t], batch, alpha, rate, config.workers, grads);
      }
    }
    history.epochs.push_back(evaluate_epoch(model, heldout, epoch, schedule.rate()));
    schedule.observe(history.epochs.back().heldout_sum);
  }
  return history;
}

TrainHistory train_standalone(Model& model, const TaskData& data, const TrainConfig& config) {
  config.validate();
  if (model.spec.tasks.size() != 1 || model.wiring.size() != 1)
    throw Error(ErrorCode::config, "standalone training needs a single-task model");
  check_task_data(model, {data});
  const auto& task = model.spec.tasks.front();
  const auto& wiring = model.wiring.front();
  const auto alpha = static_cast<float>(model.spec.alpha);

  TrainHistory history;
  history.epochs.push_back(evaluate_epoch(model, {&data.heldout}, 0, config.learning_rate));
  RateSchedule schedule(config.learning_rate, config.patience, history.epochs[0].heldout_sum);

  auto rng = derive_rng(config.seed, task_stream(0));
  std::vector<std::size_t> perm(data.train.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  auto grads = Gradients<float>::zeros_like(model.params);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto rate = static_cast<float>(schedule.rate());
    for (std::size_t start = 0; start < perm.size(); start += batch_size) {
      std::span<const std::size_t> rows(perm.data() + start,
                                        std::min(batch_size, perm.size() - start));
      auto batch = make_batch(data.train, rows, task.width());
      sgd_step(model.params, wiring, batch, alpha, rate, config.workers, grads);
    }
    history.epochs.push_back(evaluate_epoch(model, {&data.heldout}, epoch, schedule.rate()));
    schedule.observe(history.epochs.back().heldout_sum);
  }
  return history;
}

TrainHistory train_group(Model& model, const std::vector<Shard>& shards,
                         const std::vector<Shard>& heldout, const TrainConfig& config) {
  const auto& tasks = model.spec.tasks;
  auto match = [&](const std::vector<Shard>& set, const char* what) {
    if (set.size() != tasks.size())
      throw Error(ErrorCode::config, std::string("expected one ") + what + " shard per task (" +
                                         std::to_string(tasks.size()) + "), got " +
                                         std::to_string(set.size()));
    for (std::size_t t = 0; t < tasks.size(); ++t)
      if (!(set[t].spec == tasks[t]))
        throw Error(ErrorCode::config, std::string(what) + " shard " + std::to_string(t) +
                                           " holds task " + set[t].spec.name() +
                                           " with different parameters than model task " +
                                           tasks[t].name());
  };
  match(shards, "training");
  if (!heldout.empty()) match(heldout, "held-out");

  std::vector<TaskData> data;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (heldout.empty()) {
      data.push_back(split_heldout(shards[t].examples, config.heldout_fraction));
    } else {
      data.push_back({shards[t].examples, heldout[t].examples});
    }
  }
  if (tasks.size() == 1 && model.spec.group == GroupKind::single)
    return train_standalone(model, data.front(), config);
  return train_group(model, data, config);
}

double task_objective(const Model& model, std::size_t task, const std::vector<TaskExample>& data) {
  auto params = model.params.cast<double>();
  const auto width = model.spec.tasks.at(task).width();
  double total = 0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    std::span<const TaskExample> part(data.data() + start, std::min(kChunk, data.size() - start));
    auto trace = forward(params, model.wiring[task], make_batch(part, width), model.spec.alpha);
    for (Eigen::Index r = 0; r < trace.loss.size(); ++r) total += trace.loss[r];
  }
  return total;
}

double group_objective(const Model& model, const std::vector<std::vector<TaskExample>>& data) {
  if (data.size() != model.spec.tasks.size())
    throw Error(ErrorCode::config, "one example set per task required");
  auto params = model.params.cast<double>();
  double total = 0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t t = 0; t < data.size(); ++t) {
    const auto width = model.spec.tasks[t].width();
    for (std::size_t start = 0; start < data[t].size(); start += kChunk) {
      std::span<const TaskExample> part(data[t].data() + start,
                                        std::min(kChunk, data[t].size() - start));
      auto trace = forward(params, model.wiring[t], make_batch(part, width), model.spec.alpha);
      for (Eigen::Index r = 0; r < trace.loss.size(); ++r) total += trace.loss[r];
    }
  }
  return total;
}

}  // namespace mtnn
