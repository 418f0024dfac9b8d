// Command-line driver: vocabulary building, feature extraction, training,
// intrinsic evaluation, n-best scoring and synthetic data generation.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "mtnn/corpus.hpp"
#include "mtnn/error.hpp"
#include "mtnn/eval.hpp"
#include "mtnn/extract.hpp"
#include "mtnn/mtl.hpp"
#include "mtnn/synth.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

using mtnn::Error;
using mtnn::ErrorCode;

std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// `key = value` lines become `--key value` unless the flag was given.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::optional<std::string> config_path;
  std::vector<std::string> kept;
  for (std::size_t a = 0; a < args.size(); ++a) {
    if (args[a] == "--config" && a + 1 < args.size()) {
      config_path = args[++a];
    } else if (args[a].rfind("--config=", 0) == 0) {
      config_path = args[a].substr(9);
    } else {
      kept.push_back(args[a]);
    }
  }
  if (!config_path) return kept;

  std::set<std::string> given;
  for (const auto& a : kept)
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));

  std::ifstream in(*config_path);
  if (!in) throw Error(ErrorCode::io, "cannot open config file " + *config_path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::parse, "config line " + std::to_string(lineno) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (given.count(key)) continue;
    kept.push_back("--" + key);
    kept.push_back(value);
  }
  return kept;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_switch(const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::config, "expected on/off, got '" + v + "'");
}

mtnn::Side parse_side(const std::string& v) {
  if (v == "source" || v == "src") return mtnn::Side::source;
  if (v == "target" || v == "tgt") return mtnn::Side::target;
  throw Error(ErrorCode::config, "side must be source or target");
}

void log_header(CLI::App* sub) {
  std::cerr << "mtnn " << kVersion << " " << sub->get_name() << "\n";
  std::istringstream settings(sub->config_to_str(true, false));
  std::string line;
  while (std::getline(settings, line))
    if (!line.empty() && line.front() != '[') std::cerr << "  " << line << "\n";
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

struct VocabArgs {
  std::string corpus, out, side = "source";
  std::uint64_t min_count = 2;
  std::size_t max_size = 32004;
};

struct ExtractArgs {
  std::string task = "jmo", src, tgt, align, src_vocab, tgt_vocab, out;
  std::string null_mode = "predict-null";
  int n = 4, m = 5, k = 1, dprime = 0;
};

struct TrainArgs {
  std::string group = "single", src_vocab, tgt_vocab, out, history;
  std::vector<std::string> shards, heldout;
  std::optional<int> layers, shared;
  int hidden = 500, embed = 200;
  std::string widths, tensor = "on", activation = "tanh";
  double alpha = 0.1, lr = 0.1, heldout_fraction = 0.05;
  int epochs = 10, batch = 128, patience = 1, workers = 1;
  std::uint64_t seed = 1;
};

struct EvalArgs {
  std::string model, src_vocab, tgt_vocab;
  std::vector<std::string> shards;
};

struct ScoreArgs {
  std::vector<std::string> models;
  std::string source, nbest, out, mode = "exact", weights;
};

struct SynthArgs {
  std::string pattern = "monotone", prefix;
  std::size_t sentences = 1000, vocab_size = 100;
  std::uint64_t seed = 1;
};

mtnn::TaskSpec task_from_args(const ExtractArgs& a, std::uint32_t tgt_size) {
  if (a.task == "jm") return mtnn::TaskSpec::jmo(a.n, a.m, 0, tgt_size);
  if (a.task == "jmo") return mtnn::TaskSpec::jmo(a.n, a.m, a.k, tgt_size);
  mtnn::NullMode mode;
  if (a.null_mode == "predict-null")
    mode = mtnn::NullMode::predict_null;
  else if (a.null_mode == "skip-unaligned")
    mode = mtnn::NullMode::skip_unaligned;
  else
    throw Error(ErrorCode::config, "null mode must be predict-null or skip-unaligned");
  if (a.task == "ltm") return mtnn::TaskSpec::tcm(a.m, 0, mode, tgt_size);
  if (a.task == "tcm") return mtnn::TaskSpec::tcm(a.m, a.dprime, mode, tgt_size);
  if (a.task == "ori") return mtnn::TaskSpec::ori(a.m);
  if (a.task == "fert") return mtnn::TaskSpec::fert(a.m);
  throw Error(ErrorCode::config, "unknown task '" + a.task + "'");
}

void run_build_vocab(const VocabArgs& a) {
  auto vocab = mtnn::Vocabulary::build_file(a.corpus, a.min_count, a.max_size, parse_side(a.side));
  vocab.save_file(a.out);
  std::cout << "vocabulary: " << vocab.size() << " entries -> " << a.out << "\n";
}

void run_extract(const ExtractArgs& a) {
  auto sv = mtnn::Vocabulary::load_file(a.src_vocab, mtnn::Side::source);
  auto tv = mtnn::Vocabulary::load_file(a.tgt_vocab, mtnn::Side::target);
  auto spec = task_from_args(a, static_cast<std::uint32_t>(tv.size()));
  auto pairs = mtnn::parse_bitext(a.src, a.tgt, a.align, sv, tv);
  mtnn::ExtractStats stats;
  auto examples = mtnn::extract_corpus(spec, pairs, &stats);
  mtnn::write_shard(examples, spec, a.out);
  std::cout << "task " << spec.name() << ": " << examples.size() << " examples from "
            << stats.sentences << " sentences";
  if (stats.skipped_sentences) std::cout << ", " << stats.skipped_sentences << " unaligned sentences skipped";
  if (stats.skipped_words) std::cout << ", " << stats.skipped_words << " unclassifiable orientations skipped";
  std::cout << " -> " << a.out << "\n";
}

void run_train(const TrainArgs& a) {
  mtnn::TaskGroupSpec spec;
  if (a.group == "single")
    spec.group = mtnn::GroupKind::single;
  else if (a.group == "hypen")
    spec.group = mtnn::GroupKind::hypen;
  else if (a.group == "srcen")
    spec.group = mtnn::GroupKind::srcen;
  else
    throw Error(ErrorCode::config, "group must be single, hypen or srcen");

  spec.layers = a.layers.value_or(spec.group == mtnn::GroupKind::srcen ? 3 : 2);
  spec.shared = a.shared.value_or(spec.group == mtnn::GroupKind::srcen ? 1 : 0);
  if (a.widths.empty()) {
    spec.widths.assign(static_cast<std::size_t>(std::max(spec.layers, 0)), a.hidden);
  } else {
    for (const auto& w : split_list(a.widths)) spec.widths.push_back(std::stoi(w));
  }
  spec.embed_dim = a.embed;
  spec.tensor = parse_switch(a.tensor);
  if (a.activation == "tanh")
    spec.activation = mtnn::Activation::tanh;
  else if (a.activation == "identity")
    spec.activation = mtnn::Activation::identity;
  else
    throw Error(ErrorCode::config, "activation must be tanh or identity");
  spec.alpha = a.alpha;

  std::vector<mtnn::Shard> shards, heldout;
  for (const auto& p : a.shards) shards.push_back(mtnn::read_shard(p));
  for (const auto& p : a.heldout) heldout.push_back(mtnn::read_shard(p));
  for (const auto& s : shards) spec.tasks.push_back(s.spec);

  auto sv = mtnn::Vocabulary::load_file(a.src_vocab, mtnn::Side::source);
  auto tv = mtnn::Vocabulary::load_file(a.tgt_vocab, mtnn::Side::target);

  mtnn::TrainConfig config;
  config.epochs = a.epochs;
  config.batch_size = a.batch;
  config.learning_rate = a.lr;
  config.patience = a.patience;
  config.seed = a.seed;
  config.workers = a.workers;
  config.heldout_fraction = a.heldout_fraction;
  config.validate();

  auto model = mtnn::build_group(spec, std::move(sv), std::move(tv), a.seed);
  auto history = mtnn::train_group(model, shards, heldout, config);
  mtnn::save_model(model, a.out);

  std::ostringstream table;
  table << "epoch\tlr";
  for (const auto& t : spec.tasks) table << '\t' << t.name();
  table << "\tsum\n";
  for (const auto& e : history.epochs) {
    table << e.epoch << '\t' << e.learning_rate;
    for (double v : e.heldout_avg_loglik) table << '\t' << fixed6(v);
    table << '\t' << fixed6(e.heldout_sum) << '\n';
  }
  std::cout << table.str();
  std::cout << "best epoch " << history.best_epoch() << "; model -> " << a.out << "\n";
  if (!a.history.empty()) {
    std::ofstream h(a.history);
    if (!h) throw Error(ErrorCode::io, "cannot write " + a.history);
    h << table.str();
  }
}

void run_eval(const EvalArgs& a) {
  mtnn::Model model;
  if (!a.src_vocab.empty() || !a.tgt_vocab.empty()) {
    if (a.src_vocab.empty() || a.tgt_vocab.empty())
      throw Error(ErrorCode::config, "give both --src-vocab and --tgt-vocab, or neither");
    model = mtnn::load_model(a.model, mtnn::Vocabulary::load_file(a.src_vocab, mtnn::Side::source),
                             mtnn::Vocabulary::load_file(a.tgt_vocab, mtnn::Side::target));
  } else {
    model = mtnn::load_model(a.model);
  }
  std::vector<mtnn::Shard> shards;
  for (const auto& p : a.shards) shards.push_back(mtnn::read_shard(p));
  auto report = mtnn::likelihood_report(model, shards);
  std::cout << "task\texamples\tavg_loglik\tperplexity\n";
  for (std::size_t t = 0; t < report.tasks.size(); ++t)
    std::cout << report.tasks[t] << '\t' << report.counts[t] << '\t'
              << fixed6(report.avg_loglik[t]) << '\t' << fixed6(std::exp(-report.avg_loglik[t]))
              << '\n';
  std::cout << "sum\t-\t" << fixed6(report.group_sum) << "\t-\n";
}

void run_score(const ScoreArgs& a) {
  mtnn::FeatureSet features;
  for (const auto& p : a.models) features.add(mtnn::load_model(p));
  std::map<std::string, double> weights;
  for (const auto& item : split_list(a.weights)) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::config, "weights are name=value pairs");
    weights[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
  }
  mtnn::Normalization mode;
  if (a.mode == "exact")
    mode = mtnn::Normalization::exact;
  else if (a.mode == "self-normalized")
    mode = mtnn::Normalization::self_normalized;
  else
    throw Error(ErrorCode::config, "mode must be exact or self-normalized");
  auto source = read_lines(a.source);
  std::ifstream nbest(a.nbest);
  if (!nbest) throw Error(ErrorCode::io, "cannot open " + a.nbest);
  std::size_t count;
  if (a.out.empty() || a.out == "-") {
    count = mtnn::score_nbest(features, source, nbest, std::cout, weights, mode);
  } else {
    std::ofstream out(a.out);
    if (!out) throw Error(ErrorCode::io, "cannot write " + a.out);
    count = mtnn::score_nbest(features, source, nbest, out, weights, mode);
  }
  std::cerr << "scored " << count << " hypotheses\n";
}

void run_gen_synth(const SynthArgs& a) {
  auto corpus = mtnn::gen_synth(mtnn::parse_synth_pattern(a.pattern), a.sentences, a.vocab_size, a.seed);
  mtnn::write_synth(corpus, a.prefix);
  std::cout << a.sentences << " " << a.pattern << " sentences -> " << a.prefix << ".{src,tgt,align}\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural SMT feature toolkit: multitask tensor networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.option_defaults()->always_capture_default();

  VocabArgs va;
  auto* vocab = app.add_subcommand("build-vocab", "Build a vocabulary from a tokenized corpus");
  vocab->add_option("--corpus", va.corpus, "Whitespace-tokenized text")->required();
  vocab->add_option("--side", va.side, "source or target");
  vocab->add_option("--min-count", va.min_count, "Minimum type frequency");
  vocab->add_option("--max-size", va.max_size, "Maximum entries including reserved ones");
  vocab->add_option("--out", va.out, "Vocabulary file")->required();

  ExtractArgs ea;
  auto* extract = app.add_subcommand("extract", "Extract training examples for one feature");
  extract->add_option("--task", ea.task, "jm, jmo, ltm, tcm, ori or fert");
  extract->add_option("--n", ea.n, "Target history length (jm/jmo)");
  extract->add_option("--m", ea.m, "Source half-window");
  extract->add_option("--k", ea.k, "Affiliation offset (jmo)");
  extract->add_option("--dprime", ea.dprime, "Target offset (tcm)");
  extract->add_option("--null-mode", ea.null_mode, "predict-null or skip-unaligned (ltm/tcm)");
  extract->add_option("--src", ea.src, "Source sentences")->required();
  extract->add_option("--tgt", ea.tgt, "Target sentences")->required();
  extract->add_option("--align", ea.align, "Alignments, 0-based j-i pairs")->required();
  extract->add_option("--src-vocab", ea.src_vocab)->required();
  extract->add_option("--tgt-vocab", ea.tgt_vocab)->required();
  extract->add_option("--out", ea.out, "Shard file")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a single network or a multitask group");
  train->add_option("--group", ta.group, "single, hypen or srcen");
  train->add_option("--shards", ta.shards, "One training shard per task")->required()->delimiter(',');
  train->add_option("--heldout", ta.heldout, "One held-out shard per task")->delimiter(',');
  train->add_option("--heldout-fraction", ta.heldout_fraction, "Tail fraction held out when no held-out shards are given");
  train->add_option("--layers", ta.layers, "Hidden layers L (default: 3 for srcen, else 2)");
  train->add_option("--shared", ta.shared, "Shared hidden layers t (default: 1 for srcen, else 0)");
  train->add_option("--hidden", ta.hidden, "Width of every hidden layer");
  train->add_option("--widths", ta.widths, "Comma-separated per-layer widths (overrides --hidden)");
  train->add_option("--embed", ta.embed, "Embedding dimension");
  train->add_option("--tensor", ta.tensor, "Tensor hidden layers: on or off");
  train->add_option("--activation", ta.activation, "tanh or identity");
  train->add_option("--alpha", ta.alpha, "Self-normalization weight");
  train->add_option("--epochs", ta.epochs);
  train->add_option("--batch", ta.batch, "Minibatch size");
  train->add_option("--lr", ta.lr, "Initial learning rate");
  train->add_option("--patience", ta.patience, "Epochs without improvement before halving the rate");
  train->add_option("--seed", ta.seed);
  train->add_option("--workers", ta.workers, "Gradient worker threads (1 = deterministic)");
  train->add_option("--src-vocab", ta.src_vocab)->required();
  train->add_option("--tgt-vocab", ta.tgt_vocab)->required();
  train->add_option("--out", ta.out, "Model file")->required();
  train->add_option("--history", ta.history, "Write the per-epoch table here");

  EvalArgs eva;
  auto* eval = app.add_subcommand("eval", "Held-out average log-likelihood and perplexity");
  eval->add_option("--model", eva.model)->required();
  eval->add_option("--shards", eva.shards)->required()->delimiter(',');
  eval->add_option("--src-vocab", eva.src_vocab, "Check against this source vocabulary");
  eval->add_option("--tgt-vocab", eva.tgt_vocab, "Check against this target vocabulary");

  ScoreArgs sa;
  auto* score = app.add_subcommand("score", "Append feature scores to an n-best list");
  score->add_option("--model", sa.models, "Model files")->required()->delimiter(',');
  score->add_option("--source", sa.source, "Source sentences indexed by n-best id")->required();
  score->add_option("--nbest", sa.nbest, "Lines: id ||| tokens ||| j-i pairs")->required();
  score->add_option("--out", sa.out, "Output file (default stdout)");
  score->add_option("--mode", sa.mode, "exact or self-normalized");
  score->add_option("--weights", sa.weights, "name=value,... feature weights for a total");

  SynthArgs ga;
  auto* synth = app.add_subcommand("gen-synth", "Generate a synthetic aligned bitext");
  synth->add_option("--pattern", ga.pattern, "monotone, reversal, block-swap or collocation");
  synth->add_option("--sentences", ga.sentences);
  synth->add_option("--vocab-size", ga.vocab_size);
  synth->add_option("--seed", ga.seed);
  synth->add_option("--out-prefix", ga.prefix, "Writes PREFIX.src, PREFIX.tgt, PREFIX.align")->required();

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = merge_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 64;
  } catch (const Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
    return 2;
  }

  try {
    for (auto* sub : app.get_subcommands()) log_header(sub);
    if (vocab->parsed()) run_build_vocab(va);
    if (extract->parsed()) run_extract(ea);
    if (train->parsed()) run_train(ta);
    if (eval->parsed()) run_eval(eva);
    if (score->parsed()) run_score(sa);
    if (synth->parsed()) run_gen_synth(ga);
  } catch (const Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
