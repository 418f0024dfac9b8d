#include "mtnn/binary_io.hpp"
#include "mtnn/error.hpp"
#include "mtnn/mtl.hpp"

namespace mtnn {
namespace {

constexpr std::string_view kModelMagic = "MTNN";
constexpr std::uint32_t kModelVersion = 1;

void write_vocab(ByteWriter& w, const Vocabulary& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (TokenId id = 0; id < v.size(); ++id) {
    w.str(v.form(id));
    w.u64(v.count(id));
  }
}

Vocabulary read_vocab(ByteReader& r, Side side) {
  auto size = r.u32();
  if (size < reserved::count) throw Error(ErrorCode::parse, "embedded vocabulary too small");
  Vocabulary v(side);
  for (std::uint32_t id = 0; id < size; ++id) {
    auto form = r.str();
    auto count = r.u64();
    if (id < reserved::count) {
      if (form != v.form(id)) throw Error(ErrorCode::parse, "embedded vocabulary lacks reserved entries");
      continue;
    }
    v.add(std::move(form), count);
  }
  return v;
}

template <typename M>
void write_values(ByteWriter& w, const M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) w.f32(m.data()[i]);
}

template <typename M>
void read_values(ByteReader& r, M& m) {
  if (r.remaining() / 4 < static_cast<std::size_t>(m.size()))
    throw Error(ErrorCode::truncated, "model file ends inside a parameter tensor");
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f32();
}

}  // namespace

std::string encode_model(const Model& model) {
  const auto& spec = model.spec;
  ByteWriter w;
  w.bytes(kModelMagic);
  w.u32(kModelVersion);
  w.u8(static_cast<std::uint8_t>(spec.group));
  w.u32(static_cast<std::uint32_t>(spec.tasks.size()));
  for (const auto& t : spec.tasks) {
    write_task_spec(w, t);
    w.u32(t.label_count);
  }
  w.u32(static_cast<std::uint32_t>(spec.layers));
  w.u32(static_cast<std::uint32_t>(spec.shared));
  for (int width : spec.widths) w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(spec.embed_dim));
  w.u8(spec.tensor ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(spec.activation));
  w.f64(spec.alpha);
  w.u64(model.src_vocab.digest());
  w.u64(model.tgt_vocab.digest());
  write_vocab(w, model.src_vocab);
  write_vocab(w, model.tgt_vocab);

  const auto& p = model.params;
  write_values(w, p.src_embed);
  write_values(w, p.tgt_embed);
  for (const auto& l : p.layers) {
    write_values(w, l.W);
    write_values(w, l.b);
    if (l.kind == LayerKind::tensor) {
      write_values(w, l.R);
      write_values(w, l.bR);
    }
  }
  for (const auto& h : p.heads) {
    write_values(w, h.W);
    write_values(w, h.b);
  }
  return w.release();
}

Model decode_model(std::string_view bytes) {
  ByteReader r(bytes);
  if (bytes.size() < kModelMagic.size() || r.bytes(kModelMagic.size()) != kModelMagic)
    throw Error(ErrorCode::bad_magic, "not a model file");
  auto version = r.u32();
  if (version != kModelVersion)
    throw Error(ErrorCode::unsupported_version,
                "model version " + std::to_string(version) + " is not supported");

  Model model;
  auto& spec = model.spec;
  auto group = r.u8();
  if (group > static_cast<std::uint8_t>(GroupKind::srcen))
    throw Error(ErrorCode::parse, "unknown group kind");
  spec.group = static_cast<GroupKind>(group);
  auto ntasks = r.u32();
  if (ntasks > 1024) throw Error(ErrorCode::parse, "implausible task count");
  for (std::uint32_t t = 0; t < ntasks; ++t) {
    auto task = read_task_spec(r);
    task.label_count = r.u32();
    spec.tasks.push_back(task);
  }
  spec.layers = static_cast<int>(r.u32());
  spec.shared = static_cast<int>(r.u32());
  if (spec.layers < 1 || spec.layers > 64) throw Error(ErrorCode::parse, "implausible depth");
  for (int l = 0; l < spec.layers; ++l) spec.widths.push_back(static_cast<int>(r.u32()));
  spec.embed_dim = static_cast<int>(r.u32());
  spec.tensor = r.u8() != 0;
  auto act = r.u8();
  if (act > static_cast<std::uint8_t>(Activation::identity))
    throw Error(ErrorCode::parse, "unknown activation");
  spec.activation = static_cast<Activation>(act);
  spec.alpha = r.f64();
  auto src_digest = r.u64();
  auto tgt_digest = r.u64();
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::parse, std::string("invalid group descriptor: ") + e.what());
  }
  model.src_vocab = read_vocab(r, Side::source);
  model.tgt_vocab = read_vocab(r, Side::target);
  if (model.src_vocab.digest() != src_digest || model.tgt_vocab.digest() != tgt_digest)
    throw Error(ErrorCode::vocab_digest, "embedded vocabulary does not match its digest");

  model.wiring = wire_group(spec);
  const auto dim = static_cast<Eigen::Index>(spec.embed_dim);
  auto& p = model.params;
  p.src_embed.resize(static_cast<Eigen::Index>(model.src_vocab.size()), dim);
  p.tgt_embed.resize(static_cast<Eigen::Index>(model.tgt_vocab.size()), dim);
  read_values(r, p.src_embed);
  read_values(r, p.tgt_embed);

  const auto shared = spec.effective_shared();
  std::size_t total_layers = static_cast<std::size_t>(shared) +
                             spec.tasks.size() * static_cast<std::size_t>(spec.layers - shared);
  p.layers.resize(total_layers);
  // Input width of each stored layer follows from the wiring.
  for (std::size_t t = 0; t < spec.tasks.size(); ++t) {
    const auto& w = model.wiring[t];
    for (std::size_t pos = 0; pos < w.layers.size(); ++pos) {
      auto& l = p.layers[w.layers[pos]];
      Eigen::Index in = pos == 0 ? static_cast<Eigen::Index>(spec.tasks[t].width()) * dim
                                 : spec.widths[pos - 1];
      l.kind = spec.tensor ? LayerKind::tensor : LayerKind::plain;
      l.act = spec.activation;
      l.W.resize(in, spec.widths[pos]);
      l.b.resize(spec.widths[pos]);
      if (spec.tensor) {
        l.R.resize(in, spec.widths[pos]);
        l.bR.resize(spec.widths[pos]);
      }
    }
  }
  for (auto& l : p.layers) {
    read_values(r, l.W);
    read_values(r, l.b);
    if (l.kind == LayerKind::tensor) {
      read_values(r, l.R);
      read_values(r, l.bR);
    }
  }
  for (const auto& task : spec.tasks) {
    HeadParams<float> h;
    h.W.resize(spec.widths.back(), task.label_count);
    h.b.resize(task.label_count);
    read_values(r, h.W);
    read_values(r, h.b);
    p.heads.push_back(std::move(h));
  }
  if (!r.at_end()) throw Error(ErrorCode::parse, "trailing bytes after model parameters");
  return model;
}

void save_model(const Model& model, const std::string& path) {
  write_file(path, encode_model(model));
}

Model load_model(const std::string& path) { return decode_model(read_file(path)); }

Model load_model(const std::string& path, const Vocabulary& src_vocab,
                 const Vocabulary& tgt_vocab) {
  auto model = load_model(path);
  if (model.src_vocab.digest() != src_vocab.digest())
    throw Error(ErrorCode::vocab_digest, "source vocabulary differs from the one the model was trained with");
  if (model.tgt_vocab.digest() != tgt_vocab.digest())
    throw Error(ErrorCode::vocab_digest, "target vocabulary differs from the one the model was trained with");
  return model;
}

}  // namespace mtnn
