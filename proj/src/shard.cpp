#include "mtnn/binary_io.hpp"
#include "mtnn/error.hpp"
#include "mtnn/extract.hpp"

namespace mtnn {
namespace {

constexpr std::string_view kShardMagic = "MTNX";
constexpr std::uint32_t kShardVersion = 1;

// On-disk kind tags; TCM carries its null mode in the tag.
enum : std::uint8_t { kTagJmo = 0, kTagTcm = 1, kTagOri = 2, kTagFert = 3, kTagTcmNull = 4 };

std::uint8_t kind_tag(const TaskSpec& spec) {
  switch (spec.kind) {
    case TaskKind::jmo: return kTagJmo;
    case TaskKind::tcm: return spec.null_mode == NullMode::predict_null ? kTagTcmNull : kTagTcm;
    case TaskKind::ori: return kTagOri;
    case TaskKind::fert: return kTagFert;
  }
  return kTagJmo;
}

}  // namespace

void write_task_spec(ByteWriter& w, const TaskSpec& spec) {
  w.u8(kind_tag(spec));
  w.i32(spec.n);
  w.i32(spec.m);
  w.i32(spec.k);
  w.i32(spec.dprime);
}

TaskSpec read_task_spec(ByteReader& r) {
  auto tag = r.u8();
  TaskSpec spec;
  switch (tag) {
    case kTagJmo: spec.kind = TaskKind::jmo; break;
    case kTagTcm: spec.kind = TaskKind::tcm; spec.null_mode = NullMode::skip_unaligned; break;
    case kTagTcmNull: spec.kind = TaskKind::tcm; spec.null_mode = NullMode::predict_null; break;
    case kTagOri: spec.kind = TaskKind::ori; break;
    case kTagFert: spec.kind = TaskKind::fert; break;
    default: throw Error(ErrorCode::parse, "unknown task-kind tag " + std::to_string(tag));
  }
  spec.n = r.i32();
  spec.m = r.i32();
  spec.k = r.i32();
  spec.dprime = r.i32();
  if (spec.n < 1 || spec.m < 0 || spec.k < 0)
    throw Error(ErrorCode::parse, "invalid task parameters");
  return spec;
}

std::string encode_shard(const TaskSpec& spec, const std::vector<TaskExample>& examples) {
  const std::size_t width = spec.width();
  for (std::size_t e = 0; e < examples.size(); ++e) {
    if (examples[e].context.size() != width)
      throw Error(ErrorCode::width_mismatch, "example " + std::to_string(e) + " has width " +
                                                 std::to_string(examples[e].context.size()) +
                                                 ", spec requires " + std::to_string(width));
    if (examples[e].label >= spec.label_count)
      throw Error(ErrorCode::bad_label, "example " + std::to_string(e) + " label out of range");
  }
  ByteWriter w;
  w.bytes(kShardMagic);
  w.u32(kShardVersion);
  write_task_spec(w, spec);
  w.u32(static_cast<std::uint32_t>(width));
  w.u32(spec.label_count);
  w.u64(examples.size());
  for (const auto& ex : examples) {
    for (auto id : ex.context) w.u32(id);
    w.u32(ex.label);
  }
  return w.release();
}

Shard decode_shard(std::string_view bytes) {
  ByteReader r(bytes);
  if (bytes.size() < kShardMagic.size() || r.bytes(kShardMagic.size()) != kShardMagic)
    throw Error(ErrorCode::bad_magic, "not an example shard");
  auto version = r.u32();
  if (version != kShardVersion)
    throw Error(ErrorCode::unsupported_version,
                "shard version " + std::to_string(version) + " is not supported");
  Shard shard;
  shard.spec = read_task_spec(r);
  auto width = r.u32();
  shard.spec.label_count = r.u32();
  if (width != shard.spec.width())
    throw Error(ErrorCode::width_mismatch, "shard width disagrees with its task parameters");
  auto count = r.u64();
  if (r.remaining() / (4ULL * (width + 1)) < count)
    throw Error(ErrorCode::truncated, "shard holds fewer examples than its header claims");
  shard.examples.resize(count);
  for (auto& ex : shard.examples) {
    ex.context.resize(width);
    for (auto& id : ex.context) id = r.u32();
    ex.label = r.u32();
    if (ex.label >= shard.spec.label_count)
      throw Error(ErrorCode::bad_label, "shard label out of range");
  }
  if (!r.at_end()) throw Error(ErrorCode::parse, "trailing bytes after shard examples");
  return shard;
}

void write_shard(const std::vector<TaskExample>& examples, const TaskSpec& spec,
                 const std::string& path) {
  write_file(path, encode_shard(spec, examples));
}

Shard read_shard(const std::string& path) { return decode_shard(read_file(path)); }

}  // namespace mtnn
