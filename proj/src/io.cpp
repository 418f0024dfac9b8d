#include <fstream>
#include <sstream>

#include "mtnn/binary_io.hpp"
#include "mtnn/error.hpp"

namespace mtnn {

const char* category_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ingestion: return "ingestion";
    case ErrorCode::parse: return "parse";
    case ErrorCode::validation: return "validation";
    case ErrorCode::contract: return "contract";
    case ErrorCode::bad_magic: return "bad-magic";
    case ErrorCode::unsupported_version: return "unsupported-version";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::width_mismatch: return "width-mismatch";
    case ErrorCode::bad_label: return "bad-label";
    case ErrorCode::config: return "config";
    case ErrorCode::vocab_digest: return "vocab-digest";
    case ErrorCode::orientation_overlap: return "orientation-overlap";
    case ErrorCode::io: return "io";
    case ErrorCode::empty_shard: return "empty-shard";
    case ErrorCode::missing_alignment: return "missing-alignment";
    case ErrorCode::feature_mismatch: return "feature-mismatch";
  }
  return "unknown";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io, "write failed for " + path);
}

}  // namespace mtnn
