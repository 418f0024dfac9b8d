#pragma once

#include <stdexcept>
#include <string>

namespace mtnn {

enum class ErrorCode {
  ingestion,
  parse,
  validation,
  contract,
  bad_magic,
  unsupported_version,
  truncated,
  width_mismatch,
  bad_label,
  config,
  vocab_digest,
  orientation_overlap,
  io,
  empty_shard,
  missing_alignment,
  feature_mismatch,
};

// Machine-parsable name of an error category, e.g. "bad-magic".
const char* category_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }
  const char* category() const { return category_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace mtnn
