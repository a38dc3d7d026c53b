#pragma once

#include <stdexcept>
#include <string>

namespace reasonq {

/// Broad failure classes. The CLI maps Usage/Config to exit code 2 and
/// everything else to exit code 1.
enum class ErrorKind {
  Usage,
  Config,
  Io,
  Parse,
  Validation,
  Transport,
  ReplayMiss,
  Decode,
  ScorerUnavailable,
  Capability,
  VersionMismatch,
  Degenerate,
  Precondition,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace reasonq
