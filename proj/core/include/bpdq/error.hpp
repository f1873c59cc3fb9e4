#pragma once

#include <stdexcept>
#include <string>

namespace bpdq {

enum class ErrorKind {
  kConfig,
  kIo,
  kFormat,
  kTruncated,
  kNonFinite,
  kSingular,
  kDimension,
  kPrecondition,
  kOracleSize,
};

const char* to_string(ErrorKind kind) noexcept;

/// Library-wide exception. The kind lets callers (the CLI in particular) map
/// failures onto exit codes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the "kind: " prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace bpdq
