#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tep {

/// Error categories shared by the library, the CLI and the wire protocol.
/// The textual names are part of the wire format (`error_kind`).
enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  LengthMismatch,
  ObjectSetMismatch,
  EmptyAnnotation,
  BackendUnavailable,
  DuplicateSession,
  OutOfOrderFrame,
  StaleFrame,
  NotInitialized,
  SpawnFailed,
  ConnectRefused,
  VersionMismatch,
  BackendTimeout,
  ProtocolViolation,
  RemoteError,
  UnknownMethod,
  ManifestError,
  SpecError,
  UnknownSuite,
  IoError,
  ConfigError,
};

std::string_view to_string(ErrorKind kind);
std::optional<ErrorKind> error_kind_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

  /// For RemoteError: the kind string reported by the server.
  const std::string& remote_kind() const noexcept { return remote_kind_; }

  static Error remote(std::string remote_kind, const std::string& message);

 private:
  ErrorKind kind_;
  std::string remote_kind_;
};

}  // namespace tep
