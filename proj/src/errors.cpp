#include "tep/errors.hpp"

#include <array>
#include <utility>

namespace tep {
namespace {

constexpr std::array<std::pair<ErrorKind, std::string_view>, 22> kNames{{
    {ErrorKind::InvalidArgument, "InvalidArgument"},
    {ErrorKind::DimensionMismatch, "DimensionMismatch"},
    {ErrorKind::LengthMismatch, "LengthMismatch"},
    {ErrorKind::ObjectSetMismatch, "ObjectSetMismatch"},
    {ErrorKind::EmptyAnnotation, "EmptyAnnotation"},
    {ErrorKind::BackendUnavailable, "BackendUnavailable"},
    {ErrorKind::DuplicateSession, "DuplicateSession"},
    {ErrorKind::OutOfOrderFrame, "OutOfOrderFrame"},
    {ErrorKind::StaleFrame, "StaleFrame"},
    {ErrorKind::NotInitialized, "NotInitialized"},
    {ErrorKind::SpawnFailed, "SpawnFailed"},
    {ErrorKind::ConnectRefused, "ConnectRefused"},
    {ErrorKind::VersionMismatch, "VersionMismatch"},
    {ErrorKind::BackendTimeout, "BackendTimeout"},
    {ErrorKind::ProtocolViolation, "ProtocolViolation"},
    {ErrorKind::RemoteError, "RemoteError"},
    {ErrorKind::UnknownMethod, "UnknownMethod"},
    {ErrorKind::ManifestError, "ManifestError"},
    {ErrorKind::SpecError, "SpecError"},
    {ErrorKind::UnknownSuite, "UnknownSuite"},
    {ErrorKind::IoError, "IoError"},
    {ErrorKind::ConfigError, "ConfigError"},
}};

}  // namespace

std::string_view to_string(ErrorKind kind) {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "Unknown";
}

std::optional<ErrorKind> error_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

Error Error::remote(std::string remote_kind, const std::string& message) {
  Error e(ErrorKind::RemoteError, remote_kind + ": " + message);
  e.remote_kind_ = std::move(remote_kind);
  return e;
}

}  // namespace tep
