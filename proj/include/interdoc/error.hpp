#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace interdoc {

enum class ErrorKind {
  // corpus model
  EmptySections,
  EmptySegment,
  DuplicateSectionId,
  InvalidDocument,
  InvalidQuery,
  // ingest
  NoContent,
  MalformedInput,
  NotATable,
  SchemaError,
  DanglingReference,
  Io,
  // encode / index
  DimMismatch,
  BadMagic,
  VersionMismatch,
  Truncated,
  // remote
  Transport,
  ProtocolError,
  ServiceError,
  // train
  ZeroNormEmbedding,
  ShapeMismatch,
  InsufficientNegatives,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::EmptySections: return "EmptySections";
    case ErrorKind::EmptySegment: return "EmptySegment";
    case ErrorKind::DuplicateSectionId: return "DuplicateSectionId";
    case ErrorKind::InvalidDocument: return "InvalidDocument";
    case ErrorKind::InvalidQuery: return "InvalidQuery";
    case ErrorKind::NoContent: return "NoContent";
    case ErrorKind::MalformedInput: return "MalformedInput";
    case ErrorKind::NotATable: return "NotATable";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::DanglingReference: return "DanglingReference";
    case ErrorKind::Io: return "Io";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::Truncated: return "Truncated";
    case ErrorKind::Transport: return "Transport";
    case ErrorKind::ProtocolError: return "ProtocolError";
    case ErrorKind::ServiceError: return "ServiceError";
    case ErrorKind::ZeroNormEmbedding: return "ZeroNormEmbedding";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InsufficientNegatives: return "InsufficientNegatives";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library. `subject()` carries the offending id,
/// index or line number when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string subject, const std::string& detail = {})
      : std::runtime_error(format(kind, subject, detail)),
        kind_(kind),
        subject_(std::move(subject)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  static std::string format(ErrorKind kind, const std::string& subject,
                            const std::string& detail) {
    std::string msg(to_string(kind));
    if (!subject.empty()) msg += "(" + subject + ")";
    if (!detail.empty()) msg += ": " + detail;
    return msg;
  }

  ErrorKind kind_;
  std::string subject_;
};

/// Data errors map to CLI exit code 2, transport/runtime ones to 3.
inline bool is_data_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::Transport:
    case ErrorKind::ProtocolError:
    case ErrorKind::ServiceError:
    case ErrorKind::Io:
      return false;
    default:
      return true;
  }
}

}  // namespace interdoc
