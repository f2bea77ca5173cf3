#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace factgenius {

enum class ErrorCode {
  InvalidArgument,
  Io,
  MalformedFile,
  DuplicateEntityRecord,
  EmptyGraph,
  EmptyOptions,
  EmptyClaim,
  EmptyEntities,
  Transport,
  Protocol,
  Server,
  RetryExhausted,
  NoDictFound,
  UnbalancedBraces,
  MalformedDict,
  NoVerdictToken,
  MissingLabel,
  Schema,
  UnknownTypeTag,
  CacheCorrupt,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::DuplicateEntityRecord: return "DuplicateEntityRecord";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::EmptyOptions: return "EmptyOptions";
    case ErrorCode::EmptyClaim: return "EmptyClaim";
    case ErrorCode::EmptyEntities: return "EmptyEntities";
    case ErrorCode::Transport: return "TransportError";
    case ErrorCode::Protocol: return "ProtocolError";
    case ErrorCode::Server: return "ServerError";
    case ErrorCode::RetryExhausted: return "RetryExhausted";
    case ErrorCode::NoDictFound: return "NoDictFound";
    case ErrorCode::UnbalancedBraces: return "UnbalancedBraces";
    case ErrorCode::MalformedDict: return "MalformedDict";
    case ErrorCode::NoVerdictToken: return "NoVerdictToken";
    case ErrorCode::MissingLabel: return "MissingLabel";
    case ErrorCode::Schema: return "SchemaError";
    case ErrorCode::UnknownTypeTag: return "UnknownTypeTag";
    case ErrorCode::CacheCorrupt: return "CacheCorrupt";
  }
  return "Unknown";
}

/// Base of every error thrown by the toolkit. The message is prefixed with
/// the code name so one-line diagnostics stay self-describing.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Typed rejection from the LLM output parsers. Caught by the retry loop.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Raised when a line-oriented input file is malformed; carries the 1-based line.
class FileError : public Error {
 public:
  FileError(ErrorCode code, std::size_t line, const std::string& message)
      : Error(code, "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class RetryExhaustedError : public Error {
 public:
  RetryExhaustedError(int attempts, std::string last_reason, std::vector<std::string> raw_texts)
      : Error(ErrorCode::RetryExhausted,
              "gave up after " + std::to_string(attempts) + " attempts; last failure: " + last_reason),
        attempts_(attempts),
        last_reason_(std::move(last_reason)),
        raw_texts_(std::move(raw_texts)) {}

  int attempts() const noexcept { return attempts_; }
  const std::string& last_reason() const noexcept { return last_reason_; }
  /// Every assistant text received, in attempt order (transport failures contribute none).
  const std::vector<std::string>& raw_texts() const noexcept { return raw_texts_; }

 private:
  int attempts_;
  std::string last_reason_;
  std::vector<std::string> raw_texts_;
};

}  // namespace factgenius
