#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tbx {

enum class ErrorCode {
  kParseError,
  kInvalidCategory,
  kConfidenceOutOfRange,
  kInvalidBox,
  kOutOfBounds,
  kImageError,
  kTransportError,
  kAuthError,
  kEmptyExtraction,
  kFixtureMissing,
  kDictionaryError,
  kMissingGroundTruth,
  kUnknownLabel,
  kRectOutOfBounds,
  kValidationError,
  kPersistenceError,
  kSyntaxError,
  kUnknownKey,
  kBadTemplate,
  kConfigError,
};

std::string_view to_string(ErrorCode code);

// True for failures caused by a remote service rather than local data.
bool is_external(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Malformed input file; carries the 1-based line and the offending field.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what)
      : Error(ErrorCode::kParseError, "line " + std::to_string(line) + ", " +
                                          field + ": " + what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

// Query text rejected by the parser. offset is a 0-based byte offset.
class QuerySyntaxError : public Error {
 public:
  QuerySyntaxError(std::size_t offset, std::string expected)
      : Error(ErrorCode::kSyntaxError, "syntax error at offset " +
                                           std::to_string(offset) +
                                           ": expected " + expected),
        offset_(offset),
        expected_(std::move(expected)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t offset_;
  std::string expected_;
};

class UnknownKeyError : public Error {
 public:
  UnknownKeyError(std::size_t offset, const std::string& key)
      : Error(ErrorCode::kUnknownKey, "unknown key '" + key + "' at offset " +
                                          std::to_string(offset)),
        offset_(offset),
        key_(key) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& key() const noexcept { return key_; }

 private:
  std::size_t offset_;
  std::string key_;
};

}  // namespace tbx
