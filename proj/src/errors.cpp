#include "tbx/errors.hpp"

namespace tbx {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvalidCategory: return "InvalidCategory";
    case ErrorCode::kConfidenceOutOfRange: return "ConfidenceOutOfRange";
    case ErrorCode::kInvalidBox: return "InvalidBox";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kImageError: return "ImageError";
    case ErrorCode::kTransportError: return "TransportError";
    case ErrorCode::kAuthError: return "AuthError";
    case ErrorCode::kEmptyExtraction: return "EmptyExtraction";
    case ErrorCode::kFixtureMissing: return "FixtureMissing";
    case ErrorCode::kDictionaryError: return "DictionaryError";
    case ErrorCode::kMissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kRectOutOfBounds: return "RectOutOfBounds";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kPersistenceError: return "PersistenceError";
    case ErrorCode::kSyntaxError: return "SyntaxError";
    case ErrorCode::kUnknownKey: return "UnknownKey";
    case ErrorCode::kBadTemplate: return "BadTemplate";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Error";
}

bool is_external(ErrorCode code) {
  return code == ErrorCode::kTransportError || code == ErrorCode::kAuthError ||
         code == ErrorCode::kEmptyExtraction;
}

}  // namespace tbx
