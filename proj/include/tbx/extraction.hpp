#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tbx/image.hpp"

namespace tbx {

using KeyValuePair = std::pair<std::string, std::string>;

enum class ExtractionSource { kLlm, kMock };

std::string_view to_string(ExtractionSource s);

// Key/value pairs as emitted by an extractor. Keys may repeat; order is
// the emission order.
struct RawExtraction {
  std::string drawing_id;
  ExtractionSource source = ExtractionSource::kMock;
  std::vector<KeyValuePair> pairs;

  bool operator==(const RawExtraction&) const = default;
};

struct Prompt {
  std::string system;
  std::string user;
};

Prompt build_prompt();

struct ExtractorConfig {
  std::string endpoint_url;
  std::string api_key;
  std::string model_name;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 3;
  // Delay before retry k (0-based) is min(backoff_base * 2^k, backoff_cap).
  std::chrono::milliseconds backoff_base{1'000};
  std::chrono::milliseconds backoff_cap{30'000};
  // Longest image side sent to the service; larger crops are downscaled.
  int max_image_side = 2048;

  // Throws Error(kConfigError) on a negative retry count or non-positive
  // timeout, or an empty endpoint.
  void validate() const;
};

// Reads TBX_LLM_ENDPOINT, TBX_LLM_API_KEY and TBX_LLM_MODEL.
ExtractorConfig extractor_config_from_env();

// Chat-completion request body for one title-block crop.
std::string render_request(const PageImage& crop, const ExtractorConfig& cfg);

// Text content of the first choice of a chat-completion response body.
std::string response_text(std::string_view body);

// Sends the crop to the configured endpoint and recovers key/value pairs
// from the reply. Retries transport failures, 429 and 5xx with exponential
// backoff; 401/403 fail immediately.
// Throws Error(kTransportError / kAuthError / kEmptyExtraction).
RawExtraction extract_via_llm(const PageImage& crop,
                              const ExtractorConfig& cfg);

// Recovers ordered key/value pairs from model output that is supposed to be
// a JSON object but may be wrapped in prose or code fences, lack braces, or
// carry stray characters. Never throws.
std::vector<KeyValuePair> parse_tolerant_pairs(std::string_view text);

// Loads `<fixtures>/<drawing_id>.txt` (or `.json`) and parses it.
// Throws Error(kFixtureMissing).
RawExtraction mock_extract(const std::string& drawing_id,
                           const std::filesystem::path& fixtures);

}  // namespace tbx
