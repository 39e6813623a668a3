#include "tbx/extraction.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <regex>
#include <sstream>
#include <thread>

#include "tbx/errors.hpp"
#include "tbx/text.hpp"

namespace tbx {

using nlohmann::json;

std::string_view to_string(ExtractionSource s) {
  return s == ExtractionSource::kLlm ? "llm" : "mock";
}

Prompt build_prompt() {
  return {
      "You are an expert extracting text from an input image that is "
      "technical drawing.",
      "What text is in this drawing title block? Identify the title block "
      "cells and return their content in a JSON format, where the key is the "
      "cell title and the value is the content of the cell without the key.",
  };
}

void ExtractorConfig::validate() const {
  if (endpoint_url.empty()) {
    throw Error(ErrorCode::kConfigError, "LLM endpoint is not configured");
  }
  if (max_retries < 0) {
    throw Error(ErrorCode::kConfigError, "max_retries must be >= 0");
  }
  if (timeout.count() <= 0) {
    throw Error(ErrorCode::kConfigError, "timeout must be > 0");
  }
}

ExtractorConfig extractor_config_from_env() {
  ExtractorConfig cfg;
  auto env = [](const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  cfg.endpoint_url = env("TBX_LLM_ENDPOINT");
  cfg.api_key = env("TBX_LLM_API_KEY");
  cfg.model_name = env("TBX_LLM_MODEL");
  if (cfg.model_name.empty()) cfg.model_name = "gpt-4o";
  return cfg;
}

namespace {

std::string base64(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::optional<unsigned> hex4(std::string_view s, std::size_t i) {
  if (i + 4 > s.size()) return std::nullopt;
  unsigned v = 0;
  for (std::size_t k = i; k < i + 4; ++k) {
    const char c = s[k];
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<unsigned>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<unsigned>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') v |= static_cast<unsigned>(c - 'A' + 10);
    else return std::nullopt;
  }
  return v;
}

struct Decoded {
  std::string value;
  std::size_t end;  // index one past the closing quote
  bool closed;
};

// Lenient JSON string decoding starting at the opening quote `s[open]`.
Decoded decode_string(std::string_view s, std::size_t open) {
  Decoded d{{}, s.size(), false};
  std::size_t i = open + 1;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '"') {
      d.end = i + 1;
      d.closed = true;
      return d;
    }
    if (c != '\\' || i + 1 >= s.size()) {
      d.value.push_back(c);
      ++i;
      continue;
    }
    const char e = s[i + 1];
    i += 2;
    switch (e) {
      case 'n': d.value.push_back('\n'); break;
      case 't': d.value.push_back('\t'); break;
      case 'r': d.value.push_back('\r'); break;
      case 'b': d.value.push_back('\b'); break;
      case 'f': d.value.push_back('\f'); break;
      case 'u': {
        auto hi = hex4(s, i);
        if (!hi) {
          d.value += "\\u";
          break;
        }
        i += 4;
        char32_t cp = *hi;
        if (cp >= 0xD800 && cp <= 0xDBFF && i + 1 < s.size() && s[i] == '\\' &&
            s[i + 1] == 'u') {
          if (auto lo = hex4(s, i + 2); lo && *lo >= 0xDC00 && *lo <= 0xDFFF) {
            cp = 0x10000 + ((cp - 0xD800) << 10) + (*lo - 0xDC00);
            i += 6;
          }
        }
        if (cp >= 0xD800 && cp <= 0xDFFF) cp = 0xFFFD;
        append_utf8(d.value, cp);
        break;
      }
      default: d.value.push_back(e); break;
    }
  }
  return d;
}

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Strict parse of one JSON object that keeps duplicate keys and their order.
// Every key and value slice is validated by the JSON library.
class StrictObjectParser {
 public:
  explicit StrictObjectParser(std::string_view s) : s_(s) {}

  std::optional<std::vector<KeyValuePair>> parse() {
    try {
      return parse_object();
    } catch (...) {
      return std::nullopt;
    }
  }

 private:
  struct Fail {};

  void ws() {
    while (i_ < s_.size() && is_ws(s_[i_])) ++i_;
  }
  void expect(char c) {
    ws();
    if (i_ >= s_.size() || s_[i_] != c) throw Fail{};
    ++i_;
  }

  std::size_t string_end(std::size_t open) const {
    std::size_t i = open + 1;
    while (i < s_.size()) {
      if (s_[i] == '\\') {
        i += 2;
      } else if (s_[i] == '"') {
        return i + 1;
      } else {
        ++i;
      }
    }
    throw Fail{};
  }

  std::size_t value_end(std::size_t b) const {
    if (b >= s_.size()) throw Fail{};
    const char c = s_[b];
    if (c == '"') return string_end(b);
    if (c == '{' || c == '[') {
      int depth = 0;
      std::size_t i = b;
      while (i < s_.size()) {
        const char d = s_[i];
        if (d == '"') {
          i = string_end(i);
          continue;
        }
        if (d == '{' || d == '[') ++depth;
        if (d == '}' || d == ']') {
          if (--depth == 0) return i + 1;
        }
        ++i;
      }
      throw Fail{};
    }
    std::size_t i = b;
    while (i < s_.size() && s_[i] != ',' && s_[i] != '}' && !is_ws(s_[i])) ++i;
    return i;
  }

  std::vector<KeyValuePair> parse_object() {
    std::vector<KeyValuePair> out;
    expect('{');
    ws();
    if (i_ < s_.size() && s_[i_] == '}') {
      ++i_;
    } else {
      while (true) {
        ws();
        if (i_ >= s_.size() || s_[i_] != '"') throw Fail{};
        const std::size_t kend = string_end(i_);
        std::string key =
            json::parse(s_.substr(i_, kend - i_)).get<std::string>();
        i_ = kend;
        expect(':');
        ws();
        const std::size_t vend = value_end(i_);
        const std::string_view slice = s_.substr(i_, vend - i_);
        const json v = json::parse(slice);
        std::string value;
        if (v.is_string()) {
          value = v.get<std::string>();
        } else if (v.is_null()) {
          value.clear();
        } else if (v.is_structured()) {
          value = v.dump();
        } else {
          value = std::string(slice);
        }
        out.emplace_back(std::move(key), std::move(value));
        i_ = vend;
        ws();
        if (i_ < s_.size() && s_[i_] == ',') {
          ++i_;
          continue;
        }
        expect('}');
        break;
      }
    }
    ws();
    if (i_ != s_.size()) throw Fail{};
    return out;
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

std::string_view strip_fences(std::string_view s) {
  const std::size_t open = s.find("```");
  if (open == std::string_view::npos) return s;
  std::size_t body = s.find('\n', open);
  if (body == std::string_view::npos) return {};
  ++body;
  const std::size_t close = s.find("```", body);
  return s.substr(body, close == std::string_view::npos ? s.size() - body
                                                         : close - body);
}

std::string strip_key_junk(std::string_view key) {
  std::size_t b = 0;
  std::size_t e = key.size();
  while (b < e && !text::is_token_char(key[b])) ++b;
  while (e > b && !text::is_token_char(key[e - 1])) --e;
  return std::string(key.substr(b, e - b));
}

std::optional<KeyValuePair> parse_line(std::string_view line) {
  std::size_t p = 0;
  while (p < line.size() && line[p] != '"' && !text::is_token_char(line[p])) {
    ++p;
  }
  if (p >= line.size()) return std::nullopt;

  std::string key;
  std::size_t rest = std::string_view::npos;
  if (line[p] == '"') {
    const Decoded k = decode_string(line, p);
    if (k.closed) {
      std::size_t q = k.end;
      while (q < line.size() && is_ws(line[q])) ++q;
      if (q < line.size() && line[q] == ':') {
        key = text::trim(k.value);
        rest = q + 1;
      }
    }
  }
  if (rest == std::string_view::npos) {
    const std::size_t colon = line.find(':', p);
    if (colon == std::string_view::npos) return std::nullopt;
    key = strip_key_junk(line.substr(p, colon - p));
    rest = colon + 1;
    const std::string probe = text::trim(line.substr(rest));
    if (probe.empty() || probe == ",") return std::nullopt;
  }
  if (key.empty()) return std::nullopt;

  std::string_view v = line.substr(rest);
  while (!v.empty() && is_ws(v.front())) v.remove_prefix(1);
  std::string value;
  if (!v.empty() && v.front() == '"') {
    const Decoded d = decode_string(v, 0);
    value = d.value;
    if (!d.closed) {
      while (!value.empty() &&
             (value.back() == ',' || value.back() == '"' || is_ws(value.back()))) {
        value.pop_back();
      }
    }
  } else {
    value = text::trim(v);
    while (!value.empty() && (value.back() == ',' || is_ws(value.back()))) {
      value.pop_back();
    }
  }
  return KeyValuePair{std::move(key), text::trim(value)};
}

}  // namespace

std::vector<KeyValuePair> parse_tolerant_pairs(std::string_view input) {
  const std::string body = text::trim(strip_fences(input));
  std::string_view region = body;

  const std::size_t lb = body.find('{');
  const std::size_t rb = body.rfind('}');
  if (lb != std::string::npos && rb != std::string::npos && rb > lb) {
    region = std::string_view(body).substr(lb, rb - lb + 1);
    if (auto strict = StrictObjectParser(region).parse()) return *strict;
  } else if (!body.empty()) {
    std::string wrapped = body;
    while (!wrapped.empty() && (wrapped.back() == ',' || is_ws(wrapped.back()))) {
      wrapped.pop_back();
    }
    wrapped = "{" + wrapped + "}";
    if (auto strict = StrictObjectParser(wrapped).parse()) return *strict;
  }

  std::vector<KeyValuePair> out;
  std::size_t start = 0;
  while (start <= region.size()) {
    std::size_t nl = region.find('\n', start);
    if (nl == std::string_view::npos) nl = region.size();
    if (auto kv = parse_line(region.substr(start, nl - start))) {
      out.push_back(std::move(*kv));
    }
    start = nl + 1;
  }
  return out;
}

std::string render_request(const PageImage& crop, const ExtractorConfig& cfg) {
  const PageImage sized = limit_size(crop, cfg.max_image_side);
  const Prompt prompt = build_prompt();
  const std::string url =
      "data:image/png;base64," + base64(encode_png(sized));
  json body = {
      {"model", cfg.model_name},
      {"messages",
       json::array(
           {{{"role", "system"}, {"content", prompt.system}},
            {{"role", "user"},
             {"content",
              json::array({{{"type", "text"}, {"text", prompt.user}},
                           {{"type", "image_url"},
                            {"image_url", {{"url", url}}}}})}}})},
  };
  return body.dump();
}

std::string response_text(std::string_view body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::string(body);
  auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    return {};
  }
  const json& first = (*choices)[0];
  const json* content = nullptr;
  if (auto m = first.find("message"); m != first.end() && m->is_object()) {
    if (auto c = m->find("content"); c != m->end()) content = &*c;
  } else if (auto t = first.find("text"); t != first.end()) {
    content = &*t;
  }
  if (!content) return {};
  if (content->is_string()) return content->get<std::string>();
  std::string out;
  if (content->is_array()) {
    for (const json& part : *content) {
      if (auto t = part.find("text"); t != part.end() && t->is_string()) {
        out += t->get<std::string>();
      }
    }
  }
  return out;
}

RawExtraction extract_via_llm(const PageImage& crop,
                              const ExtractorConfig& cfg) {
  cfg.validate();
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)",
                                 std::regex::icase);
  std::smatch m;
  if (!std::regex_match(cfg.endpoint_url, m, url_re)) {
    throw Error(ErrorCode::kConfigError,
                "malformed endpoint URL: " + cfg.endpoint_url);
  }
  const std::string base = m[1].str();
  const std::string path = m[2].matched ? m[2].str() : "/";

  const std::string body = render_request(crop, cfg);
  httplib::Client cli(base);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
      cfg.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!cfg.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + cfg.api_key);
  }

  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      auto delay = cfg.backoff_base * (1LL << std::min(attempt - 1, 20));
      std::this_thread::sleep_for(std::min<std::chrono::milliseconds>(
          delay, cfg.backoff_cap));
    }
    auto res = cli.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    const int status = res->status;
    if (status == 401 || status == 403) {
      throw Error(ErrorCode::kAuthError,
                  "endpoint rejected credentials (HTTP " +
                      std::to_string(status) + ")");
    }
    if (status >= 200 && status < 300) {
      RawExtraction out;
      out.drawing_id = crop.drawing_id();
      out.source = ExtractionSource::kLlm;
      out.pairs = parse_tolerant_pairs(response_text(res->body));
      if (out.pairs.empty()) {
        throw Error(ErrorCode::kEmptyExtraction,
                    "response contained no key/value pairs");
      }
      return out;
    }
    last_error = "HTTP " + std::to_string(status);
    if (status != 429 && status < 500) break;
  }
  throw Error(ErrorCode::kTransportError,
              "LLM request failed after retries: " + last_error);
}

RawExtraction mock_extract(const std::string& drawing_id,
                           const std::filesystem::path& fixtures) {
  for (const char* ext : {".txt", ".json", ""}) {
    const auto path = fixtures / (drawing_id + ext);
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) continue;
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    RawExtraction out;
    out.drawing_id = drawing_id;
    out.source = ExtractionSource::kMock;
    out.pairs = parse_tolerant_pairs(ss.str());
    return out;
  }
  throw Error(ErrorCode::kFixtureMissing,
              "no extraction fixture for '" + drawing_id + "' in " +
                  fixtures.string());
}

}  // namespace tbx
