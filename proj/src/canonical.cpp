#include "tbx/canonical.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <regex>
#include <sstream>

#include "default_dictionary.hpp"
#include "tbx/errors.hpp"
#include "tbx/evaluation.hpp"
#include "tbx/text.hpp"

namespace tbx {

using nlohmann::json;

namespace {

std::string normalize_with(std::string_view raw,
                           const std::map<std::string, std::string>& abbrev) {
  std::string spaced;
  spaced.reserve(raw.size());
  for (char c : raw) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && !text::is_ascii_alnum(c)) {
      spaced.push_back(' ');
    } else {
      spaced.push_back(c);
    }
  }
  const std::string collapsed = text::normalize_spaces_lower(spaced);
  std::string out;
  std::size_t i = 0;
  while (i <= collapsed.size()) {
    std::size_t sp = collapsed.find(' ', i);
    if (sp == std::string::npos) sp = collapsed.size();
    std::string token = collapsed.substr(i, sp - i);
    if (!token.empty()) {
      if (auto it = abbrev.find(token); it != abbrev.end()) token = it->second;
      if (!out.empty()) out.push_back(' ');
      out += token;
    }
    i = sp + 1;
  }
  return out;
}

}  // namespace

const SynonymDictionary& SynonymDictionary::builtin() {
  static const SynonymDictionary dict =
      from_json(detail::kDefaultDictionaryJson);
  return dict;
}

void SynonymDictionary::add(Entry e) {
  static const std::regex id_re("^[a-z0-9_]+$");
  if (e.key.id.empty() || !std::regex_match(e.key.id, id_re)) {
    throw Error(ErrorCode::kDictionaryError,
                "invalid canonical id '" + e.key.id + "'");
  }
  if (find(e.key.id)) {
    throw Error(ErrorCode::kDictionaryError,
                "duplicate canonical id '" + e.key.id + "'");
  }
  std::vector<std::string> raw = std::move(e.aliases);
  raw.push_back(e.key.id);
  raw.push_back(e.key.display);
  std::vector<std::string> norm;
  for (const auto& a : raw) {
    std::string n = normalize_with(a, abbreviations_);
    if (n.empty()) continue;
    if (std::find(norm.begin(), norm.end(), n) == norm.end()) {
      norm.push_back(std::move(n));
    }
  }
  const std::size_t idx = entries_.size();
  for (const auto& n : norm) {
    auto [it, inserted] = alias_owner_.emplace(n, idx);
    if (!inserted) {
      throw Error(ErrorCode::kDictionaryError,
                  "alias '" + n + "' claimed by both '" +
                      entries_[it->second].key.id + "' and '" + e.key.id + "'");
    }
  }
  e.aliases = std::move(norm);
  entries_.push_back(std::move(e));
}

SynonymDictionary SynonymDictionary::from_json(std::string_view document) {
  json doc = json::parse(document, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::kDictionaryError, "dictionary is not a JSON object");
  }
  SynonymDictionary dict;
  try {
    if (auto ab = doc.find("abbreviations"); ab != doc.end()) {
      for (auto& [tok, exp] : ab->items()) {
        dict.abbreviations_[text::to_lower(tok)] =
            text::normalize_spaces_lower(exp.get<std::string>());
      }
    }
    auto keys = doc.find("keys");
    if (keys == doc.end() || !keys->is_object()) {
      throw Error(ErrorCode::kDictionaryError, "dictionary has no 'keys'");
    }
    for (auto& [id, spec] : keys->items()) {
      Entry e;
      e.key.id = id;
      e.key.display = spec.value("display", id);
      const std::string type = spec.value("type", "text");
      if (type == "date") {
        e.type = ValueType::kDate;
      } else if (type != "text") {
        throw Error(ErrorCode::kDictionaryError,
                    "key '" + id + "' has unknown type '" + type + "'");
      }
      if (auto al = spec.find("aliases"); al != spec.end()) {
        e.aliases = al->get<std::vector<std::string>>();
      }
      dict.add(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kDictionaryError,
                std::string("malformed dictionary: ") + e.what());
  }
  return dict;
}

SynonymDictionary SynonymDictionary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kDictionaryError, "cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string SynonymDictionary::to_json() const {
  json keys = json::object();
  for (const auto& e : entries_) {
    keys[e.key.id] = {{"display", e.key.display},
                      {"type", e.type == ValueType::kDate ? "date" : "text"},
                      {"aliases", e.aliases}};
  }
  return json{{"abbreviations", abbreviations_}, {"keys", keys}}.dump(2);
}

const SynonymDictionary::Entry* SynonymDictionary::find(
    std::string_view id) const {
  for (const auto& e : entries_) {
    if (e.key.id == id) return &e;
  }
  return nullptr;
}

const SynonymDictionary::Entry* SynonymDictionary::find_alias(
    std::string_view normalized) const {
  auto it = alias_owner_.find(normalized);
  return it == alias_owner_.end() ? nullptr : &entries_[it->second];
}

std::string normalize_key_text(std::string_view raw,
                               const SynonymDictionary& dict) {
  return normalize_with(raw, dict.abbreviations());
}

std::optional<CanonicalKey> canonicalize_key(std::string_view raw,
                                             const SynonymDictionary& dict) {
  const std::string norm = normalize_key_text(raw, dict);
  if (norm.empty()) return std::nullopt;
  if (const auto* e = dict.find_alias(norm)) return e->key;

  const bool gated =
      text::utf8_length(norm) > 10 || norm.find(' ') != std::string::npos;
  if (!gated) return std::nullopt;

  const SynonymDictionary::Entry* best = nullptr;
  std::size_t best_dist = 3;
  for (const auto& e : dict.entries()) {
    for (const auto& alias : e.aliases) {
      const std::size_t d = levenshtein(norm, alias);
      if (d > 2) continue;
      if (d < best_dist || (d == best_dist && best && e.key.id < best->key.id)) {
        best = &e;
        best_dist = d;
      }
    }
  }
  if (!best) return std::nullopt;
  return best->key;
}

// Dates

namespace {

constexpr std::array<std::pair<const char*, int>, 24> kMonths = {{
    {"jan", 1},     {"january", 1},  {"feb", 2},      {"february", 2},
    {"mar", 3},     {"march", 3},    {"apr", 4},      {"april", 4},
    {"may", 5},     {"jun", 6},      {"june", 6},     {"jul", 7},
    {"july", 7},    {"aug", 8},      {"august", 8},   {"sep", 9},
    {"sept", 9},    {"september", 9}, {"oct", 10},    {"october", 10},
    {"nov", 11},    {"november", 11}, {"dec", 12},    {"december", 12},
}};

std::optional<int> month_from_name(std::string_view name) {
  const std::string lower = text::to_lower(name);
  for (const auto& [n, m] : kMonths) {
    if (lower == n) return m;
  }
  return std::nullopt;
}

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30,
                                  31, 31, 30, 31, 30, 31};
  return m == 2 && leap(y) ? 29 : kDays[m - 1];
}

int pivot_year(int two_digit) {
  return two_digit >= 50 ? 1900 + two_digit : 2000 + two_digit;
}

std::optional<DateValue> checked(DateValue d) {
  if (!d.valid()) return std::nullopt;
  return d;
}

}  // namespace

bool DateValue::valid() const {
  if (year < 1 || year > 9999) return false;
  if (day && !month) return false;
  if (month && (*month < 1 || *month > 12)) return false;
  if (day && (*day < 1 || *day > days_in_month(year, *month))) return false;
  return true;
}

std::string DateValue::to_string() const {
  char buf[16];
  if (day) {
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, *month, *day);
  } else if (month) {
    std::snprintf(buf, sizeof buf, "%04d-%02d", year, *month);
  } else {
    std::snprintf(buf, sizeof buf, "%04d", year);
  }
  return buf;
}

std::optional<DateValue> parse_date(std::string_view raw) {
  static const std::regex month_name(R"(^([A-Za-z]+)\.?,?\s+(\d{4})$)");
  static const std::regex mm_yyyy(R"(^(\d{1,2})/(\d{4})$)");
  static const std::regex dotted(R"(^(\d{1,2})\.(\d{1,2})\.(\d{2}|\d{4})$)");
  static const std::regex mmyyyy(R"(^(\d{2})(\d{4})$)");
  static const std::regex yyyy(R"(^(\d{4})$)");

  const std::string s = text::trim(raw);
  std::smatch m;
  if (std::regex_match(s, m, month_name)) {
    const auto month = month_from_name(m[1].str());
    if (!month) return std::nullopt;
    return checked({std::stoi(m[2].str()), month, std::nullopt});
  }
  if (std::regex_match(s, m, mm_yyyy)) {
    return checked({std::stoi(m[2].str()), std::stoi(m[1].str()), std::nullopt});
  }
  if (std::regex_match(s, m, dotted)) {
    int y = std::stoi(m[3].str());
    if (m[3].length() == 2) y = pivot_year(y);
    return checked({y, std::stoi(m[2].str()), std::stoi(m[1].str())});
  }
  if (std::regex_match(s, m, mmyyyy)) {
    const int mm = std::stoi(m[1].str());
    if (mm < 1 || mm > 12) return std::nullopt;
    return checked({std::stoi(m[2].str()), mm, std::nullopt});
  }
  if (std::regex_match(s, m, yyyy)) {
    const int y = std::stoi(m[1].str());
    if (y < 1000) return std::nullopt;
    return checked({y, std::nullopt, std::nullopt});
  }
  return std::nullopt;
}

std::optional<DateValue> parse_iso_date(std::string_view iso) {
  static const std::regex re(R"(^(\d{4})(?:-(\d{2})(?:-(\d{2}))?)?$)");
  const std::string s(iso);
  std::smatch m;
  if (!std::regex_match(s, m, re)) return std::nullopt;
  DateValue d{std::stoi(m[1].str()), std::nullopt, std::nullopt};
  if (m[2].matched) d.month = std::stoi(m[2].str());
  if (m[3].matched) d.day = std::stoi(m[3].str());
  return checked(d);
}

CanonicalRecord merge_pairs(const RawExtraction& raw,
                            const SynonymDictionary& dict) {
  CanonicalRecord rec;
  rec.drawing_id = raw.drawing_id;
  for (const auto& [key, value] : raw.pairs) {
    std::string v = text::trim(value);
    auto canon = canonicalize_key(key, dict);
    if (!canon) {
      KeyValuePair pair(key, std::move(v));
      if (std::find(rec.unmatched.begin(), rec.unmatched.end(), pair) == rec.unmatched.end()) {
        rec.unmatched.push_back(std::move(pair));
      }
      continue;
    }
    auto& values = rec.fields[canon->id];
    const bool is_date = dict.find(canon->id)->type == ValueType::kDate;
    if (is_date && !rec.dates.contains(canon->id)) {
      if (auto d = parse_date(v)) rec.dates.emplace(canon->id, *d);
    }
    if (std::find(values.begin(), values.end(), v) == values.end()) {
      values.push_back(std::move(v));
    }
  }
  return rec;
}

}  // namespace tbx
