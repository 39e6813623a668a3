#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "tbx/extraction.hpp"

namespace tbx {

enum class ValueType { kText, kDate };

struct CanonicalKey {
  std::string id;       // snake_case, e.g. drawing_description
  std::string display;  // e.g. "Drawing description"

  bool operator==(const CanonicalKey& o) const { return id == o.id; }
  auto operator<=>(const CanonicalKey& o) const { return id <=> o.id; }
};

// Canonical keys, their aliases and the token abbreviation table used to
// normalize raw cell titles. Aliases are stored normalized.
class SynonymDictionary {
 public:
  struct Entry {
    CanonicalKey key;
    ValueType type = ValueType::kText;
    std::vector<std::string> aliases;  // normalized, includes id and display
  };

  // The curated dictionary shipped with the library.
  static const SynonymDictionary& builtin();

  // Throws Error(kDictionaryError) on malformed documents or when two
  // canonical keys share an alias.
  static SynonymDictionary from_json(std::string_view document);
  static SynonymDictionary load(const std::filesystem::path& path);

  std::string to_json() const;

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  const std::map<std::string, std::string>& abbreviations() const noexcept {
    return abbreviations_;
  }
  const Entry* find(std::string_view id) const;
  // Canonical id owning an (already normalized) alias.
  const Entry* find_alias(std::string_view normalized) const;

 private:
  void add(Entry e);

  std::vector<Entry> entries_;
  std::map<std::string, std::string> abbreviations_;
  std::map<std::string, std::size_t, std::less<>> alias_owner_;
};

// Lowercases, turns punctuation into spaces, collapses whitespace and
// expands abbreviation tokens ("Dwg. Desc." -> "drawing description").
std::string normalize_key_text(std::string_view raw,
                               const SynonymDictionary& dict);

// Exact alias lookup, then fuzzy lookup (edit distance <= 2, only for
// normalized keys longer than 10 characters or containing a space).
std::optional<CanonicalKey> canonicalize_key(std::string_view raw,
                                             const SynonymDictionary& dict);

struct DateValue {
  int year = 0;
  std::optional<int> month;
  std::optional<int> day;

  bool operator==(const DateValue&) const = default;

  // Lexicographic over (year, month or 0, day or 0).
  auto operator<=>(const DateValue& o) const {
    return std::tuple(year, month.value_or(0), day.value_or(0)) <=>
           std::tuple(o.year, o.month.value_or(0), o.day.value_or(0));
  }

  // ISO-like text: "1973", "1973-05" or "2022-03-28".
  std::string to_string() const;
  bool valid() const;
};

// Accepts "May 1973", "MM/YYYY", "DD.MM.YY", "DD.MM.YYYY", "MMYYYY" and
// "YYYY". Two-digit years pivot at 50 (>= 50 -> 19xx).
std::optional<DateValue> parse_date(std::string_view raw);
std::optional<DateValue> parse_iso_date(std::string_view iso);

struct CanonicalRecord {
  std::string drawing_id;
  // Values in first-seen order, no duplicates.
  std::map<std::string, std::vector<std::string>> fields;
  std::map<std::string, DateValue> dates;
  std::vector<KeyValuePair> unmatched;

  bool operator==(const CanonicalRecord&) const = default;
};

CanonicalRecord merge_pairs(const RawExtraction& raw,
                            const SynonymDictionary& dict);

}  // namespace tbx
