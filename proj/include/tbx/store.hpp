#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "tbx/canonical.hpp"
#include "tbx/query.hpp"

namespace tbx {

// (canonical key, token) -> drawing ids.
class InvertedIndex {
 public:
  using Postings = std::map<std::string, std::map<std::string, std::set<std::string>>>;

  void add(const CanonicalRecord& rec);
  void remove(const CanonicalRecord& rec);

  // Ids holding a token under `key` that contains `needle` (already
  // lowercase and free of separators).
  std::set<std::string> token_substring(const std::string& key,
                                        const std::string& needle) const;

  const Postings& postings() const noexcept { return postings_; }
  bool operator==(const InvertedIndex&) const = default;

 private:
  Postings postings_;
};

// Append-only newline-delimited journal. A trailing line without its newline
// is a torn write from an interrupted process; it is dropped on open.
class Journal {
 public:
  Journal(std::filesystem::path path, bool sync);
  ~Journal();
  Journal(const Journal&) = delete;
  Journal& operator=(const Journal&) = delete;

  // Complete lines present when the journal was opened.
  const std::vector<std::string>& recovered() const noexcept { return recovered_; }
  std::size_t torn_bytes() const noexcept { return torn_bytes_; }

  // Throws Error(kPersistenceError); on failure the file is rolled back to
  // its previous length.
  void append(const std::string& line);

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  bool sync_;
  int fd_ = -1;
  long long size_ = 0;
  std::vector<std::string> recovered_;
  std::size_t torn_bytes_ = 0;
};

struct KeywordSummary {
  std::size_t record_count = 0;
  std::vector<std::pair<std::string, std::size_t>> top_values;
};

struct RenameEntry {
  std::string drawing_id;
  std::string old_name;
  std::string new_name;
};

struct RenamePlan {
  std::string template_text;
  std::vector<RenameEntry> entries;
  std::vector<std::string> collisions;

  // Hex SHA-256 of the plan's canonical JSON.
  std::string hash() const;
  std::string to_json() const;
};

struct RenameResult {
  std::vector<RenameEntry> renamed;
  std::vector<std::pair<std::string, std::string>> skipped;  // id, reason
};

inline constexpr const char* kMissingGroup = "(missing)";

// Canonical records with an inverted index and an optional journal.
// Many concurrent readers, one writer at a time; a reader sees a write either
// completely or not at all.
class RecordStore {
 public:
  // In-memory store.
  explicit RecordStore(const SynonymDictionary& dict = SynonymDictionary::builtin());

  // Journal-backed store at `<data_dir>/journal.ndjson`, replayed on open.
  // Throws Error(kPersistenceError) on unreadable or corrupt journals.
  RecordStore(const std::filesystem::path& data_dir, const SynonymDictionary& dict,
              bool sync = true);

  static std::filesystem::path journal_path(const std::filesystem::path& data_dir);

  // Replaces any prior version. When `source` is set the drawing's file path
  // is recorded in the same journal entry.
  void upsert(const CanonicalRecord& rec,
              const std::optional<std::string>& source = std::nullopt);
  void register_source(const std::string& drawing_id, const std::string& path);

  std::optional<CanonicalRecord> get(const std::string& drawing_id) const;
  std::optional<std::string> source(const std::string& drawing_id) const;
  std::vector<std::string> ids() const;
  std::size_t size() const;

  std::vector<std::string> search(const QueryNode& q) const;
  std::map<std::string, KeywordSummary> keyword_summary(std::size_t top_n = 10) const;
  // Throws UnknownKeyError when `key` is not a canonical id.
  std::map<std::string, std::vector<std::string>> group_by(const std::string& key) const;
  // Throws Error(kBadTemplate) on unknown placeholders or unbalanced braces.
  RenamePlan rename_plan(const std::string& template_text) const;
  RenameResult apply_rename(const RenamePlan& plan);

  // Canonical serialization of records and sources, for equality checks.
  std::string snapshot() const;
  InvertedIndex index() const;
  InvertedIndex rebuild_index() const;

  const SynonymDictionary& dictionary() const noexcept { return dict_; }

 private:
  void apply_line(const std::string& line, std::size_t lineno);
  void apply_upsert(const CanonicalRecord& rec);
  std::set<std::string> eval(const QueryNode& q) const;
  std::set<std::string> eval_contains(const std::string& key, const std::string& term) const;

  SynonymDictionary dict_;
  mutable std::shared_mutex mu_;
  std::mutex write_mu_;
  std::map<std::string, CanonicalRecord> records_;
  std::map<std::string, std::string> sources_;
  InvertedIndex index_;
  std::unique_ptr<Journal> journal_;
};

// Replaces everything but ASCII alphanumerics, '-', '_', '.' and non-ASCII
// bytes with '_'.
std::string sanitize_filename(std::string_view name);

// Matching drawing ids in id order.
inline std::vector<std::string> eval_query(const QueryNode& q, const RecordStore& store) {
  return store.search(q);
}

}  // namespace tbx
