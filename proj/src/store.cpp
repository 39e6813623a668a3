#include "tbx/store.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <sstream>

#include "tbx/errors.hpp"
#include "tbx/serialization.hpp"
#include "tbx/text.hpp"

namespace tbx {

using nlohmann::json;

// Index

void InvertedIndex::add(const CanonicalRecord& rec) {
  for (const auto& [key, values] : rec.fields) {
    auto& by_token = postings_[key];
    for (const auto& v : values) {
      for (auto& tok : tokenize(v)) by_token[tok].insert(rec.drawing_id);
    }
  }
}

void InvertedIndex::remove(const CanonicalRecord& rec) {
  for (const auto& [key, values] : rec.fields) {
    auto kit = postings_.find(key);
    if (kit == postings_.end()) continue;
    for (const auto& v : values) {
      for (const auto& tok : tokenize(v)) {
        auto tit = kit->second.find(tok);
        if (tit == kit->second.end()) continue;
        tit->second.erase(rec.drawing_id);
        if (tit->second.empty()) kit->second.erase(tit);
      }
    }
    if (kit->second.empty()) postings_.erase(kit);
  }
}

std::set<std::string> InvertedIndex::token_substring(const std::string& key,
                                                     const std::string& needle) const {
  std::set<std::string> out;
  auto kit = postings_.find(key);
  if (kit == postings_.end()) return out;
  for (const auto& [tok, ids] : kit->second) {
    if (tok.find(needle) != std::string::npos) out.insert(ids.begin(), ids.end());
  }
  return out;
}

// Journal

Journal::Journal(std::filesystem::path path, bool sync)
    : path_(std::move(path)), sync_(sync) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(path_, ec)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) {
      throw Error(ErrorCode::kPersistenceError, "cannot read journal " + path_.string());
    }
    const std::string data((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    std::size_t start = 0;
    while (start < data.size()) {
      const std::size_t nl = data.find('\n', start);
      if (nl == std::string::npos) {
        torn_bytes_ = data.size() - start;
        break;
      }
      if (nl > start) recovered_.emplace_back(data.substr(start, nl - start));
      start = nl + 1;
    }
    size_ = static_cast<long long>(data.size() - torn_bytes_);
    if (torn_bytes_ > 0) {
      std::filesystem::resize_file(path_, static_cast<std::uintmax_t>(size_), ec);
      if (ec) {
        throw Error(ErrorCode::kPersistenceError,
                    "cannot drop torn journal tail: " + ec.message());
      }
    }
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw Error(ErrorCode::kPersistenceError,
                "cannot open journal " + path_.string() + ": " + std::strerror(errno));
  }
}

Journal::~Journal() {
  if (fd_ >= 0) ::close(fd_);
}

void Journal::append(const std::string& line) {
  const std::string data = line + "\n";
  std::size_t done = 0;
  auto fail = [&](const char* what) {
    const int err = errno;
    if (::ftruncate(fd_, size_) != 0) {
      // Nothing more to do; the torn tail is dropped on the next open.
    }
    throw Error(ErrorCode::kPersistenceError,
                std::string(what) + " " + path_.string() + ": " + std::strerror(err));
  };
  while (done < data.size()) {
    const ssize_t n = ::write(fd_, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("journal write failed for");
    }
    done += static_cast<std::size_t>(n);
  }
  if (sync_ && ::fdatasync(fd_) != 0 && errno != EINVAL) fail("journal sync failed for");
  size_ += static_cast<long long>(data.size());
}

// Store

RecordStore::RecordStore(const SynonymDictionary& dict) : dict_(dict) {}

RecordStore::RecordStore(const std::filesystem::path& data_dir,
                         const SynonymDictionary& dict, bool sync)
    : dict_(dict) {
  std::error_code ec;
  std::filesystem::create_directories(data_dir, ec);
  if (ec) {
    throw Error(ErrorCode::kPersistenceError,
                "cannot create data directory " + data_dir.string() + ": " + ec.message());
  }
  journal_ = std::make_unique<Journal>(journal_path(data_dir), sync);
  std::size_t lineno = 0;
  for (const auto& line : journal_->recovered()) apply_line(line, ++lineno);
}

std::filesystem::path RecordStore::journal_path(const std::filesystem::path& data_dir) {
  return data_dir / "journal.ndjson";
}

void RecordStore::apply_line(const std::string& line, std::size_t lineno) {
  try {
    const json j = json::parse(line);
    const std::string op = j.at("op").get<std::string>();
    if (op == "upsert") {
      const auto rec = j.at("record").get<CanonicalRecord>();
      apply_upsert(rec);
      if (auto s = j.find("source"); s != j.end() && s->is_string()) {
        sources_[rec.drawing_id] = s->get<std::string>();
      }
    } else if (op == "register") {
      sources_[j.at("drawing_id").get<std::string>()] = j.at("path").get<std::string>();
    } else {
      throw Error(ErrorCode::kPersistenceError, "unknown op '" + op + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kPersistenceError,
                "corrupt journal line " + std::to_string(lineno) + ": " + e.what());
  }
}

void RecordStore::apply_upsert(const CanonicalRecord& rec) {
  if (auto it = records_.find(rec.drawing_id); it != records_.end()) {
    index_.remove(it->second);
    it->second = rec;
  } else {
    records_.emplace(rec.drawing_id, rec);
  }
  index_.add(rec);
}

void RecordStore::upsert(const CanonicalRecord& rec, const std::optional<std::string>& source) {
  json entry = {{"op", "upsert"}, {"record", rec}};
  if (source) entry["source"] = *source;
  const std::string line = entry.dump();

  std::lock_guard writer(write_mu_);
  if (journal_) journal_->append(line);
  std::unique_lock lock(mu_);
  apply_upsert(rec);
  if (source) sources_[rec.drawing_id] = *source;
}

void RecordStore::register_source(const std::string& drawing_id, const std::string& path) {
  const std::string line =
      json{{"op", "register"}, {"drawing_id", drawing_id}, {"path", path}}.dump();
  std::lock_guard writer(write_mu_);
  if (journal_) journal_->append(line);
  std::unique_lock lock(mu_);
  sources_[drawing_id] = path;
}

std::optional<CanonicalRecord> RecordStore::get(const std::string& drawing_id) const {
  std::shared_lock lock(mu_);
  auto it = records_.find(drawing_id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> RecordStore::source(const std::string& drawing_id) const {
  std::shared_lock lock(mu_);
  auto it = sources_.find(drawing_id);
  if (it == sources_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> RecordStore::ids() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  out.reserve(records_.size());
  for (const auto& [id, _] : records_) out.push_back(id);
  return out;
}

std::size_t RecordStore::size() const {
  std::shared_lock lock(mu_);
  return records_.size();
}

// Query evaluation. Callers hold the shared lock.

std::set<std::string> RecordStore::eval_contains(const std::string& key,
                                                 const std::string& term) const {
  const std::string needle = text::to_lower(term);
  const bool single_token =
      !needle.empty() && std::all_of(needle.begin(), needle.end(), text::is_token_char);
  if (single_token) {
    // A separator-free needle can only occur inside one token.
    return index_.token_substring(key, needle);
  }
  std::set<std::string> out;
  for (const auto& [id, rec] : records_) {
    auto f = rec.fields.find(key);
    if (f == rec.fields.end()) continue;
    for (const auto& v : f->second) {
      if (text::to_lower(v).find(needle) != std::string::npos) {
        out.insert(id);
        break;
      }
    }
  }
  return out;
}

std::set<std::string> RecordStore::eval(const QueryNode& q) const {
  using K = QueryNode::Kind;
  auto all = [&] {
    std::set<std::string> s;
    for (const auto& [id, _] : records_) s.insert(s.end(), id);
    return s;
  };
  auto intersect = [](const std::set<std::string>& a, const std::set<std::string>& b) {
    std::set<std::string> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                          std::inserter(out, out.end()));
    return out;
  };

  switch (q.kind) {
    case K::kAnd: {
      std::set<std::string> acc = all();
      for (const auto& c : q.children) {
        if (acc.empty()) break;
        acc = intersect(acc, eval(c));
      }
      return acc;
    }
    case K::kOr: {
      std::set<std::string> acc;
      for (const auto& c : q.children) {
        auto s = eval(c);
        acc.insert(s.begin(), s.end());
      }
      return acc;
    }
    case K::kNot: {
      const auto inner = eval(q.children.at(0));
      std::set<std::string> out;
      for (const auto& [id, _] : records_) {
        if (!inner.contains(id)) out.insert(out.end(), id);
      }
      return out;
    }
    case K::kContains:
      return eval_contains(q.key, q.terms.at(0));
    case K::kInAll: {
      std::set<std::string> acc = eval_contains(q.key, q.terms.at(0));
      for (std::size_t i = 1; i < q.terms.size() && !acc.empty(); ++i) {
        acc = intersect(acc, eval_contains(q.key, q.terms[i]));
      }
      return acc;
    }
    case K::kInAny: {
      std::set<std::string> acc;
      for (const auto& t : q.terms) {
        auto s = eval_contains(q.key, t);
        acc.insert(s.begin(), s.end());
      }
      return acc;
    }
    case K::kEquals: {
      const std::string want = text::normalize_spaces_lower(q.terms.at(0));
      std::set<std::string> out;
      for (const auto& [id, rec] : records_) {
        auto f = rec.fields.find(q.key);
        if (f == rec.fields.end()) continue;
        if (std::any_of(f->second.begin(), f->second.end(), [&](const std::string& v) {
              return text::normalize_spaces_lower(v) == want;
            })) {
          out.insert(out.end(), id);
        }
      }
      return out;
    }
    case K::kDateCmp: {
      std::set<std::string> out;
      for (const auto& [id, rec] : records_) {
        auto d = rec.dates.find(q.key);
        if (d != rec.dates.end() && date_matches(d->second, q.op, q.date)) {
          out.insert(out.end(), id);
        }
      }
      return out;
    }
  }
  return {};
}

std::vector<std::string> RecordStore::search(const QueryNode& q) const {
  std::shared_lock lock(mu_);
  const auto hits = eval(q);
  return {hits.begin(), hits.end()};
}

std::map<std::string, KeywordSummary> RecordStore::keyword_summary(std::size_t top_n) const {
  std::shared_lock lock(mu_);
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  std::map<std::string, KeywordSummary> out;
  for (const auto& [id, rec] : records_) {
    for (const auto& [key, values] : rec.fields) {
      ++out[key].record_count;
      for (const auto& v : values) ++counts[key][v];
    }
  }
  for (auto& [key, summary] : out) {
    std::vector<std::pair<std::string, std::size_t>> ranked(counts[key].begin(),
                                                            counts[key].end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.second > b.second;
    });
    if (ranked.size() > top_n) ranked.resize(top_n);
    summary.top_values = std::move(ranked);
  }
  return out;
}

std::map<std::string, std::vector<std::string>> RecordStore::group_by(
    const std::string& key) const {
  if (!dict_.find(key)) throw UnknownKeyError(0, key);
  std::shared_lock lock(mu_);
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [id, rec] : records_) {
    auto f = rec.fields.find(key);
    if (f == rec.fields.end() || f->second.empty()) {
      out[kMissingGroup].push_back(id);
      continue;
    }
    for (const auto& v : f->second) out[v].push_back(id);
  }
  return out;
}

// Renaming

std::string sanitize_filename(std::string_view name) {
  std::string out(name);
  for (char& c : out) {
    const bool ok = text::is_token_char(c) || c == '-' || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return out;
}

namespace {

struct TemplatePart {
  bool placeholder;
  std::string text;
};

std::vector<TemplatePart> parse_template(const std::string& tpl, const SynonymDictionary& dict) {
  std::vector<TemplatePart> parts;
  std::size_t i = 0;
  bool any = false;
  while (i < tpl.size()) {
    const std::size_t open = tpl.find_first_of("{}", i);
    if (open == std::string::npos) {
      parts.push_back({false, tpl.substr(i)});
      break;
    }
    if (tpl[open] == '}') {
      throw Error(ErrorCode::kBadTemplate, "unbalanced '}' at offset " + std::to_string(open));
    }
    if (open > i) parts.push_back({false, tpl.substr(i, open - i)});
    const std::size_t close = tpl.find('}', open);
    if (close == std::string::npos) {
      throw Error(ErrorCode::kBadTemplate, "unterminated '{' at offset " + std::to_string(open));
    }
    std::string key = tpl.substr(open + 1, close - open - 1);
    if (!dict.find(key)) {
      throw Error(ErrorCode::kBadTemplate, "unknown placeholder {" + key + "}");
    }
    parts.push_back({true, std::move(key)});
    any = true;
    i = close + 1;
  }
  if (!any) throw Error(ErrorCode::kBadTemplate, "template has no {placeholder}");
  return parts;
}

std::string hex_sha256(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  static const char* kHex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

}  // namespace

std::string RenamePlan::to_json() const {
  json entries_j = json::array();
  for (const auto& e : entries) {
    entries_j.push_back(
        {{"drawing_id", e.drawing_id}, {"old_name", e.old_name}, {"new_name", e.new_name}});
  }
  return json{{"template", template_text}, {"entries", entries_j}, {"collisions", collisions}}
      .dump();
}

std::string RenamePlan::hash() const { return hex_sha256(to_json()); }

RenamePlan RecordStore::rename_plan(const std::string& template_text) const {
  const auto parts = parse_template(template_text, dict_);
  std::shared_lock lock(mu_);
  RenamePlan plan;
  plan.template_text = template_text;
  std::set<std::string> used;
  std::map<std::string, std::size_t> seen;
  for (const auto& [id, rec] : records_) {
    std::string stem;
    for (const auto& p : parts) {
      if (!p.placeholder) {
        stem += p.text;
        continue;
      }
      auto f = rec.fields.find(p.text);
      stem += f == rec.fields.end() || f->second.empty() ? "unknown" : f->second.front();
    }
    stem = sanitize_filename(stem);

    std::string old_name = id;
    std::string ext;
    if (auto s = sources_.find(id); s != sources_.end()) {
      const std::filesystem::path path(s->second);
      old_name = path.filename().string();
      ext = path.extension().string();
    }
    std::string name = stem + ext;
    if (++seen[name] == 2) plan.collisions.push_back(name);
    for (std::size_t k = 2; used.contains(name); ++k) {
      name = stem + "-" + std::to_string(k) + ext;
    }
    used.insert(name);
    plan.entries.push_back({id, old_name, name});
  }
  return plan;
}

RenameResult RecordStore::apply_rename(const RenamePlan& plan) {
  RenameResult result;
  for (const auto& e : plan.entries) {
    const auto src = source(e.drawing_id);
    if (!src) {
      result.skipped.emplace_back(e.drawing_id, "no file registered");
      continue;
    }
    const std::filesystem::path from(*src);
    const std::filesystem::path to = from.parent_path() / e.new_name;
    if (from.filename() != e.old_name) {
      result.skipped.emplace_back(e.drawing_id, "file changed since the plan was made");
      continue;
    }
    if (from == to) continue;
    std::error_code ec;
    if (std::filesystem::exists(to, ec)) {
      result.skipped.emplace_back(e.drawing_id, "target exists: " + to.string());
      continue;
    }
    std::filesystem::rename(from, to, ec);
    if (ec) {
      result.skipped.emplace_back(e.drawing_id, ec.message());
      continue;
    }
    register_source(e.drawing_id, to.string());
    result.renamed.push_back(e);
  }
  return result;
}

std::string RecordStore::snapshot() const {
  std::shared_lock lock(mu_);
  json records = json::array();
  for (const auto& [id, rec] : records_) records.push_back(rec);
  return json{{"records", records}, {"sources", sources_}}.dump();
}

InvertedIndex RecordStore::index() const {
  std::shared_lock lock(mu_);
  return index_;
}

InvertedIndex RecordStore::rebuild_index() const {
  std::shared_lock lock(mu_);
  InvertedIndex idx;
  for (const auto& [id, rec] : records_) idx.add(rec);
  return idx;
}

}  // namespace tbx
