// Acceptance checks: one PASS/FAIL line per criterion.

#include <httplib.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <thread>

#include "support/fixtures.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"
#include "tbx/canonical.hpp"
#include "tbx/coco.hpp"
#include "tbx/evaluation.hpp"
#include "tbx/geometry.hpp"
#include "tbx/pipeline.hpp"
#include "tbx/query.hpp"
#include "tbx/serialization.hpp"
#include "tbx/store.hpp"

using namespace tbx;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned limits.
constexpr double kLevenshteinSeconds = 5.0;
constexpr double kEndToEndSeconds = 30.0;
constexpr double kQuerySeconds = 10.0;
constexpr double kDetectorHitRate = 0.90;
constexpr double kDetectorIou = 0.7;
constexpr double kRoundTripPoints = 0.5;
constexpr double kExact = 1e-12;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::u32string random_code_points(std::mt19937& rng, int max_len) {
  static const char32_t kAlphabet[] = {U'a', U'b', U'c', U'd', U' ', U'1', U'/', U'é', U'ß', U'中', U'\U0001F600'};
  std::u32string s;
  const int n = std::uniform_int_distribution<int>(0, max_len)(rng);
  for (int i = 0; i < n; ++i) s.push_back(kAlphabet[rng() % std::size(kAlphabet)]);
  return s;
}

Outcome levenshtein_oracle() {
  std::mt19937 rng(2024);
  const auto t0 = Clock::now();
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto a = random_code_points(rng, 24), b = random_code_points(rng, 24);
    if (levenshtein(testing::encode_utf8(a), testing::encode_utf8(b)) != testing::oracle_levenshtein(a, b)) ++mismatches;
  }
  int axiom_failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = testing::encode_utf8(random_code_points(rng, 16));
    const auto b = testing::encode_utf8(random_code_points(rng, 16));
    const auto c = testing::encode_utf8(random_code_points(rng, 16));
    const auto ab = levenshtein(a, b), bc = levenshtein(b, c), ac = levenshtein(a, c);
    if (ab != levenshtein(b, a) || ac > ab + bc || levenshtein(a, a) != 0) ++axiom_failures;
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "mismatches=" << mismatches << " axiom_failures=" << axiom_failures << " time=" << secs << "s";
  return {mismatches == 0 && axiom_failures == 0 && secs < kLevenshteinSeconds, d.str()};
}

Outcome fuzzy_gates() {
  struct Vec {
    bool key;
    const char* pred;
    const char* gt;
    bool want;
  };
  const Vec vectors[] = {
      // Key gate: longer than 10 characters or containing whitespace.
      {true, "Drawing Descriptiom", "Drawing Description", true},
      {true, "Drawn bi", "Drawn by", true},
      {true, "Drwn bi", "Drawn by", true},
      {true, "Drn bx", "Drawn by", false},  // distance 3
      {true, "revisionnox", "revisionnum", true},   // 11 chars: gate open
      {true, "revisionxyz", "revisionnum", false},  // distance 3
      {true, "checkedbx", "checkedby", false},      // 9 chars: exact only
      {true, "checkedbyxx", "checkedbyzz", true},   // 11 chars, distance 2
      {true, "abcdefghij", "abcdefghix", false},    // exactly 10: exact only
      {true, "Scle", "Scale", false},
      {true, "scale", "Scale", true},
      {true, "  SCALE ", "scale", true},
      // Value gate: longer than 20 characters.
      {false, "ISSUED FOR CONSTRUCTON", "ISSUED FOR CONSTRUCTION", true},
      {false, "ISSUED FOR CONSTRUCT", "ISSUED FOR CONSTRUCTION", true},   // distance 3
      {false, "ISSUED FOR CONSTRU", "ISSUED FOR CONSTRUCTION", false},    // distance 5
      {false, "issued for construction", "ISSUED FOR CONSTRUCTION", true},
      {false, "abcdefghijklmnopqrsx", "abcdefghijklmnopqrst", false},     // exactly 20: exact only
      {false, "abcdefghijklmnopqrstx", "abcdefghijklmnopqrstu", true},    // 21 chars, distance 1
      {false, "1:10", "1:10", true},
      {false, "1:10", "1:20", false},
      {false, "SECTION LEVEL 01", "SECTION LEVEL 00", false},
  };
  int failed = 0;
  std::string first;
  for (const auto& v : vectors) {
    const bool got = v.key ? fuzzy_key_match(v.pred, v.gt) : fuzzy_value_match(v.pred, v.gt);
    if (got != v.want) {
      if (failed++ == 0) first = std::string(v.pred) + " vs " + v.gt;
    }
  }
  return {failed == 0, std::to_string(std::size(vectors) - failed) + "/" + std::to_string(std::size(vectors)) +
                           " vectors" + (failed ? " first failure: " + first : "")};
}

Outcome iou_oracle() {
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> pos(0, 199);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    int ax = pos(rng), ay = pos(rng), bx = pos(rng), by = pos(rng);
    int aw = 1 + static_cast<int>(rng() % (200 - ax)), ah = 1 + static_cast<int>(rng() % (200 - ay));
    int bw = 1 + static_cast<int>(rng() % (200 - bx)), bh = 1 + static_cast<int>(rng() % (200 - by));
    const double got = iou(BoundingBox(ax, ay, aw, ah), BoundingBox(bx, by, bw, bh));
    const double want = testing::pixel_iou(ax, ay, aw, ah, bx, by, bw, bh);
    if (std::abs(got - want) > kExact) ++mismatches;
  }
  const BoundingBox a(3, 4, 50, 60);
  const bool self = iou(a, a) == 1.0;
  const bool disjoint = iou(a, BoundingBox(100, 100, 5, 5)) == 0.0;
  return {mismatches == 0 && self && disjoint,
          "mismatches=" + std::to_string(mismatches) + " self=" + (self ? "1" : "0") +
              " disjoint=" + (disjoint ? "0" : "nonzero")};
}

Outcome detection_counting() {
  const BoundingBox g(0, 0, 100, 100);
  DetectionMap gts{{"d1", {Detection(g, Category::kTitleBlock, 1.0)}}, {"d2", {Detection(g, Category::kTitleBlock, 1.0)}}};
  DetectionMap preds{
      {"d1", {Detection(BoundingBox(0, 0, 100, 80), Category::kTitleBlock, 0.9),
              Detection(BoundingBox(0, 25, 100, 75), Category::kTitleBlock, 0.7)}},
      {"d2", {Detection(BoundingBox(0, 0, 100, 90), Category::kTitleBlock, 0.8),
              Detection(BoundingBox(500, 500, 50, 50), Category::kTitleBlock, 0.6)}}};
  const auto m = evaluate_detections(preds, gts)[Category::kTitleBlock];
  const bool fixture = m.tp == 2 && m.fp == 1 && m.fn == 0 && std::abs(m.precision - 2.0 / 3.0) < kExact &&
                       m.recall == 1.0;

  std::mt19937 rng(5);
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    DetectionMap g2, p2;
    std::array<std::size_t, 4> gt_count{};
    const int drawings = 1 + static_cast<int>(rng() % 6);
    for (int d = 0; d < drawings; ++d) {
      const std::string id = "d" + std::to_string(d);
      auto& gv = g2[id];
      auto& pv = p2[id];
      const int ng = static_cast<int>(rng() % 5), np = static_cast<int>(rng() % 7);
      auto box = [&] {
        return BoundingBox(static_cast<double>(rng() % 150), static_cast<double>(rng() % 150),
                           static_cast<double>(10 + rng() % 50), static_cast<double>(10 + rng() % 50));
      };
      for (int k = 0; k < ng; ++k) {
        const auto c = static_cast<Category>(rng() % 4);
        gv.emplace_back(box(), c, 1.0);
        ++gt_count[static_cast<std::size_t>(c)];
      }
      for (int k = 0; k < np; ++k) {
        // Half the predictions jitter an existing GT box.
        if (!gv.empty() && rng() % 2 == 0) {
          const Detection& src = gv[rng() % gv.size()];
          const double dx = static_cast<double>(rng() % 7);
          pv.emplace_back(BoundingBox(src.box.x() + dx, src.box.y(), src.box.w(), src.box.h()), src.category,
                          (rng() % 1000) / 1000.0);
        } else {
          pv.emplace_back(box(), static_cast<Category>(rng() % 4), (rng() % 1000) / 1000.0);
        }
      }
    }
    const auto mm = evaluate_detections(p2, g2);
    for (Category c : kAllCategories) {
      const auto& r = mm[c];
      if (r.tp + r.fn != gt_count[static_cast<std::size_t>(c)] || r.gt != gt_count[static_cast<std::size_t>(c)]) {
        ++violations;
      }
    }
  }
  std::ostringstream d;
  d << "fixture tp=" << m.tp << " fp=" << m.fp << " fn=" << m.fn << " precision=" << m.precision
    << " recall=" << m.recall << "; tp+fn!=gt in " << violations << " of 400 category checks";
  return {fixture && violations == 0, d.str()};
}

Outcome end_to_end() {
  const auto t0 = Clock::now();
  testing::TempDir dir("tbx-e2e");
  std::filesystem::create_directories(dir / "in");
  const auto fixtures = testing::fixtures_dir() / "e2e";
  std::mt19937 rng(1970);
  for (int i = 0; i < 10; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "drawing-%02d", i);
    save_png(testing::make_sheet(rng, id).image, dir / "in" / (std::string(id) + ".png"));
  }
  PipelineConfig cfg;
  cfg.detector = DetectorBackend::kHeuristic;
  cfg.extractor = ExtractorBackend::kMock;
  cfg.fixtures_dir = fixtures;
  cfg.data_dir = dir / "data";
  RecordStore store(cfg.data_dir, SynonymDictionary::builtin());
  Pipeline pipeline(cfg, store);
  const BatchReport report = pipeline.batch(dir / "in");

  std::map<std::string, FieldDoc> preds;
  for (const auto& id : store.ids()) preds[id] = to_field_doc(*store.get(id));
  const auto gts = parse_field_docs(testing::read_fixture("e2e/ground_truth.json"));
  const ExtractionMetrics m = evaluate_extraction(preds, gts);

  // The interface example query over the same store.
  const auto hits = store.search(parse_query(R"(["cinema","electric"] in "description" AND "date" < 12/1970)",
                                             store.dictionary()));
  const std::vector<std::string> want_hits{"drawing-02", "drawing-09"};
  const double secs = seconds_since(t0);

  std::ostringstream d;
  d << "records=" << store.size() << " ok=" << report.counts.at("ok") << " key_accuracy=" << m.key_accuracy
    << " value_accuracy=" << m.value_accuracy << " example_query_hits=" << hits.size() << " time=" << secs << "s";
  return {store.size() == 10 && report.counts.at("ok") == 10 && m.key_accuracy == 1.0 && m.value_accuracy == 1.0 &&
              hits == want_hits && secs < kEndToEndSeconds,
          d.str()};
}

Outcome canonicalization() {
  const auto& dict = SynonymDictionary::builtin();
  auto id = [&](const char* raw) {
    auto k = canonicalize_key(raw, dict);
    return k ? k->id : std::string("<none>");
  };
  const bool numbers = id("Drawing No.") == "drawing_number" && id("Drg. No.") == "drawing_number";
  const bool descriptions = id("drawing description") == "drawing_description" &&
                            id("description") == "drawing_description" && id("dwg. desc.") == "drawing_description";
  const RawExtraction raw{"d", ExtractionSource::kMock, parse_tolerant_pairs(testing::read_fixture("cad_block.txt"))};
  const CanonicalRecord rec = merge_pairs(raw, dict);
  const bool scale = rec.fields.at("scale") == std::vector<std::string>{"1:10"};
  const bool number = rec.fields.at("drawing_number") == std::vector<std::string>{"A1/50"};
  return {numbers && descriptions && scale && number,
          std::string("number_aliases=") + (numbers ? "ok" : "bad") + " description_aliases=" +
              (descriptions ? "ok" : "bad") + " scale_values=" + std::to_string(rec.fields.at("scale").size())};
}

Outcome date_table() {
  const std::pair<const char*, const char*> table[] = {
      {"May 1973", "1973-05"}, {"Apr 1970", "1970-04"}, {"10/1973", "1973-10"},
      {"28.03.22", "2022-03-28"}, {"082014", "2014-08"},
  };
  const char* invalid[] = {"", "not a date", "13/1973", "31.02.22", "142014", "May", "19733", "1:10"};
  int bad = 0;
  for (const auto& [in, want] : table) {
    const auto d = parse_date(in);
    if (!d || d->to_string() != want) ++bad;
  }
  for (const char* in : invalid) {
    if (parse_date(in)) ++bad;
  }
  return {bad == 0, std::to_string(std::size(table) + std::size(invalid) - bad) + "/" +
                        std::to_string(std::size(table) + std::size(invalid)) + " rows"};
}

Outcome query_oracle() {
  std::mt19937 rng(1234);
  const auto t0 = Clock::now();
  RecordStore store;
  std::vector<CanonicalRecord> records;
  for (int i = 0; i < 1000; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "r%04d", i);
    records.push_back(testing::random_record(rng, id));
    store.upsert(records.back());
  }
  int mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const QueryNode q = parse_query(print_query(testing::random_query(rng)), store.dictionary());
    std::vector<std::string> want;
    for (const auto& r : records) {
      if (testing::oracle_match(q, r)) want.push_back(r.drawing_id);
    }
    if (store.search(q) != want) ++mismatches;
  }

  // The interface example over a three-record fixture.
  RecordStore fixture;
  fixture.upsert({"match", {{"drawing_description", {"Electric Cinema, Portobello Road"}}}, {{"date", {1970, 5, std::nullopt}}}, {}});
  fixture.upsert({"too-late", {{"drawing_description", {"Electric cinema"}}}, {{"date", {1970, 12, std::nullopt}}}, {}});
  fixture.upsert({"no-electric", {{"drawing_description", {"Cinema foyer"}}}, {{"date", {1969, 1, std::nullopt}}}, {}});
  const auto hits = fixture.search(
      parse_query(R"(["cinema","electric"] in "description" AND "date" < 12/1970)", fixture.dictionary()));
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "mismatches=" << mismatches << "/200 example_hits=" << hits.size() << " time=" << secs << "s";
  return {mismatches == 0 && hits == std::vector<std::string>{"match"} && secs < kQuerySeconds, d.str()};
}

Outcome heuristic_detector() {
  std::mt19937 rng(77);
  int hits = 0;
  for (int i = 0; i < 100; ++i) {
    const auto sheet = testing::make_sheet(rng, "s" + std::to_string(i));
    const auto best = select_title_block(heuristic_detect(sheet.image));
    if (best && iou(best->box, sheet.title_block) >= kDetectorIou) ++hits;
  }
  return {hits >= kDetectorHitRate * 100, std::to_string(hits) + "/100 sheets at IoU >= 0.7"};
}

Outcome coco_round_trip() {
  std::mt19937 rng(314);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const char* labels[] = {"Title Block", "title_block", "Main Content", "Legend", "NOTES", "notes"};
  int worst_docs = 0, label_errors = 0, invalid = 0;
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    coco::MarkupDocument doc;
    doc.file_name = "doc-" + std::to_string(i) + ".pdf";
    const int pages = 1 + static_cast<int>(rng() % 3);
    for (int p = 0; p < pages; ++p) {
      coco::MarkupPage page;
      page.page_index = p;
      page.width_pt = 200 + 2200 * unit(rng);
      page.height_pt = 200 + 2200 * unit(rng);
      const int shapes = static_cast<int>(rng() % 6);
      for (int s = 0; s < shapes; ++s) {
        const double w = 0.5 + (page.width_pt - 1) * unit(rng) * 0.5;
        const double h = 0.5 + (page.height_pt - 1) * unit(rng) * 0.5;
        page.shapes.push_back({{(page.width_pt - w) * unit(rng), (page.height_pt - h) * unit(rng), w, h},
                               labels[rng() % std::size(labels)], "author", "2024-01-01T00:00:00Z"});
      }
      doc.pages.push_back(page);
    }
    const coco::CocoDataset ds = coco::markup_to_coco({doc});
    if (!coco::validate(ds).empty()) ++invalid;
    const auto back = coco::coco_to_markup(ds);
    double doc_worst = 0;
    for (const auto& page : doc.pages) {
      const coco::MarkupPage* got = nullptr;
      for (const auto& bp : back.at(0).pages) {
        if (bp.page_index == page.page_index) got = &bp;
      }
      if (!got || got->shapes.size() != page.shapes.size()) {
        doc_worst = 1e9;
        continue;
      }
      for (std::size_t s = 0; s < page.shapes.size(); ++s) {
        const auto& a = page.shapes[s].rect;
        const auto& b = got->shapes[s].rect;
        doc_worst = std::max({doc_worst, std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.w - b.w),
                              std::abs(a.h - b.h)});
        if (got->shapes[s].label != page.shapes[s].label) ++label_errors;
      }
    }
    worst = std::max(worst, doc_worst);
    if (doc_worst > kRoundTripPoints) ++worst_docs;
  }
  std::ostringstream d;
  d << "max_error=" << worst << "pt docs_over_limit=" << worst_docs << " label_errors=" << label_errors
    << " invalid_outputs=" << invalid;
  return {worst_docs == 0 && label_errors == 0 && invalid == 0, d.str()};
}

// `tbx serve` child with its stdout on a pipe.
struct Child {
  pid_t pid = -1;
  int port = 0;
};

Child spawn_server(const std::filesystem::path& data, const std::filesystem::path& fixtures) {
  int fds[2];
  if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
  const pid_t pid = fork();
  if (pid == 0) {
    dup2(fds[1], STDOUT_FILENO);
    close(fds[0]);
    close(fds[1]);
    const std::string d = data.string(), f = fixtures.string();
    execl(TBX_CLI_PATH, "tbx", "--data-dir", d.c_str(), "serve", "--port", "0", "--fixtures", f.c_str(),
          "--concurrency", "1", static_cast<char*>(nullptr));
    _exit(127);
  }
  close(fds[1]);
  std::string line;
  char c;
  while (read(fds[0], &c, 1) == 1 && c != '\n') line.push_back(c);
  close(fds[0]);
  const auto colon = line.rfind(':');
  if (colon == std::string::npos) throw std::runtime_error("server did not start: " + line);
  return {pid, std::stoi(line.substr(colon + 1))};
}

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

Outcome crash_safety() {
  testing::TempDir dir("tbx-crash");
  std::filesystem::create_directories(dir / "in");
  std::filesystem::create_directories(dir / "fx");
  constexpr int kDrawings = 150;
  std::mt19937 rng(4242);
  for (int i = 0; i < kDrawings; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "sheet-%03d", i);
    save_png(testing::make_sheet(rng, id).image, dir / "in" / (std::string(id) + ".png"));
    std::ofstream(dir / "fx" / (std::string(id) + ".txt"))
        << R"({"Drawing No.": "N-)" << i << R"(", "Project": "Barbican", "Date": "May 1973"})";
  }
  const auto data = dir / "data";
  const auto journal = RecordStore::journal_path(data);

  Child first = spawn_server(data, dir / "fx");
  std::thread batch([port = first.port, in = (dir / "in").string()] {
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(120, 0);
    cli.Post("/api/batch", json{{"dir", in}}.dump(), "application/json");
  });
  const auto deadline = Clock::now() + std::chrono::seconds(60);
  while (count_lines(journal) < 10 && Clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  kill(first.pid, SIGKILL);
  waitpid(first.pid, nullptr, 0);
  batch.join();
  const std::size_t written = count_lines(journal);

  // Offline replay of a copy of the journal as the server left it.
  const auto offline_dir = dir / "offline";
  std::filesystem::create_directories(offline_dir);
  std::filesystem::copy_file(journal, RecordStore::journal_path(offline_dir));
  RecordStore offline(offline_dir, SynonymDictionary::builtin());

  Child second = spawn_server(data, dir / "fx");
  int mismatches = 0;
  std::size_t served = 0;
  {
    httplib::Client cli("127.0.0.1", second.port);
    auto all = cli.Get("/api/search?q=");
    const json ids = all ? json::parse(all->body)["ids"] : json::array();
    served = ids.size();
    if (ids.get<std::vector<std::string>>() != offline.ids()) ++mismatches;
    for (const auto& id : offline.ids()) {
      auto r = cli.Get("/api/records/" + id);
      if (!r || r->status != 200 || json::parse(r->body) != json(*offline.get(id))) ++mismatches;
    }
  }
  kill(second.pid, SIGTERM);
  waitpid(second.pid, nullptr, 0);

  const bool mid_batch = written > 0 && offline.size() < static_cast<std::size_t>(kDrawings);
  std::ostringstream d;
  d << "killed after " << offline.size() << "/" << kDrawings << " records; restarted server served " << served
    << "; mismatches=" << mismatches;
  return {mid_batch && mismatches == 0 && served == offline.size(), d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"levenshtein matches DP oracle (10k pairs), symmetric, triangle inequality, < 5 s", levenshtein_oracle},
      {"fuzzy key/value gates reproduce thresholds on all vectors", fuzzy_gates},
      {"iou equals pixel-counting oracle on 1000 boxes; self = 1, disjoint = 0", iou_oracle},
      {"evaluate_detections: hand-counted fixture and tp + fn = GT on 100 random sets", detection_counting},
      {"end-to-end: 10 drawings, key and value accuracy 1.0, < 30 s", end_to_end},
      {"canonicalization: number and description aliases unify, duplicate scale merges", canonicalization},
      {"date table exact, invalid strings rejected", date_table},
      {"query engine equals linear-scan oracle (1000 records x 200 queries) and example query, < 10 s",
       query_oracle},
      {"heuristic detector IoU >= 0.7 on >= 90% of 100 generated sheets", heuristic_detector},
      {"COCO round trip within 0.5 pt, labels exact, output validates (200 documents)", coco_round_trip},
      {"crash safety: killed service replays to the offline journal state", crash_safety},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " [" << o.detail << "]" << std::endl;
  }
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
