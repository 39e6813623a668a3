#include <doctest.h>

#include <nlohmann/json.hpp>

#include "support/fixtures.hpp"
#include "tbx/canonical.hpp"
#include "tbx/errors.hpp"
#include "tbx/evaluation.hpp"
#include "tbx/extraction.hpp"
#include "tbx/serialization.hpp"

using namespace tbx;

namespace {

const SynonymDictionary& dict() { return SynonymDictionary::builtin(); }

std::string key_of(std::string_view raw) {
  auto k = canonicalize_key(raw, dict());
  return k ? k->id : std::string("<none>");
}

std::string date_of(std::string_view raw) {
  auto d = parse_date(raw);
  return d ? d->to_string() : std::string("<none>");
}

RawExtraction fixture(const std::string& name) {
  return RawExtraction{name, ExtractionSource::kMock, parse_tolerant_pairs(testing::read_fixture(name))};
}

}  // namespace

TEST_SUITE("canonical") {
  TEST_CASE("key normalization") {
    CHECK(normalize_key_text("Dwg. Desc.", dict()) == "drawing description");
    CHECK(normalize_key_text("description", dict()) == "description");
    CHECK(normalize_key_text("Drg. No.", dict()) == "drawing number");
    CHECK(normalize_key_text("  CHKD_by ", dict()) == "checked by");
  }

  TEST_CASE("canonical keys") {
    CHECK(key_of("Drawing No.") == "drawing_number");
    CHECK(key_of("Drg. No.") == "drawing_number");
    CHECK(key_of("Scale") == "scale");
    CHECK(key_of("Drawing Descriptiom") == "drawing_description");
    CHECK(key_of("drawing description") == "drawing_description");
    CHECK(key_of("description") == "drawing_description");
    CHECK(key_of("dwg. desc.") == "drawing_description");
    CHECK(key_of("Drawn By") == "drawn_by");
    CHECK(key_of("Drawn") == "drawn_by");
    CHECK(key_of("Checked") == "checked_by");
    CHECK(key_of("Rev") == "revision");
    CHECK(key_of("Status") == "status");
    CHECK(key_of("Date") == "date");
  }

  TEST_CASE("short keys are never fuzzy-matched") {
    CHECK(key_of("Scle") == "<none>");
    CHECK(key_of("Dat") == "<none>");
    CHECK(key_of("Colour") == "<none>");
  }

  TEST_CASE("dates") {
    CHECK(date_of("May 1973") == "1973-05");
    CHECK(date_of("Apr 1970") == "1970-04");
    CHECK(date_of("10/1973") == "1973-10");
    CHECK(date_of("28.03.22") == "2022-03-28");
    CHECK(date_of("28.03.2022") == "2022-03-28");
    CHECK(date_of("01.02.75") == "1975-02-01");
    CHECK(date_of("082014") == "2014-08");
    CHECK(date_of("1973") == "1973");
    CHECK(date_of("september 2001") == "2001-09");
  }

  TEST_CASE("invalid dates are rejected") {
    for (const char* bad : {"", "yesterday", "13/1973", "00/1973", "32.01.22", "30.02.22", "132014",
                            "0999", "May", "1:10", "A1/50", "2022-03-28x"}) {
      CAPTURE(bad);
      CHECK_FALSE(parse_date(bad).has_value());
    }
  }

  TEST_CASE("date ordering is lexicographic over parts") {
    CHECK(DateValue{1970, 5, std::nullopt} < DateValue{1970, 12, std::nullopt});
    CHECK(DateValue{1969, std::nullopt, std::nullopt} < DateValue{1970, 1, std::nullopt});
    CHECK(parse_iso_date("2022-03-28") == DateValue{2022, 3, 28});
    CHECK(parse_iso_date("1973") == DateValue{1973, std::nullopt, std::nullopt});
  }

  TEST_CASE("CAD block merges into one value per key") {
    const CanonicalRecord rec = merge_pairs(fixture("cad_block.txt"), dict());
    CHECK(rec.fields.at("scale") == std::vector<std::string>{"1:10"});
    CHECK(rec.fields.at("drawing_number") == std::vector<std::string>{"A1/50"});
    CHECK(rec.fields.at("drawing_title") == std::vector<std::string>{"SECTION LEVEL 00"});
    CHECK(rec.fields.at("drawn_by") == std::vector<std::string>{"CJ"});
    CHECK(rec.fields.at("checked_by") == std::vector<std::string>{"CD"});
    CHECK(rec.fields.at("revision") == std::vector<std::string>{"P01"});
    CHECK(rec.fields.at("status") == std::vector<std::string>{"ISSUED FOR CONSTRUCTION"});
    CHECK(rec.dates.at("date") == DateValue{2022, 3, 28});
    CHECK(rec.unmatched.empty());
  }

  TEST_CASE("legacy block keeps unknown cells as unmatched") {
    const CanonicalRecord rec = merge_pairs(fixture("legacy_block.txt"), dict());
    CHECK(rec.fields.at("drawing_number") == std::vector<std::string>{"A150"});
    CHECK(rec.fields.at("scale") == std::vector<std::string>{"110"});
    CHECK(rec.dates.at("date") == DateValue{2014, 8, std::nullopt});
    CHECK(rec.fields.at("notes").size() == 2);
    CHECK(rec.unmatched.size() == 2);
  }

  TEST_CASE("empty extraction gives an empty record") {
    const CanonicalRecord rec = merge_pairs(RawExtraction{"e", ExtractionSource::kMock, {}}, dict());
    CHECK(rec.drawing_id == "e");
    CHECK(rec.fields.empty());
    CHECK(rec.unmatched.empty());
    CHECK(rec.dates.empty());
  }

  TEST_CASE("merging is idempotent over repeated pairs") {
    RawExtraction raw = fixture("cad_block.txt");
    const CanonicalRecord once = merge_pairs(raw, dict());
    const auto copy = raw.pairs;
    raw.pairs.insert(raw.pairs.end(), copy.begin(), copy.end());
    CHECK(merge_pairs(raw, dict()) == once);
  }

  TEST_CASE("dictionary aliases are disjoint and self-describing") {
    std::map<std::string, std::string> owner;
    for (const auto& e : dict().entries()) {
      CHECK(dict().find(e.key.id) == &e);
      CHECK(key_of(e.key.id) == e.key.id);
      CHECK(key_of(e.key.display) == e.key.id);
      for (const auto& a : e.aliases) {
        CHECK(owner.emplace(a, e.key.id).second);
        CHECK(key_of(a) == e.key.id);
      }
    }
  }

  TEST_CASE("dictionary documents round trip and are validated") {
    const SynonymDictionary again = SynonymDictionary::from_json(dict().to_json());
    CHECK(again.entries().size() == dict().entries().size());
    CHECK(again.abbreviations() == dict().abbreviations());
    CHECK_THROWS_AS(SynonymDictionary::from_json("[]"), Error);
    CHECK_THROWS_AS(SynonymDictionary::from_json(
                        R"({"keys": {"a": {"display": "A", "aliases": ["x"]}, "b": {"display": "B", "aliases": ["x"]}}})"),
                    Error);
  }

  TEST_CASE("records round trip through JSON") {
    const CanonicalRecord rec = merge_pairs(fixture("legacy_block.txt"), dict());
    const nlohmann::json j = rec;
    CHECK(j.get<CanonicalRecord>() == rec);
  }
}

TEST_SUITE("evaluation") {
  TEST_CASE("levenshtein examples") {
    CHECK(levenshtein("abc", "abc") == 0);
    CHECK(levenshtein("", "abc") == 3);
    CHECK(levenshtein("kitten", "sitting") == 3);
    CHECK(levenshtein("\xC3\xA9t\xC3\xA9", "ete") == 2);
  }

  TEST_CASE("key gate") {
    CHECK(fuzzy_key_match("Drawing Descriptiom", "Drawing Description"));
    CHECK_FALSE(fuzzy_key_match("Scle", "Scale"));
    CHECK(fuzzy_key_match("scale", "Scale"));
    CHECK(fuzzy_key_match("Drawn  by", "drawn by"));
    CHECK(fuzzy_key_match("Drwn by", "Drawn by"));          // whitespace opens the gate
    CHECK(fuzzy_key_match("revisionnum", "revisionnumb"));  // 12 chars
    CHECK_FALSE(fuzzy_key_match("revision", "revisionnumb"));  // distance 4
    CHECK_FALSE(fuzzy_key_match("checkedby", "checkedbyx"));  // 10 chars: exact only
  }

  TEST_CASE("value gate") {
    CHECK(fuzzy_value_match("ISSUED FOR CONSTRUCTON", "ISSUED FOR CONSTRUCTION"));
    CHECK(fuzzy_value_match("1:10", "1:10"));
    CHECK_FALSE(fuzzy_value_match("1:10", "1:20"));
    CHECK_FALSE(fuzzy_value_match("SECTION LEVEL 01", "SECTION LEVEL 00"));  // 16 chars
    CHECK_FALSE(fuzzy_value_match("ISSUED FOR CONS", "ISSUED FOR CONSTRUCTION"));
  }

  TEST_CASE("hand-counted detection fixture") {
    const BoundingBox g1(0, 0, 100, 100);
    const BoundingBox g2(0, 0, 100, 100);
    DetectionMap gts{{"d1", {Detection(g1, Category::kTitleBlock, 1.0)}},
                     {"d2", {Detection(g2, Category::kTitleBlock, 1.0)}}};
    // IoU 0.8: 100x80 inside the GT. IoU 0.75: 100x75 inside the GT.
    const BoundingBox p1(0, 0, 100, 80), p2(0, 25, 100, 75);
    // IoU 0.9: 100x90. IoU 0: far away.
    const BoundingBox p3(0, 0, 100, 90), p4(500, 500, 50, 50);
    REQUIRE(iou(p1, g1) == doctest::Approx(0.8));
    REQUIRE(iou(p2, g1) == doctest::Approx(0.75));
    REQUIRE(iou(p3, g2) == doctest::Approx(0.9));
    DetectionMap preds{{"d1", {Detection(p1, Category::kTitleBlock, 0.9), Detection(p2, Category::kTitleBlock, 0.7)}},
                       {"d2", {Detection(p3, Category::kTitleBlock, 0.8), Detection(p4, Category::kTitleBlock, 0.6)}}};
    const DetectionMetrics m = evaluate_detections(preds, gts);
    const CategoryMetrics& t = m[Category::kTitleBlock];
    CHECK(t.tp == 2);
    CHECK(t.fp == 1);
    CHECK(t.fn == 0);
    CHECK(t.ignored == 1);
    CHECK(t.precision == doctest::Approx(2.0 / 3.0));
    CHECK(t.recall == 1.0);
    CHECK(t.accuracy == 1.0);
    CHECK(m.drawings == 2);
  }

  TEST_CASE("perfect detections score 1 everywhere") {
    DetectionMap gts;
    for (int i = 0; i < 4; ++i) {
      auto& v = gts["d" + std::to_string(i)];
      for (Category c : kAllCategories) {
        v.emplace_back(BoundingBox(10 * static_cast<int>(c), 5, 8, 8), c, 1.0);
      }
    }
    const DetectionMetrics m = evaluate_detections(gts, gts);
    for (Category c : kAllCategories) {
      CHECK(m[c].precision == 1.0);
      CHECK(m[c].recall == 1.0);
      CHECK(m[c].f1 == 1.0);
    }
  }

  TEST_CASE("IoU threshold is strict") {
    DetectionMap gts{{"d", {Detection(BoundingBox(0, 0, 100, 100), Category::kLegend, 1.0)}}};
    DetectionMap preds{{"d", {Detection(BoundingBox(0, 0, 100, 70), Category::kLegend, 0.9)}}};
    const DetectionMetrics m = evaluate_detections(preds, gts);
    CHECK(m[Category::kLegend].tp == 0);
    CHECK(m[Category::kLegend].fp == 1);
    CHECK(m[Category::kLegend].fn == 1);
  }

  TEST_CASE("predictions without ground truth are an error") {
    DetectionMap preds{{"x", {Detection(BoundingBox(0, 0, 1, 1), Category::kNotes, 0.5)}}};
    try {
      evaluate_detections(preds, {});
      FAIL("expected MissingGroundTruth");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kMissingGroundTruth);
    }
  }

  TEST_CASE("extraction metrics by counting") {
    std::map<std::string, FieldDoc> gt{{"d", {{"Date", {"Apr 1970"}}, {"Scale", {"1:10"}}}}};
    std::map<std::string, FieldDoc> pred{{"d", {{"Date", {"Apr 1970"}}}}};
    const ExtractionMetrics m = evaluate_extraction(pred, gt);
    CHECK(m.gt_keys == 2);
    CHECK(m.matched_keys == 1);
    CHECK(m.key_accuracy == 0.5);
    CHECK(m.value_accuracy == 1.0);
    CHECK(evaluate_extraction(gt, gt).key_accuracy == 1.0);
    CHECK(evaluate_extraction(gt, gt).value_accuracy == 1.0);
  }

  TEST_CASE("fuzzy keys and values count as matches") {
    std::map<std::string, FieldDoc> gt{{"d", {{"Drawing Description", {"ISSUED FOR CONSTRUCTION"}}}}};
    std::map<std::string, FieldDoc> pred{{"d", {{"Drawing Descriptiom", {"ISSUED FOR CONSTRUCTON"}}}}};
    const ExtractionMetrics m = evaluate_extraction(pred, gt);
    CHECK(m.key_accuracy == 1.0);
    CHECK(m.value_accuracy == 1.0);
  }

  TEST_CASE("field documents from records and objects") {
    const auto docs = parse_field_docs(R"({"d1": {"Scale": "1:10", "Notes": ["a", "b"]}})");
    REQUIRE(docs.count("d1") == 1);
    CHECK(docs.at("d1").size() == 2);
    const auto recs = parse_field_docs(
        R"([{"drawing_id": "d2", "fields": {"scale": ["1:10"]}, "dates": {}, "unmatched": [["Foo", "bar"]]}])");
    CHECK(recs.at("d2").size() == 2);
    CHECK_THROWS_AS(parse_field_docs("42"), Error);
  }

  TEST_CASE("reports render") {
    const ExtractionMetrics m{4, 3, 2, 0.75, 2.0 / 3.0};
    const auto j = nlohmann::json::parse(extraction_report_json(m));
    CHECK(j["key_accuracy"] == 0.75);
    CHECK_FALSE(extraction_report_table(m).empty());
    const auto dj = nlohmann::json::parse(detection_report_json(DetectionMetrics{}));
    REQUIRE(dj["categories"].size() == 4);
    CHECK(dj["categories"][0]["category"] == "title_block");
    CHECK_FALSE(detection_report_table(DetectionMetrics{}).empty());
  }
}
