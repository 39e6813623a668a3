#include <fstream>
#include <doctest.h>

#include <random>
#include <sstream>

#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"
#include "tbx/detection.hpp"
#include "tbx/errors.hpp"

using namespace tbx;

namespace {

Detection tb(double conf, double x = 0, double y = 0) {
  return Detection(BoundingBox(x, y, 10, 10), Category::kTitleBlock, conf);
}

ErrorCode code_of(const std::string& ndjson) {
  std::istringstream in(ndjson);
  try {
    parse_detections(in);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::kParseError;
}

}  // namespace

TEST_SUITE("detection") {
  TEST_CASE("select_title_block picks the most confident title block") {
    CHECK_FALSE(select_title_block({}).has_value());
    const std::vector<Detection> dets{
        tb(0.9), tb(0.7), Detection(BoundingBox(0, 0, 5, 5), Category::kLegend, 0.95)};
    const auto best = select_title_block(dets);
    REQUIRE(best);
    CHECK(best->confidence == 0.9);
    CHECK(best->category == Category::kTitleBlock);
  }

  TEST_CASE("select_title_block ties go to the smallest (x, y)") {
    const std::vector<Detection> dets{tb(0.8, 5, 5), tb(0.8, 0, 0)};
    const auto best = select_title_block(dets);
    REQUIRE(best);
    CHECK(best->box.x() == 0);
    CHECK(best->box.y() == 0);
    const std::vector<Detection> reversed{tb(0.8, 0, 0), tb(0.8, 5, 5)};
    CHECK(select_title_block(reversed)->box.x() == 0);
  }

  TEST_CASE("select_title_block ignores other categories") {
    const std::vector<Detection> dets{Detection(BoundingBox(0, 0, 5, 5), Category::kNotes, 1.0)};
    CHECK_FALSE(select_title_block(dets).has_value());
  }

  TEST_CASE("crop_region examples") {
    PageImage img = PageImage::blank("p", 100, 100);
    img.at(10, 10) = 7;
    const PageImage c = crop_region(img, BoundingBox(10, 10, 20, 20), 0);
    CHECK(c.width() == 20);
    CHECK(c.height() == 20);
    CHECK(c.at(0, 0) == 7);
    CHECK(c.drawing_id() == "p");

    const BoundingBox r = crop_bounds(img, BoundingBox(90, 90, 20, 20), 5);
    CHECK(r.x() == 85);
    CHECK(r.y() == 85);
    CHECK(r.w() == 15);
    CHECK(r.h() == 15);
    const PageImage clamped = crop_region(img, BoundingBox(90, 90, 20, 20), 5);
    CHECK(clamped.width() == 15);
    CHECK(clamped.height() == 15);

    try {
      crop_region(img, BoundingBox(200, 200, 10, 10), 0);
      FAIL("expected OutOfBounds");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kOutOfBounds);
    }
  }

  TEST_CASE("crop_region keeps colour channels") {
    PageImage img("rgb", 4, 4, 3, std::vector<std::uint8_t>(48, 200));
    img.at(1, 1, 2) = 9;
    const PageImage c = crop_region(img, BoundingBox(1, 1, 2, 2), 0);
    CHECK(c.channels() == 3);
    CHECK(c.at(0, 0, 2) == 9);
  }

  TEST_CASE("otsu separates two gray levels") {
    std::vector<std::uint8_t> gray(100, 20);
    std::fill(gray.begin() + 50, gray.end(), 230);
    const int t = otsu_threshold(gray);
    CHECK(t >= 20);
    CHECK(t < 230);
  }

  TEST_CASE("heuristic detector: blank page gives nothing") {
    CHECK(heuristic_detect(PageImage::blank("b", 800, 600)).empty());
  }

  TEST_CASE("heuristic detector finds a ruled block flush right") {
    std::mt19937 rng(42);
    const auto sheet = testing::make_sheet(rng, "s");
    const auto dets = heuristic_detect(sheet.image);
    REQUIRE_FALSE(dets.empty());
    const auto best = select_title_block(dets);
    REQUIRE(best);
    CHECK(iou(best->box, sheet.title_block) >= 0.7);
    for (const auto& d : dets) {
      CHECK(d.confidence >= 0.0);
      CHECK(d.confidence <= 1.0);
    }
  }

  TEST_CASE("heuristic detector prefers the edge block over a centered one") {
    PageImage img = PageImage::blank("two", 1200, 900);
    testing::outline_rect(img, 10, 10, 1180, 880, 3);
    // Same 4-cell block mid-page and against the bottom-right frame corner.
    auto block = [&](int x, int y) {
      testing::outline_rect(img, x, y, 300, 150, 3);
      testing::fill_rect(img, x, y + 75, 300, 2);
      testing::fill_rect(img, x + 150, y, 2, 150);
    };
    block(450, 375);
    block(1190 - 300, 890 - 150);
    const auto dets = heuristic_detect(img);
    REQUIRE(dets.size() >= 2);
    CHECK(dets[0].box.x() > 800);
    CHECK(dets[0].confidence > dets[1].confidence);
  }

  TEST_CASE("load_precomputed reads the wire format") {
    std::istringstream in(
        R"({"drawing_id":"d1","category":"title_block","bbox":[10,10,200,80],"confidence":0.97})"
        "\n\n");
    const DetectionMap m = parse_detections(in);
    REQUIRE(m.size() == 1);
    REQUIRE(m.at("d1").size() == 1);
    const Detection& d = m.at("d1")[0];
    CHECK(d.category == Category::kTitleBlock);
    CHECK(d.confidence == 0.97);
    CHECK(d.box.x() == 10);
    CHECK(d.box.w() == 200);
    CHECK(d.box.h() == 80);
  }

  TEST_CASE("load_precomputed rejects bad records") {
    CHECK(code_of(R"({"drawing_id":"d1","category":"title_block","bbox":[10,10,200,80],"confidence":1.3})") ==
          ErrorCode::kConfidenceOutOfRange);
    CHECK(code_of(R"({"drawing_id":"d1","category":"tables","bbox":[10,10,200,80],"confidence":0.5})") ==
          ErrorCode::kInvalidCategory);
    CHECK(code_of("not json") == ErrorCode::kParseError);
  }

  TEST_CASE("parse errors carry line and field") {
    std::istringstream in(
        R"({"drawing_id":"d1","category":"legend","bbox":[1,1,2,2],"confidence":0.5})"
        "\n"
        R"({"drawing_id":"d1","category":"legend","bbox":[1,1],"confidence":0.5})");
    try {
      parse_detections(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(e.field() == "bbox");
    }
  }

  TEST_CASE("wire lines round trip") {
    const Detection d(BoundingBox(1.5, 2, 30, 40.25), Category::kNotes, 0.5);
    std::istringstream in(to_wire_line("x", d) + "\n");
    const auto m = parse_detections(in);
    const Detection& back = m.at("x").at(0);
    CHECK(back.box == d.box);
    CHECK(back.category == d.category);
    CHECK(back.confidence == d.confidence);
  }

  TEST_CASE("load_precomputed from disk") {
    testing::TempDir dir;
    {
      std::ofstream out(dir / "dets.ndjson");
      out << to_wire_line("a", Detection(BoundingBox(0, 0, 5, 5), Category::kLegend, 0.4)) << "\n";
    }
    CHECK(load_precomputed(dir / "dets.ndjson").at("a").size() == 1);
    CHECK_THROWS_AS(load_precomputed(dir / "missing.ndjson"), Error);
  }
}
