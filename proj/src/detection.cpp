#include "tbx/detection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <tuple>

#include "tbx/errors.hpp"

namespace tbx {

using nlohmann::json;

std::optional<Detection> select_title_block(std::span<const Detection> dets) {
  std::optional<Detection> best;
  for (const Detection& d : dets) {
    if (d.category != Category::kTitleBlock) continue;
    if (!best || d.confidence > best->confidence ||
        (d.confidence == best->confidence &&
         std::pair(d.box.x(), d.box.y()) <
             std::pair(best->box.x(), best->box.y()))) {
      best = d;
    }
  }
  return best;
}

BoundingBox crop_bounds(const PageImage& img, const BoundingBox& box,
                        int pad) {
  if (box.x() >= img.width() || box.y() >= img.height()) {
    throw Error(ErrorCode::kOutOfBounds, "box does not intersect the image");
  }
  pad = std::max(pad, 0);
  const double x0 = std::max(0.0, std::floor(box.x() - pad));
  const double y0 = std::max(0.0, std::floor(box.y() - pad));
  const double x1 =
      std::min<double>(img.width(), std::ceil(box.right() + pad));
  const double y1 =
      std::min<double>(img.height(), std::ceil(box.bottom() + pad));
  return BoundingBox(x0, y0, x1 - x0, y1 - y0);
}

PageImage crop_region(const PageImage& img, const BoundingBox& box, int pad) {
  const BoundingBox r = crop_bounds(img, box, pad);
  const int x0 = static_cast<int>(r.x());
  const int y0 = static_cast<int>(r.y());
  const int w = static_cast<int>(r.w());
  const int h = static_cast<int>(r.h());
  const int ch = img.channels();
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * ch);
  const auto src = img.pixels();
  for (int y = 0; y < h; ++y) {
    const std::size_t from =
        (static_cast<std::size_t>(y0 + y) * img.width() + x0) * ch;
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(from),
                static_cast<std::size_t>(w) * ch,
                px.begin() + static_cast<std::ptrdiff_t>(
                                 static_cast<std::size_t>(y) * w * ch));
  }
  return PageImage(img.drawing_id(), w, h, ch, std::move(px), img.dpi());
}

int otsu_threshold(std::span<const std::uint8_t> gray) {
  std::array<double, 256> hist{};
  for (std::uint8_t v : gray) hist[v] += 1.0;
  const double total = static_cast<double>(gray.size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];

  double w0 = 0.0;
  double sum0 = 0.0;
  double best_var = -1.0;
  int best_t = 127;
  for (int t = 0; t < 255; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double var = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (var > best_var) {
      best_var = var;
      best_t = t;
    }
  }
  return best_t;
}

namespace {

// A merged stack of dark runs: `lo..hi` across the line (thickness) and
// `start..end` (exclusive) along it.
struct LineSegment {
  int lo;
  int hi;
  int start;
  int end;
  int last;

  int length() const { return end - start; }
};

// Scans `rows` lines of `cols` pixels for dark runs of at least `min_run` and
// merges runs in adjacent lines that overlap along the run direction.
template <typename DarkFn>
std::vector<LineSegment> find_lines(int rows, int cols, int min_run,
                                    DarkFn dark) {
  std::vector<LineSegment> done;
  std::vector<LineSegment> active;
  for (int r = 0; r < rows; ++r) {
    std::vector<LineSegment> next;
    int c = 0;
    while (c < cols) {
      if (!dark(r, c)) {
        ++c;
        continue;
      }
      const int s = c;
      while (c < cols && dark(r, c)) ++c;
      if (c - s < min_run) continue;
      bool merged = false;
      for (auto it = active.begin(); it != active.end(); ++it) {
        const int ov = std::min(it->end, c) - std::max(it->start, s);
        if (ov * 2 >= std::min(it->length(), c - s)) {
          LineSegment seg = *it;
          seg.hi = r;
          seg.last = r;
          seg.start = std::min(seg.start, s);
          seg.end = std::max(seg.end, c);
          next.push_back(seg);
          active.erase(it);
          merged = true;
          break;
        }
      }
      if (!merged) next.push_back({r, r, s, c, r});
    }
    for (const auto& seg : active) done.push_back(seg);
    active = std::move(next);
  }
  for (const auto& seg : active) done.push_back(seg);
  return done;
}

struct Candidate {
  BoundingBox box;
  double score;
};

}  // namespace

std::vector<Detection> heuristic_detect(const PageImage& img,
                                        const HeuristicParams& params) {
  const int W = img.width();
  const int H = img.height();
  const std::vector<std::uint8_t> gray = img.to_gray();
  const auto [mn, mx] = std::minmax_element(gray.begin(), gray.end());
  if (*mx - *mn < params.min_contrast) return {};

  const int t = otsu_threshold(gray);
  std::vector<std::uint8_t> dark(gray.size());
  for (std::size_t i = 0; i < gray.size(); ++i) dark[i] = gray[i] <= t;
  auto at = [&](int x, int y) {
    return dark[static_cast<std::size_t>(y) * W + x] != 0;
  };

  const int min_h = std::max(
      2, static_cast<int>(std::ceil(params.min_run_fraction * W)));
  const int min_v = std::max(
      2, static_cast<int>(std::ceil(params.min_run_fraction * H)));
  auto hlines =
      find_lines(H, W, min_h, [&](int r, int c) { return at(c, r); });
  auto vlines =
      find_lines(W, H, min_v, [&](int r, int c) { return at(r, c); });

  auto by_length = [](const LineSegment& a, const LineSegment& b) {
    return a.length() > b.length();
  };
  for (auto* lines : {&hlines, &vlines}) {
    std::stable_sort(lines->begin(), lines->end(), by_length);
    if (lines->size() > params.max_lines) lines->resize(params.max_lines);
    std::stable_sort(lines->begin(), lines->end(),
                     [](const LineSegment& a, const LineSegment& b) {
                       return a.lo < b.lo;
                     });
  }
  if (hlines.size() < 2 || vlines.size() < 2) return {};

  // cross[i][j]: horizontal i and vertical j meet (within a small tolerance).
  std::vector<std::vector<char>> cross(hlines.size(),
                                       std::vector<char>(vlines.size(), 0));
  for (std::size_t i = 0; i < hlines.size(); ++i) {
    for (std::size_t j = 0; j < vlines.size(); ++j) {
      const auto& h = hlines[i];
      const auto& v = vlines[j];
      const int tol = 3 + std::max(h.hi - h.lo, v.hi - v.lo);
      const bool h_reaches = v.lo >= h.start - tol && v.hi < h.end + tol;
      const bool v_reaches = h.lo >= v.start - tol && h.hi < v.end + tol;
      cross[i][j] = h_reaches && v_reaches;
    }
  }

  // Fraction of the side from `a` to `b` (exclusive) along which the line band
  // [lo - 1, hi + 1] holds a dark pixel.
  auto covered_h = [&](const LineSegment& h, int a, int b) {
    int hits = 0;
    for (int x = a; x < b; ++x) {
      for (int y = std::max(0, h.lo - 1); y <= std::min(H - 1, h.hi + 1); ++y) {
        if (at(x, y)) {
          ++hits;
          break;
        }
      }
    }
    return hits;
  };
  auto covered_v = [&](const LineSegment& v, int a, int b) {
    int hits = 0;
    for (int y = a; y < b; ++y) {
      for (int x = std::max(0, v.lo - 1); x <= std::min(W - 1, v.hi + 1); ++x) {
        if (at(x, y)) {
          ++hits;
          break;
        }
      }
    }
    return hits;
  };

  const double page_area = static_cast<double>(W) * H;
  const double min_area = params.min_area_fraction * page_area;
  const double max_area = params.max_area_fraction * page_area;
  const double band_x = (1.0 - params.edge_band_fraction) * W;
  const double band_y = (1.0 - params.edge_band_fraction) * H;

  std::vector<Candidate> cands;
  for (std::size_t top = 0; top < hlines.size(); ++top) {
    for (std::size_t bot = top + 1; bot < hlines.size(); ++bot) {
      const int y0 = hlines[top].lo;
      const int y1 = hlines[bot].hi + 1;
      if (hlines[bot].lo <= hlines[top].hi) continue;
      for (std::size_t left = 0; left < vlines.size(); ++left) {
        if (!cross[top][left] || !cross[bot][left]) continue;
        for (std::size_t right = left + 1; right < vlines.size(); ++right) {
          if (!cross[top][right] || !cross[bot][right]) continue;
          if (vlines[right].lo <= vlines[left].hi) continue;
          const int x0 = vlines[left].lo;
          const int x1 = vlines[right].hi + 1;
          const double area = static_cast<double>(x1 - x0) * (y1 - y0);
          if (area < min_area || area > max_area) continue;

          const int perim = 2 * (x1 - x0) + 2 * (y1 - y0);
          const int hits = covered_h(hlines[top], x0, x1) +
                           covered_h(hlines[bot], x0, x1) +
                           covered_v(vlines[left], y0, y1) +
                           covered_v(vlines[right], y0, y1);
          const double coverage = static_cast<double>(hits) / perim;
          const int bands = ((x0 + x1) / 2.0 >= band_x) + ((y0 + y1) / 2.0 >= band_y);
          const double prior = bands == 2   ? params.corner_prior
                               : bands == 1 ? params.single_band_prior
                                            : params.off_band_prior;
          const double score = params.coverage_weight * coverage +
                               (1.0 - params.coverage_weight) * prior;
          cands.push_back({BoundingBox(x0, y0, x1 - x0, y1 - y0),
                           std::clamp(score, 0.0, 1.0)});
        }
      }
    }
  }

  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.box.area() != b.box.area())
                       return a.box.area() > b.box.area();
                     return std::pair(a.box.x(), a.box.y()) <
                            std::pair(b.box.x(), b.box.y());
                   });

  std::vector<Detection> out;
  for (const Candidate& c : cands) {
    const bool nested = std::any_of(out.begin(), out.end(), [&](const Detection& k) {
      return intersection_area(c.box, k.box) >= 0.9 * c.box.area();
    });
    if (!nested) out.emplace_back(c.box, Category::kTitleBlock, c.score);
  }
  return out;
}

DetectionMap parse_detections(std::istream& in) {
  DetectionMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, "record", e.what());
    }
    if (!rec.is_object()) throw ParseError(lineno, "record", "not an object");

    auto field = [&](const char* name) -> const json& {
      auto it = rec.find(name);
      if (it == rec.end()) throw ParseError(lineno, name, "missing");
      return *it;
    };
    const json& id = field("drawing_id");
    if (!id.is_string()) throw ParseError(lineno, "drawing_id", "not a string");
    const json& cat = field("category");
    if (!cat.is_string()) throw ParseError(lineno, "category", "not a string");
    const auto category = parse_category(cat.get<std::string>());
    if (!category) {
      throw Error(ErrorCode::kInvalidCategory,
                  "line " + std::to_string(lineno) + ", category: '" +
                      cat.get<std::string>() + "' is not a known category");
    }
    const json& bbox = field("bbox");
    if (!bbox.is_array() || bbox.size() != 4 ||
        !std::all_of(bbox.begin(), bbox.end(),
                     [](const json& v) { return v.is_number(); })) {
      throw ParseError(lineno, "bbox", "expected [x, y, w, h] numbers");
    }
    const json& conf = field("confidence");
    if (!conf.is_number()) throw ParseError(lineno, "confidence", "not a number");
    const double c = conf.get<double>();
    if (!(c >= 0.0 && c <= 1.0)) {
      throw Error(ErrorCode::kConfidenceOutOfRange,
                  "line " + std::to_string(lineno) + ", confidence: " +
                      std::to_string(c) + " outside [0, 1]");
    }
    try {
      BoundingBox box(bbox[0].get<double>(), bbox[1].get<double>(),
                      bbox[2].get<double>(), bbox[3].get<double>());
      out[id.get<std::string>()].emplace_back(box, *category, c);
    } catch (const Error& e) {
      throw ParseError(lineno, "bbox", e.what());
    }
  }
  return out;
}

DetectionMap load_precomputed(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "file", "cannot open " + path.string());
  return parse_detections(in);
}

std::string to_wire_line(const std::string& drawing_id, const Detection& det) {
  json j = {{"drawing_id", drawing_id},
            {"category", std::string(to_string(det.category))},
            {"bbox", {det.box.x(), det.box.y(), det.box.w(), det.box.h()}},
            {"confidence", det.confidence}};
  return j.dump();
}

}  // namespace tbx
