#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tbx/geometry.hpp"
#include "tbx/image.hpp"

namespace tbx {

inline constexpr int kDefaultCropPadding = 8;

// Highest-confidence title_block detection; ties go to the smallest (x, y).
std::optional<Detection> select_title_block(std::span<const Detection> dets);

// Sub-image of `box` grown by `pad` on every side and clamped to the image.
// Throws Error(kOutOfBounds) if `box` does not intersect the image.
PageImage crop_region(const PageImage& img, const BoundingBox& box,
                      int pad = kDefaultCropPadding);

// Clamped region crop_region would cut, in pixel coordinates.
BoundingBox crop_bounds(const PageImage& img, const BoundingBox& box, int pad);

/// Tunables for the line-intersection detector. Fractions are relative to
/// page width, height or area.
struct HeuristicParams {
  double min_run_fraction = 0.05;
  double min_area_fraction = 0.01;
  double max_area_fraction = 0.20;
  double edge_band_fraction = 0.25;
  double coverage_weight = 0.5;
  // Location prior: inside both the right and bottom bands, one of them, or neither.
  double corner_prior = 1.0;
  double single_band_prior = 0.75;
  double off_band_prior = 0.25;
  // Below this gray-level spread the page is treated as blank.
  int min_contrast = 32;
  // Caps the number of line segments kept per orientation (longest first).
  std::size_t max_lines = 80;
};

/// Title-block candidates found from ruled lines, best first.
///
/// The page is binarized with Otsu's threshold, long horizontal and vertical
/// dark runs are merged into line segments, and every rectangle whose four
/// corners are line intersections is scored as
/// `w * perimeter_coverage + (1 - w) * location_prior`. Rectangles outside
/// the configured area range are discarded, as are rectangles nested inside
/// a better-ranked one.
std::vector<Detection> heuristic_detect(const PageImage& img,
                                        const HeuristicParams& params = {});

// Otsu threshold over a gray histogram; pixels <= threshold are dark.
int otsu_threshold(std::span<const std::uint8_t> gray);

using DetectionMap = std::map<std::string, std::vector<Detection>>;

// Reads the newline-delimited detection wire format.
// Throws ParseError, or Error(kInvalidCategory / kConfidenceOutOfRange).
DetectionMap load_precomputed(const std::filesystem::path& path);
DetectionMap parse_detections(std::istream& in);

// One wire-format line (no trailing newline).
std::string to_wire_line(const std::string& drawing_id, const Detection& det);

}  // namespace tbx
