#include "tbx/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "tbx/errors.hpp"

namespace tbx {

BoundingBox::BoundingBox(double x, double y, double w, double h)
    : x_(x), y_(y), w_(w), h_(h) {
  if (!(std::isfinite(x) && std::isfinite(y) && std::isfinite(w) &&
        std::isfinite(h))) {
    throw Error(ErrorCode::kInvalidBox, "box coordinates must be finite");
  }
  if (!(w > 0.0 && h > 0.0)) {
    throw Error(ErrorCode::kInvalidBox, "box width and height must be > 0");
  }
  if (x < 0.0 || y < 0.0) {
    throw Error(ErrorCode::kInvalidBox, "box origin must be non-negative");
  }
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x(), b.x());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y(), b.y());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kTitleBlock:
      return "title_block";
    case Category::kMainContent:
      return "main_content";
    case Category::kLegend:
      return "legend";
    case Category::kNotes:
      return "notes";
  }
  return "unknown";
}

std::optional<Category> parse_category(std::string_view name) {
  for (Category c : kAllCategories) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

Detection::Detection(BoundingBox b, Category cat, double conf)
    : box(b), category(cat), confidence(conf) {
  if (!(conf >= 0.0 && conf <= 1.0)) {
    throw Error(ErrorCode::kConfidenceOutOfRange,
                "confidence " + std::to_string(conf) + " outside [0, 1]");
  }
}

}  // namespace tbx
