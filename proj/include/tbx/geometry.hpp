#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace tbx {

// Axis-aligned box in pixels, (x, y) is the top-left corner.
class BoundingBox {
 public:
  // Throws Error(kInvalidBox) unless w > 0, h > 0, x >= 0 and y >= 0.
  BoundingBox(double x, double y, double w, double h);

  double x() const noexcept { return x_; }
  double y() const noexcept { return y_; }
  double w() const noexcept { return w_; }
  double h() const noexcept { return h_; }
  double right() const noexcept { return x_ + w_; }
  double bottom() const noexcept { return y_ + h_; }
  double area() const noexcept { return w_ * h_; }

  bool operator==(const BoundingBox&) const = default;

 private:
  double x_;
  double y_;
  double w_;
  double h_;
};

// Intersection area over union area. Symmetric, 0 for disjoint boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

double intersection_area(const BoundingBox& a, const BoundingBox& b);

enum class Category { kTitleBlock, kMainContent, kLegend, kNotes };

inline constexpr Category kAllCategories[] = {
    Category::kTitleBlock, Category::kMainContent, Category::kLegend,
    Category::kNotes};

std::string_view to_string(Category c);
std::optional<Category> parse_category(std::string_view name);

struct Detection {
  // Throws Error(kConfidenceOutOfRange) when confidence is outside [0, 1].
  Detection(BoundingBox box, Category category, double confidence);

  BoundingBox box;
  Category category;
  double confidence;

  bool operator==(const Detection&) const = default;
};

}  // namespace tbx
