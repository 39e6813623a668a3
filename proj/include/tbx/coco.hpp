#pragma once

#include <array>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "tbx/detection.hpp"

namespace tbx::coco {

inline constexpr double kDefaultDpi = 300.0;

// Rectangle in page points (1/72 inch), top-left origin.
struct PointRect {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;
};

struct MarkupShape {
  PointRect rect;
  std::string label;
  std::string author;
  std::string created;  // ISO-8601 timestamp
};

struct MarkupPage {
  int page_index = 0;
  double width_pt = 0;
  double height_pt = 0;
  std::vector<MarkupShape> shapes;
};

// One annotated drawing file.
struct MarkupDocument {
  std::string file_name;
  std::vector<MarkupPage> pages;
};

struct CocoImage {
  long long id = 0;
  std::string file_name;
  long long width = 0;
  long long height = 0;
  int page_index = 0;
  nlohmann::json extra = nlohmann::json::object();
};

struct CocoAnnotation {
  long long id = 0;
  long long image_id = 0;
  long long category_id = 0;
  std::array<double, 4> bbox{};
  double area = 0;
  // Original markup label/author/created, kept for the return trip.
  nlohmann::json attributes = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();
};

struct CocoCategory {
  long long id = 0;
  std::string name;
  nlohmann::json extra = nlohmann::json::object();
};

struct CocoDataset {
  std::vector<CocoImage> images;
  std::vector<CocoAnnotation> annotations;
  std::vector<CocoCategory> categories;
};

// 1 = title_block, 2 = main_content, 3 = legend, 4 = notes.
std::vector<CocoCategory> standard_categories();

// "Title Block", "title-block" -> "title_block".
std::string normalize_label(std::string_view label);

// Throws Error(kUnknownLabel) or Error(kRectOutOfBounds) with the document,
// page and shape position in the message.
CocoDataset markup_to_coco(const std::vector<MarkupDocument>& docs,
                           double dpi = kDefaultDpi);

// Throws Error(kValidationError) if validate() reports findings.
std::vector<MarkupDocument> coco_to_markup(const CocoDataset& ds,
                                           double dpi = kDefaultDpi);

struct Finding {
  std::string kind;  // dangling_reference, duplicate_id, bbox_outside_image,
                     // area_mismatch, unknown_category
  std::string message;
};

// Empty result means the dataset is consistent.
std::vector<Finding> validate(const CocoDataset& ds);

// JSON mapping. Unknown members are kept in `extra` on read and not written.
CocoDataset dataset_from_json(const nlohmann::json& j);
nlohmann::json dataset_to_json(const CocoDataset& ds);
MarkupDocument markup_from_json(const nlohmann::json& j);
nlohmann::json markup_to_json(const MarkupDocument& doc);

CocoDataset load_dataset(const std::filesystem::path& path);
MarkupDocument load_markup(const std::filesystem::path& path);

// Annotations as ground-truth detections with confidence 1, keyed by the
// image file stem ("<stem>#<page>" for pages after the first).
// Throws Error(kValidationError) on an invalid dataset.
DetectionMap to_detections(const CocoDataset& ds);

}  // namespace tbx::coco
