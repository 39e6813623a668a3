#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tbx/canonical.hpp"
#include "tbx/detection.hpp"
#include "tbx/extraction.hpp"

namespace tbx {

// Unit-cost edit distance over Unicode scalar values of UTF-8 input.
std::size_t levenshtein(std::string_view a, std::string_view b);

struct FuzzyGates {
  std::size_t key_max_distance = 2;
  std::size_t key_min_length = 10;  // gate opens above this length
  std::size_t value_max_distance = 4;
  std::size_t value_min_length = 20;
};

// Both sides are lowercased and whitespace-collapsed. The ground-truth side
// decides which gate applies: keys longer than 10 characters or containing a
// space tolerate 2 edits; values longer than 20 characters tolerate 4.
// Everything else must match exactly.
bool fuzzy_key_match(std::string_view pred, std::string_view gt,
                     const FuzzyGates& gates = {});
bool fuzzy_value_match(std::string_view pred, std::string_view gt,
                       const FuzzyGates& gates = {});

struct CategoryMetrics {
  std::size_t gt = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t ignored = 0;  // redundant title-block predictions
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct DetectionMetrics {
  std::array<CategoryMetrics, 4> per_category{};
  std::size_t drawings = 0;

  const CategoryMetrics& operator[](Category c) const {
    return per_category[static_cast<std::size_t>(c)];
  }
  CategoryMetrics& operator[](Category c) {
    return per_category[static_cast<std::size_t>(c)];
  }
};

struct DetectionEvalParams {
  double iou_threshold = 0.7;
  // A title-block prediction overlapping an already matched ground truth at
  // least this much is ignored instead of counted as a false positive.
  double suppression_iou = 0.5;
};

// Greedy confidence-ordered matching per drawing and category.
//
// A prediction is a true positive when it has the same category as an
// unmatched ground-truth box and IoU strictly above the threshold. Title-block
// accuracy is the fraction of drawings whose top-confidence title-block
// prediction hits a ground-truth title block (drawings without one count as
// correct when nothing was predicted); for other categories accuracy is the
// fraction of ground-truth boxes matched.
//
// Throws Error(kMissingGroundTruth) if a predicted drawing has no ground truth.
DetectionMetrics evaluate_detections(const DetectionMap& preds,
                                     const DetectionMap& gts,
                                     const DetectionEvalParams& params = {});

// Key -> values in document order, the common shape of records and raw
// extractions for scoring.
using FieldDoc = std::vector<std::pair<std::string, std::vector<std::string>>>;

FieldDoc to_field_doc(const CanonicalRecord& rec);
FieldDoc to_field_doc(const RawExtraction& raw);

struct ExtractionMetrics {
  std::size_t gt_keys = 0;
  std::size_t matched_keys = 0;
  std::size_t matched_values = 0;
  double key_accuracy = 0.0;
  double value_accuracy = 0.0;
};

// Each ground-truth key takes the nearest unused predicted key that passes
// the key gate (ties broken lexicographically). A matched key counts as a
// value hit when any predicted value passes the value gate against any
// ground-truth value.
// Throws Error(kMissingGroundTruth) if a predicted drawing has no ground truth.
ExtractionMetrics evaluate_extraction(const std::map<std::string, FieldDoc>& preds,
                                      const std::map<std::string, FieldDoc>& gts,
                                      const FuzzyGates& gates = {});

std::string detection_report_json(const DetectionMetrics& m);
std::string detection_report_table(const DetectionMetrics& m);
std::string extraction_report_json(const ExtractionMetrics& m);
std::string extraction_report_table(const ExtractionMetrics& m);

}  // namespace tbx
