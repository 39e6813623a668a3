#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tbx/canonical.hpp"
#include "tbx/detection.hpp"
#include "tbx/extraction.hpp"
#include "tbx/image.hpp"
#include "tbx/store.hpp"

namespace tbx {

enum class DetectorBackend { kPrecomputed, kHeuristic };
enum class ExtractorBackend { kLlm, kMock };

std::string_view to_string(DetectorBackend b);
std::string_view to_string(ExtractorBackend b);
// Throws Error(kConfigError) on unknown names.
DetectorBackend parse_detector_backend(std::string_view name);
ExtractorBackend parse_extractor_backend(std::string_view name);

struct PipelineConfig {
  DetectorBackend detector = DetectorBackend::kHeuristic;
  ExtractorBackend extractor = ExtractorBackend::kMock;
  std::filesystem::path dictionary_path;  // empty = built-in dictionary
  int crop_padding = kDefaultCropPadding;
  int concurrency = 4;
  std::filesystem::path data_dir;         // empty = in-memory store
  std::filesystem::path detections_path;  // precomputed backend
  std::filesystem::path fixtures_dir;     // mock backend
  ExtractorConfig llm;
  HeuristicParams heuristic;

  // Throws Error(kConfigError) when a referenced path is missing or the
  // concurrency limit is below 1.
  void validate() const;
};

enum class PipelineStatus { kOk, kNoTitleBlock, kExtractionFailed };

std::string_view to_string(PipelineStatus s);

struct StageTimings {
  double detect_ms = 0;
  double crop_ms = 0;
  double extract_ms = 0;
  double canonicalize_ms = 0;
  double store_ms = 0;
  double total_ms = 0;
};

struct PipelineResult {
  std::string drawing_id;
  std::optional<Detection> detection;
  std::optional<RawExtraction> raw;
  std::optional<CanonicalRecord> record;
  StageTimings timings;
  PipelineStatus status = PipelineStatus::kNoTitleBlock;
  std::string error;  // set when status is extraction_failed
};

struct BatchFailure {
  std::filesystem::path path;
  std::string error;
};

struct BatchReport {
  std::vector<PipelineResult> results;  // in file-name order
  std::vector<BatchFailure> failures;
  std::map<std::string, std::size_t> counts;  // status name -> results
};

// Detect, select the title block, crop, extract, canonicalize and store.
// Stage failures become statuses; only Error(kPersistenceError) escapes.
class Pipeline {
 public:
  // Loads precomputed detections when that backend is selected.
  Pipeline(PipelineConfig cfg, RecordStore& store);

  const PipelineConfig& config() const noexcept { return cfg_; }
  RecordStore& store() noexcept { return store_; }

  // Reruns replace the drawing's record. `source` is recorded with it.
  PipelineResult run(const PageImage& img,
                     const std::optional<std::string>& source = std::nullopt);

  // Every supported image directly inside `dir`, at most `concurrency` at a
  // time. Unreadable files are listed as failures.
  BatchReport batch(const std::filesystem::path& dir);

  std::vector<Detection> detect(const PageImage& img) const;
  RawExtraction extract(const PageImage& crop) const;

 private:
  PipelineConfig cfg_;
  RecordStore& store_;
  DetectionMap precomputed_;
};

// Loads the configured dictionary, or the built-in one.
SynonymDictionary load_dictionary(const PipelineConfig& cfg);

void to_json(nlohmann::json& j, const Detection& d);
void to_json(nlohmann::json& j, const PipelineResult& r);
void to_json(nlohmann::json& j, const BatchReport& r);

}  // namespace tbx
