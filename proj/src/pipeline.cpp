#include "tbx/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

#include "tbx/errors.hpp"
#include "tbx/serialization.hpp"

namespace tbx {

using nlohmann::json;

std::string_view to_string(DetectorBackend b) {
  return b == DetectorBackend::kPrecomputed ? "precomputed" : "heuristic";
}

std::string_view to_string(ExtractorBackend b) {
  return b == ExtractorBackend::kLlm ? "llm" : "mock";
}

DetectorBackend parse_detector_backend(std::string_view name) {
  if (name == "precomputed") return DetectorBackend::kPrecomputed;
  if (name == "heuristic") return DetectorBackend::kHeuristic;
  throw Error(ErrorCode::kConfigError, "unknown detector backend '" + std::string(name) + "'");
}

ExtractorBackend parse_extractor_backend(std::string_view name) {
  if (name == "llm") return ExtractorBackend::kLlm;
  if (name == "mock") return ExtractorBackend::kMock;
  throw Error(ErrorCode::kConfigError, "unknown extractor backend '" + std::string(name) + "'");
}

std::string_view to_string(PipelineStatus s) {
  switch (s) {
    case PipelineStatus::kOk:
      return "ok";
    case PipelineStatus::kNoTitleBlock:
      return "no_title_block";
    case PipelineStatus::kExtractionFailed:
      return "extraction_failed";
  }
  return "unknown";
}

void PipelineConfig::validate() const {
  auto require = [](const std::filesystem::path& p, const char* what) {
    std::error_code ec;
    if (p.empty() || !std::filesystem::exists(p, ec)) {
      throw Error(ErrorCode::kConfigError,
                  std::string(what) + " not found: '" + p.string() + "'");
    }
  };
  if (concurrency < 1) throw Error(ErrorCode::kConfigError, "concurrency must be at least 1");
  if (crop_padding < 0) throw Error(ErrorCode::kConfigError, "crop padding must be >= 0");
  if (!dictionary_path.empty()) require(dictionary_path, "dictionary");
  if (detector == DetectorBackend::kPrecomputed) require(detections_path, "detections file");
  if (extractor == ExtractorBackend::kMock) require(fixtures_dir, "fixtures directory");
  if (extractor == ExtractorBackend::kLlm) llm.validate();
}

SynonymDictionary load_dictionary(const PipelineConfig& cfg) {
  if (cfg.dictionary_path.empty()) return SynonymDictionary::builtin();
  return SynonymDictionary::load(cfg.dictionary_path);
}

Pipeline::Pipeline(PipelineConfig cfg, RecordStore& store)
    : cfg_(std::move(cfg)), store_(store) {
  cfg_.validate();
  if (cfg_.detector == DetectorBackend::kPrecomputed) {
    precomputed_ = load_precomputed(cfg_.detections_path);
  }
}

std::vector<Detection> Pipeline::detect(const PageImage& img) const {
  if (cfg_.detector == DetectorBackend::kHeuristic) return heuristic_detect(img, cfg_.heuristic);
  auto it = precomputed_.find(img.drawing_id());
  return it == precomputed_.end() ? std::vector<Detection>{} : it->second;
}

RawExtraction Pipeline::extract(const PageImage& crop) const {
  if (cfg_.extractor == ExtractorBackend::kMock) {
    return mock_extract(crop.drawing_id(), cfg_.fixtures_dir);
  }
  return extract_via_llm(crop, cfg_.llm);
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

PipelineResult Pipeline::run(const PageImage& img, const std::optional<std::string>& source) {
  const auto start = Clock::now();
  PipelineResult r;
  r.drawing_id = img.drawing_id();
  auto finish = [&] {
    r.timings.total_ms = ms_since(start);
    return r;
  };

  auto t = Clock::now();
  std::vector<Detection> dets;
  try {
    dets = detect(img);
  } catch (const Error& e) {
    r.status = PipelineStatus::kNoTitleBlock;
    r.error = e.what();
  }
  r.detection = select_title_block(dets);
  r.timings.detect_ms = ms_since(t);
  if (!r.detection) {
    r.status = PipelineStatus::kNoTitleBlock;
    return finish();
  }

  try {
    t = Clock::now();
    const PageImage crop = crop_region(img, r.detection->box, cfg_.crop_padding);
    r.timings.crop_ms = ms_since(t);
    t = Clock::now();
    r.raw = extract(crop);
    r.timings.extract_ms = ms_since(t);
  } catch (const Error& e) {
    r.status = PipelineStatus::kExtractionFailed;
    r.error = e.what();
    return finish();
  }

  t = Clock::now();
  r.record = merge_pairs(*r.raw, store_.dictionary());
  r.timings.canonicalize_ms = ms_since(t);

  t = Clock::now();
  store_.upsert(*r.record, source);
  r.timings.store_ms = ms_since(t);
  r.status = PipelineStatus::kOk;
  return finish();
}

BatchReport Pipeline::batch(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && is_supported_image(entry.path())) files.push_back(entry.path());
  }
  if (ec) {
    throw Error(ErrorCode::kConfigError, "cannot read directory " + dir.string() + ": " + ec.message());
  }
  std::sort(files.begin(), files.end());

  std::vector<std::optional<PipelineResult>> results(files.size());
  std::vector<std::optional<std::string>> errors(files.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;
  std::mutex fatal_mu;

  auto worker = [&] {
    while (!abort) {
      const std::size_t i = next++;
      if (i >= files.size()) return;
      try {
        const PageImage img = load_image(files[i]);
        results[i] = run(img, std::filesystem::absolute(files[i]).string());
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kPersistenceError) {
          std::lock_guard lock(fatal_mu);
          if (!fatal) fatal = std::current_exception();
          abort = true;
          return;
        }
        errors[i] = e.what();
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  const auto n = std::min<std::size_t>(static_cast<std::size_t>(cfg_.concurrency),
                                       std::max<std::size_t>(files.size(), 1));
  std::vector<std::jthread> pool;
  for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
  pool.clear();
  if (fatal) std::rethrow_exception(fatal);

  BatchReport report;
  for (auto s : {PipelineStatus::kOk, PipelineStatus::kNoTitleBlock,
                 PipelineStatus::kExtractionFailed}) {
    report.counts[std::string(to_string(s))] = 0;
  }
  report.counts["failed"] = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (results[i]) {
      ++report.counts[std::string(to_string(results[i]->status))];
      report.results.push_back(std::move(*results[i]));
    } else if (errors[i]) {
      ++report.counts["failed"];
      report.failures.push_back({files[i], *errors[i]});
    }
  }
  return report;
}

void to_json(json& j, const Detection& d) {
  j = {{"bbox", {d.box.x(), d.box.y(), d.box.w(), d.box.h()}},
       {"category", to_string(d.category)},
       {"confidence", d.confidence}};
}

void to_json(json& j, const PipelineResult& r) {
  j = {{"drawing_id", r.drawing_id},
       {"status", to_string(r.status)},
       {"detection", nullptr},
       {"raw", nullptr},
       {"record", nullptr},
       {"timings_ms",
        {{"detect", r.timings.detect_ms},
         {"crop", r.timings.crop_ms},
         {"extract", r.timings.extract_ms},
         {"canonicalize", r.timings.canonicalize_ms},
         {"store", r.timings.store_ms},
         {"total", r.timings.total_ms}}}};
  if (r.detection) j["detection"] = *r.detection;
  if (r.raw) j["raw"] = *r.raw;
  if (r.record) j["record"] = *r.record;
  if (!r.error.empty()) j["error"] = r.error;
}

void to_json(json& j, const BatchReport& r) {
  json failures = json::array();
  for (const auto& f : r.failures) failures.push_back({{"path", f.path.string()}, {"error", f.error}});
  j = {{"results", r.results}, {"failures", failures}, {"counts", r.counts}};
}

}  // namespace tbx
