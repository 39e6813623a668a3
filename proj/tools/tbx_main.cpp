// tbx: title-block extraction, search and dataset tooling.

#include <CLI11.hpp>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "tbx/coco.hpp"
#include "tbx/detection.hpp"
#include "tbx/errors.hpp"
#include "tbx/evaluation.hpp"
#include "tbx/extraction.hpp"
#include "tbx/image.hpp"
#include "tbx/pipeline.hpp"
#include "tbx/query.hpp"
#include "tbx/serialization.hpp"
#include "tbx/server.hpp"
#include "tbx/store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitExternal = 3;

struct Options {
  std::string data_dir = "tbx-data";
  std::string dict;
  std::string detector = "heuristic";
  std::string extractor = "mock";
  std::string detections;
  std::string fixtures;
  int pad = tbx::kDefaultCropPadding;
  int concurrency = 4;
  bool as_json = false;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw tbx::Error(tbx::ErrorCode::kParseError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw tbx::Error(tbx::ErrorCode::kPersistenceError, "cannot write " + p.string());
}

tbx::PipelineConfig pipeline_config(const Options& o) {
  tbx::PipelineConfig cfg;
  cfg.detector = tbx::parse_detector_backend(o.detector);
  cfg.extractor = tbx::parse_extractor_backend(o.extractor);
  cfg.dictionary_path = o.dict;
  cfg.crop_padding = o.pad;
  cfg.concurrency = o.concurrency;
  cfg.data_dir = o.data_dir;
  cfg.detections_path = o.detections;
  cfg.fixtures_dir = o.fixtures;
  if (cfg.extractor == tbx::ExtractorBackend::kLlm) cfg.llm = tbx::extractor_config_from_env();
  return cfg;
}

tbx::SynonymDictionary dictionary(const Options& o) {
  return o.dict.empty() ? tbx::SynonymDictionary::builtin() : tbx::SynonymDictionary::load(o.dict);
}

void add_backend_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--detector", o.detector, "precomputed | heuristic")
      ->check(CLI::IsMember({"precomputed", "heuristic"}));
  cmd->add_option("--extractor", o.extractor, "llm | mock")->check(CLI::IsMember({"llm", "mock"}));
  cmd->add_option("--detections", o.detections, "Precomputed detections (NDJSON)");
  cmd->add_option("--fixtures", o.fixtures, "Mock extractor fixture directory");
  cmd->add_option("--pad", o.pad, "Crop padding in pixels")->check(CLI::NonNegativeNumber);
  cmd->add_option("--concurrency", o.concurrency, "Pipeline workers")->check(CLI::PositiveNumber);
}

void print_detections(const std::string& id, const std::vector<tbx::Detection>& dets) {
  for (const auto& d : dets) std::cout << tbx::to_wire_line(id, d) << '\n';
}

int run_serve(const Options& o, const std::string& host, int port) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  tbx::RecordStore store(o.data_dir, dictionary(o));
  tbx::Service service(pipeline_config(o), store);
  const int bound = service.bind(host, port);
  std::cout << "listening on http://" << host << ':' << bound << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
  });
  service.listen();
  // listen() only returns after stop(); wake the waiter if it is still blocked.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Title-block extraction, metadata search and dataset tooling"};
  app.require_subcommand(1);
  Options o;
  if (const char* env = std::getenv("TBX_DATA_DIR")) o.data_dir = env;
  app.add_option("--data-dir", o.data_dir, "Store directory (TBX_DATA_DIR)");
  app.add_option("--dict", o.dict, "Synonym dictionary JSON")->check(CLI::ExistingFile);
  app.add_flag("--json", o.as_json, "Machine-readable output");

  std::vector<std::string> paths;
  std::string image;
  std::string query;
  std::string key;
  std::string templ;
  bool apply = false;
  std::string gt;
  std::string pred;
  std::string output;
  double dpi = tbx::coco::kDefaultDpi;
  std::size_t top = 10;
  std::string host = "127.0.0.1";
  int port = 8080;

  auto* ingest = app.add_subcommand("ingest", "Register drawing files with the store");
  ingest->add_option("paths", paths, "Image files or directories")->required();

  auto* detect = app.add_subcommand("detect", "Detect title blocks on one drawing");
  detect->add_option("image", image)->required()->check(CLI::ExistingFile);
  detect->add_option("--backend", o.detector, "precomputed | heuristic")
      ->check(CLI::IsMember({"precomputed", "heuristic"}));
  detect->add_option("--detections", o.detections, "Precomputed detections (NDJSON)");

  auto* extract = app.add_subcommand("extract", "Extract key/value pairs from a title-block image");
  extract->add_option("image", image)->required()->check(CLI::ExistingFile);
  extract->add_option("--backend", o.extractor, "llm | mock")->check(CLI::IsMember({"llm", "mock"}));
  extract->add_option("--fixtures", o.fixtures, "Mock extractor fixture directory");

  auto* pipeline = app.add_subcommand("pipeline", "Run the full pipeline over images or a directory");
  pipeline->add_option("paths", paths, "Image files or directories")->required();
  add_backend_options(pipeline, o);

  auto* search = app.add_subcommand("search", "Query stored records");
  search->add_option("query", query, "Query text")->required();

  auto* keys = app.add_subcommand("keys", "Summarize canonical keys");
  keys->add_option("--top", top, "Values shown per key");

  auto* group = app.add_subcommand("group", "Group drawings by a canonical key");
  group->add_option("--key", key)->required();

  auto* rename = app.add_subcommand("rename", "Preview or apply template-based renames");
  rename->add_option("--template", templ, "e.g. {project_name}_{drawing_number}")->required();
  rename->add_flag("--apply", apply, "Rename the files");

  auto* eval_det = app.add_subcommand("eval-det", "Score detections against COCO ground truth");
  eval_det->add_option("--gt", gt, "COCO file")->required()->check(CLI::ExistingFile);
  eval_det->add_option("--pred", pred, "Detections (NDJSON)")->required()->check(CLI::ExistingFile);

  auto* eval_ext = app.add_subcommand("eval-ext", "Score extracted records against ground truth");
  eval_ext->add_option("--gt", gt)->required()->check(CLI::ExistingFile);
  eval_ext->add_option("--pred", pred)->required()->check(CLI::ExistingFile);

  auto* convert = app.add_subcommand("convert", "Convert between markup and COCO");
  convert->require_subcommand(1);
  auto* m2c = convert->add_subcommand("markup2coco", "Markup documents to one COCO file");
  m2c->add_option("inputs", paths, "Markup files")->required()->check(CLI::ExistingFile);
  m2c->add_option("-o,--output", output, "COCO file")->required();
  m2c->add_option("--dpi", dpi)->check(CLI::PositiveNumber);
  auto* c2m = convert->add_subcommand("coco2markup", "COCO file to markup documents");
  c2m->add_option("input", image, "COCO file")->required()->check(CLI::ExistingFile);
  c2m->add_option("-o,--output", output, "Output directory")->required();
  c2m->add_option("--dpi", dpi)->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate-coco", "Check a COCO file for consistency");
  validate->add_option("input", image)->required()->check(CLI::ExistingFile);

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  add_backend_options(serve, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest) {
      tbx::RecordStore store(o.data_dir, dictionary(o));
      for (const fs::path p : paths) {
        std::vector<fs::path> files;
        if (fs::is_directory(p)) {
          for (const auto& e : fs::directory_iterator(p)) {
            if (e.is_regular_file() && tbx::is_supported_image(e.path())) files.push_back(e.path());
          }
          std::sort(files.begin(), files.end());
        } else if (fs::is_regular_file(p) && tbx::is_supported_image(p)) {
          files.push_back(p);
        } else {
          throw tbx::Error(tbx::ErrorCode::kImageError, "not a supported image: " + p.string());
        }
        for (const auto& f : files) {
          const auto abs = fs::absolute(f);
          store.register_source(abs.stem().string(), abs.string());
          std::cout << abs.stem().string() << '\t' << abs.string() << '\n';
        }
      }
    } else if (*detect) {
      const tbx::PageImage img = tbx::load_image(image);
      if (o.detector == "precomputed") {
        if (o.detections.empty()) {
          std::cerr << "detect: --detections is required with the precomputed backend\n";
          return kExitUsage;
        }
        const auto map = tbx::load_precomputed(o.detections);
        auto it = map.find(img.drawing_id());
        print_detections(img.drawing_id(), it == map.end() ? std::vector<tbx::Detection>{} : it->second);
      } else {
        print_detections(img.drawing_id(), tbx::heuristic_detect(img));
      }
    } else if (*extract) {
      const tbx::PageImage img = tbx::load_image(image);
      tbx::RawExtraction raw;
      if (o.extractor == "mock") {
        if (o.fixtures.empty()) {
          std::cerr << "extract: --fixtures is required with the mock backend\n";
          return kExitUsage;
        }
        raw = tbx::mock_extract(img.drawing_id(), o.fixtures);
      } else {
        raw = tbx::extract_via_llm(img, tbx::extractor_config_from_env());
      }
      const auto record = tbx::merge_pairs(raw, dictionary(o));
      std::cout << json{{"raw", raw}, {"record", record}}.dump(2) << '\n';
    } else if (*pipeline) {
      tbx::RecordStore store(o.data_dir, dictionary(o));
      tbx::Pipeline pipe(pipeline_config(o), store);
      tbx::BatchReport total;
      for (const fs::path p : paths) {
        if (fs::is_directory(p)) {
          auto r = pipe.batch(p);
          for (auto& x : r.results) total.results.push_back(std::move(x));
          for (auto& f : r.failures) total.failures.push_back(std::move(f));
          for (const auto& [k, n] : r.counts) total.counts[k] += n;
        } else {
          try {
            const auto img = tbx::load_image(p);
            auto res = pipe.run(img, fs::absolute(p).string());
            ++total.counts[std::string(tbx::to_string(res.status))];
            total.results.push_back(std::move(res));
          } catch (const tbx::Error& e) {
            if (e.code() == tbx::ErrorCode::kPersistenceError) throw;
            ++total.counts["failed"];
            total.failures.push_back({p, e.what()});
          }
        }
      }
      if (o.as_json) {
        std::cout << json(total).dump(2) << '\n';
      } else {
        for (const auto& r : total.results) {
          std::cout << r.drawing_id << '\t' << tbx::to_string(r.status);
          if (!r.error.empty()) std::cout << '\t' << r.error;
          std::cout << '\n';
        }
        for (const auto& f : total.failures) std::cout << f.path.string() << "\tfailed\t" << f.error << '\n';
        for (const auto& [k, n] : total.counts) std::cerr << k << ": " << n << '\n';
      }
    } else if (*search) {
      tbx::RecordStore store(o.data_dir, dictionary(o));
      const auto q = tbx::parse_query(query, store.dictionary());
      const auto ids = store.search(q);
      if (o.as_json) {
        std::cout << json{{"query", tbx::print_query(q)}, {"ids", ids}}.dump() << '\n';
      } else {
        for (const auto& id : ids) std::cout << id << '\n';
      }
    } else if (*keys) {
      tbx::RecordStore store(o.data_dir, dictionary(o));
      const auto summary = store.keyword_summary(top);
      if (o.as_json) {
        json out = json::object();
        for (const auto& [k, s] : summary) out[k] = {{"record_count", s.record_count}, {"top_values", s.top_values}};
        std::cout << out.dump(2) << '\n';
      } else {
        for (const auto& [k, s] : summary) {
          std::cout << k << " (" << s.record_count << ")";
          for (const auto& [v, n] : s.top_values) std::cout << "\n  " << n << '\t' << v;
          std::cout << '\n';
        }
      }
    } else if (*group) {
      tbx::RecordStore store(o.data_dir, dictionary(o));
      const auto groups = store.group_by(key);
      if (o.as_json) {
        std::cout << json(groups).dump(2) << '\n';
      } else {
        for (const auto& [v, ids] : groups) {
          std::cout << v << '\n';
          for (const auto& id : ids) std::cout << "  " << id << '\n';
        }
      }
    } else if (*rename) {
      tbx::RecordStore store(o.data_dir, dictionary(o));
      const auto plan = store.rename_plan(templ);
      if (!apply) {
        if (o.as_json) {
          json j = json::parse(plan.to_json());
          j["hash"] = plan.hash();
          std::cout << j.dump(2) << '\n';
        } else {
          for (const auto& e : plan.entries) std::cout << e.old_name << " -> " << e.new_name << '\n';
          for (const auto& c : plan.collisions) std::cerr << "collision: " << c << '\n';
        }
      } else {
        const auto result = store.apply_rename(plan);
        for (const auto& e : result.renamed) std::cout << e.old_name << " -> " << e.new_name << '\n';
        for (const auto& [id, why] : result.skipped) std::cerr << "skipped " << id << ": " << why << '\n';
        if (!result.skipped.empty()) return kExitData;
      }
    } else if (*eval_det) {
      const auto preds = tbx::load_precomputed(pred);
      const auto gts = tbx::coco::to_detections(tbx::coco::load_dataset(gt));
      const auto m = tbx::evaluate_detections(preds, gts);
      std::cout << (o.as_json ? tbx::detection_report_json(m) : tbx::detection_report_table(m)) << '\n';
    } else if (*eval_ext) {
      const auto preds = tbx::parse_field_docs(read_file(pred));
      const auto gts = tbx::parse_field_docs(read_file(gt));
      const auto m = tbx::evaluate_extraction(preds, gts);
      std::cout << (o.as_json ? tbx::extraction_report_json(m) : tbx::extraction_report_table(m)) << '\n';
    } else if (*m2c) {
      std::vector<tbx::coco::MarkupDocument> docs;
      for (const auto& p : paths) docs.push_back(tbx::coco::load_markup(p));
      write_file(output, tbx::coco::dataset_to_json(tbx::coco::markup_to_coco(docs, dpi)).dump(2) + "\n");
    } else if (*c2m) {
      const auto docs = tbx::coco::coco_to_markup(tbx::coco::load_dataset(image), dpi);
      for (const auto& d : docs) {
        const auto name = fs::path(d.file_name).stem().string() + ".markup.json";
        write_file(fs::path(output) / name, tbx::coco::markup_to_json(d).dump(2) + "\n");
        std::cout << (fs::path(output) / name).string() << '\n';
      }
    } else if (*validate) {
      const auto findings = tbx::coco::validate(tbx::coco::load_dataset(image));
      for (const auto& f : findings) std::cout << f.kind << '\t' << f.message << '\n';
      if (!findings.empty()) return kExitData;
      std::cout << "ok\n";
    } else if (*serve) {
      return run_serve(o, host, port);
    }
  } catch (const tbx::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (tbx::is_external(e.code())) return kExitExternal;
    return e.code() == tbx::ErrorCode::kConfigError ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
