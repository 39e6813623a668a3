#include "tbx/server.hpp"

#include <httplib.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "tbx/coco.hpp"
#include "tbx/errors.hpp"
#include "tbx/evaluation.hpp"
#include "tbx/query.hpp"
#include "tbx/serialization.hpp"

namespace tbx {

using nlohmann::json;

namespace {

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

int http_status(ErrorCode code) {
  if (is_external(code)) return 502;
  switch (code) {
    case ErrorCode::kPersistenceError:
      return 500;
    case ErrorCode::kFixtureMissing:
      return 404;
    default:
      return 400;
  }
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body.empty() ? std::string("{}") : req.body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, std::string("request body is not JSON: ") + e.what());
  }
}

std::string require_string(const json& body, const char* name) {
  auto it = body.find(name);
  if (it == body.end() || !it->is_string()) {
    throw Error(ErrorCode::kValidationError, std::string("missing string field '") + name + "'");
  }
  return it->get<std::string>();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParseError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Inline document under `name`, or a file under `name_path`.
std::string document_field(const json& body, const std::string& name) {
  if (auto it = body.find(name); it != body.end()) {
    return it->is_string() ? it->get<std::string>() : it->dump();
  }
  if (auto it = body.find(name + "_path"); it != body.end() && it->is_string()) {
    return read_file(it->get<std::string>());
  }
  throw Error(ErrorCode::kValidationError, "missing field '" + name + "' or '" + name + "_path'");
}

json plan_json(const RenamePlan& plan) {
  json j = json::parse(plan.to_json());
  j["hash"] = plan.hash();
  return j;
}

}  // namespace

Service::Service(PipelineConfig cfg, RecordStore& store)
    : pipeline_(std::move(cfg), store),
      store_(store),
      server_(std::make_unique<httplib::Server>()) {
  mount();
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw Error(ErrorCode::kConfigError, "cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void Service::listen() { server_->listen_after_bind(); }

void Service::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

void Service::mount() {
  auto& srv = *server_;

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                               std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const QuerySyntaxError& e) {
      send(res, 400, {{"error", "syntax_error"}, {"message", e.what()},
                      {"offset", e.offset()}, {"expected", e.expected()}});
    } catch (const UnknownKeyError& e) {
      send(res, 400, {{"error", "unknown_key"}, {"message", e.what()},
                      {"offset", e.offset()}, {"key", e.key()}});
    } catch (const Error& e) {
      send(res, http_status(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}});
    } catch (const std::exception& e) {
      send(res, 500, {{"error", "internal"}, {"message", e.what()}});
    }
  });

  srv.Post("/api/drawings", [this](const httplib::Request& req, httplib::Response& res) {
    std::filesystem::path path;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("file")) {
        throw Error(ErrorCode::kValidationError, "multipart upload needs a 'file' part");
      }
      const auto file = req.get_file_value("file");
      const std::filesystem::path name = std::filesystem::path(file.filename).filename();
      if (name.empty() || !is_supported_image(name)) {
        throw Error(ErrorCode::kImageError, "unsupported upload '" + file.filename + "'");
      }
      const auto& data_dir = pipeline_.config().data_dir;
      const auto dir = (data_dir.empty() ? std::filesystem::temp_directory_path() / "tbx" : data_dir) /
                       "uploads";
      std::filesystem::create_directories(dir);
      path = dir / name;
      std::ofstream out(path, std::ios::binary);
      out.write(file.content.data(), static_cast<std::streamsize>(file.content.size()));
      if (!out) throw Error(ErrorCode::kPersistenceError, "cannot write " + path.string());
    } else {
      path = std::filesystem::absolute(require_string(parse_body(req), "path"));
      std::error_code ec;
      if (!std::filesystem::is_regular_file(path, ec)) {
        throw Error(ErrorCode::kImageError, "no such file: " + path.string());
      }
      if (!is_supported_image(path)) {
        throw Error(ErrorCode::kImageError, "unsupported image type: " + path.string());
      }
    }
    const std::string id = path.stem().string();
    store_.register_source(id, path.string());
    send(res, 201, {{"drawing_id", id}, {"path", path.string()}});
  });

  srv.Post(R"(/api/drawings/([^/]+)/process)",
           [this](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             const auto src = store_.source(id);
             if (!src) {
               send(res, 404, {{"error", "not_found"}, {"message", "unknown drawing '" + id + "'"}});
               return;
             }
             PageImage img = load_image(*src);
             img.set_drawing_id(id);
             send(res, 200, pipeline_.run(img, *src));
           });

  srv.Post("/api/batch", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string dir = require_string(parse_body(req), "dir");
    send(res, 200, pipeline_.batch(dir));
  });

  srv.Get(R"(/api/records/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (auto rec = store_.get(id)) {
      send(res, 200, *rec);
    } else {
      send(res, 404, {{"error", "not_found"}, {"message", "no record for '" + id + "'"}});
    }
  });

  srv.Get("/api/search", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string text = req.get_param_value("q");
    const QueryNode q = parse_query(text, store_.dictionary());
    const auto ids = store_.search(q);
    std::set<std::string> shown = query_keys(q);
    shown.insert({"drawing_title", "drawing_number"});
    json results = json::array();
    for (const auto& id : ids) {
      const auto rec = store_.get(id);
      if (!rec) continue;
      json fields = json::object();
      for (const auto& key : shown) {
        if (auto f = rec->fields.find(key); f != rec->fields.end()) fields[key] = f->second;
      }
      results.push_back({{"drawing_id", id}, {"fields", fields}});
    }
    send(res, 200, {{"query", print_query(q)}, {"ids", ids}, {"results", results}});
  });

  srv.Get("/api/keys", [this](const httplib::Request& req, httplib::Response& res) {
    std::size_t top = 10;
    if (req.has_param("top")) {
      try {
        top = std::stoul(req.get_param_value("top"));
      } catch (const std::exception&) {
        throw Error(ErrorCode::kValidationError, "top must be a non-negative integer");
      }
    }
    json out = json::object();
    for (const auto& [key, s] : store_.keyword_summary(top)) {
      json values = json::array();
      for (const auto& [v, n] : s.top_values) values.push_back({{"value", v}, {"count", n}});
      const auto* entry = store_.dictionary().find(key);
      out[key] = {{"display", entry ? entry->key.display : key},
                  {"record_count", s.record_count},
                  {"top_values", values}};
    }
    send(res, 200, out);
  });

  srv.Get("/api/groups", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string key = req.get_param_value("key");
    send(res, 200, {{"key", key}, {"groups", store_.group_by(key)}});
  });

  srv.Post("/api/rename-plan", [this](const httplib::Request& req, httplib::Response& res) {
    const RenamePlan plan = store_.rename_plan(require_string(parse_body(req), "template"));
    const json body = plan_json(plan);
    {
      std::lock_guard lock(plans_mu_);
      plans_[body["hash"].get<std::string>()] = plan;
    }
    send(res, 200, body);
  });

  srv.Post("/api/rename-apply", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string hash = require_string(parse_body(req), "hash");
    RenamePlan plan;
    {
      std::lock_guard lock(plans_mu_);
      auto it = plans_.find(hash);
      if (it == plans_.end()) {
        send(res, 404, {{"error", "not_found"}, {"message", "no plan with hash " + hash}});
        return;
      }
      plan = it->second;
    }
    if (store_.rename_plan(plan.template_text).hash() != hash) {
      send(res, 409, {{"error", "stale_plan"},
                      {"message", "records or files changed since the plan was made"}});
      return;
    }
    const RenameResult result = store_.apply_rename(plan);
    json renamed = json::array();
    for (const auto& e : result.renamed) {
      renamed.push_back({{"drawing_id", e.drawing_id}, {"old_name", e.old_name}, {"new_name", e.new_name}});
    }
    json skipped = json::array();
    for (const auto& [id, why] : result.skipped) skipped.push_back({{"drawing_id", id}, {"reason", why}});
    {
      std::lock_guard lock(plans_mu_);
      plans_.erase(hash);
    }
    send(res, 200, {{"renamed", renamed}, {"skipped", skipped}});
  });

  srv.Post("/api/eval/detections", [](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    std::istringstream pred(document_field(body, "pred"));
    const DetectionMap preds = parse_detections(pred);
    json gt_doc;
    try {
      gt_doc = json::parse(document_field(body, "gt"));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParseError, std::string("gt is not JSON: ") + e.what());
    }
    const DetectionMap gts = coco::to_detections(coco::dataset_from_json(gt_doc));
    send(res, 200, json::parse(detection_report_json(evaluate_detections(preds, gts))));
  });

  srv.Post("/api/eval/extraction", [](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const auto preds = parse_field_docs(document_field(body, "pred"));
    const auto gts = parse_field_docs(document_field(body, "gt"));
    send(res, 200, json::parse(extraction_report_json(evaluate_extraction(preds, gts))));
  });
}

}  // namespace tbx
