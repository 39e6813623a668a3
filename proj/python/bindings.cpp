#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "tbx/canonical.hpp"
#include "tbx/coco.hpp"
#include "tbx/detection.hpp"
#include "tbx/errors.hpp"
#include "tbx/evaluation.hpp"
#include "tbx/extraction.hpp"
#include "tbx/geometry.hpp"
#include "tbx/image.hpp"
#include "tbx/query.hpp"
#include "tbx/serialization.hpp"
#include "tbx/store.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

py::dict detection_dict(const tbx::Detection& d) {
  py::dict out;
  out["bbox"] = py::make_tuple(d.box.x(), d.box.y(), d.box.w(), d.box.h());
  out["category"] = std::string(tbx::to_string(d.category));
  out["confidence"] = d.confidence;
  return out;
}

std::string record_json(const tbx::CanonicalRecord& rec) { return json(rec).dump(); }

tbx::CanonicalRecord record_from_json(const std::string& text) {
  return json::parse(text).get<tbx::CanonicalRecord>();
}

}  // namespace

PYBIND11_MODULE(_tbx, m) {
  m.doc() = "Title-block extraction, canonicalization, evaluation and search";

  static py::exception<tbx::Error> error(m, "TbxError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const tbx::Error& e) {
      const std::string msg = std::string(tbx::to_string(e.code())) + ": " + e.what();
      PyErr_SetString(error.ptr(), msg.c_str());
    }
  });

  m.def("levenshtein", &tbx::levenshtein, py::arg("a"), py::arg("b"));
  m.def("fuzzy_key_match",
        [](const std::string& p, const std::string& g) { return tbx::fuzzy_key_match(p, g); });
  m.def("fuzzy_value_match",
        [](const std::string& p, const std::string& g) { return tbx::fuzzy_value_match(p, g); });

  m.def("iou", [](std::array<double, 4> a, std::array<double, 4> b) {
    return tbx::iou(tbx::BoundingBox(a[0], a[1], a[2], a[3]),
                    tbx::BoundingBox(b[0], b[1], b[2], b[3]));
  });

  m.def("detect_title_blocks", [](const std::filesystem::path& image) {
    py::list out;
    for (const auto& d : tbx::heuristic_detect(tbx::load_image(image))) out.append(detection_dict(d));
    return out;
  }, py::arg("image"), "Heuristic title-block candidates, best first.");

  m.def("parse_tolerant_pairs", [](const std::string& text) { return tbx::parse_tolerant_pairs(text); });
  m.def("build_prompt", [] {
    const auto p = tbx::build_prompt();
    return py::make_tuple(p.system, p.user);
  });

  m.def("normalize_key", [](const std::string& raw) {
    return tbx::normalize_key_text(raw, tbx::SynonymDictionary::builtin());
  });
  m.def("canonicalize_key", [](const std::string& raw) -> std::optional<std::string> {
    auto k = tbx::canonicalize_key(raw, tbx::SynonymDictionary::builtin());
    if (!k) return std::nullopt;
    return k->id;
  });
  m.def("parse_date", [](const std::string& raw) -> std::optional<std::string> {
    auto d = tbx::parse_date(raw);
    if (!d) return std::nullopt;
    return d->to_string();
  });
  m.def("merge_pairs", [](const std::string& drawing_id, const std::vector<tbx::KeyValuePair>& pairs) {
    tbx::RawExtraction raw{drawing_id, tbx::ExtractionSource::kMock, pairs};
    return record_json(tbx::merge_pairs(raw, tbx::SynonymDictionary::builtin()));
  }, "Canonical record as a JSON string.");

  m.def("parse_query", [](const std::string& text) {
    return tbx::print_query(tbx::parse_query(text, tbx::SynonymDictionary::builtin()));
  }, "Normalized form of a query.");

  m.def("evaluate_extraction", [](const std::string& pred, const std::string& gt) {
    const auto m = tbx::evaluate_extraction(tbx::parse_field_docs(pred), tbx::parse_field_docs(gt));
    return tbx::extraction_report_json(m);
  });

  m.def("markup_to_coco", [](const std::string& markup_docs, double dpi) {
    std::vector<tbx::coco::MarkupDocument> docs;
    for (const auto& d : json::parse(markup_docs)) docs.push_back(tbx::coco::markup_from_json(d));
    return tbx::coco::dataset_to_json(tbx::coco::markup_to_coco(docs, dpi)).dump();
  }, py::arg("markup_docs"), py::arg("dpi") = tbx::coco::kDefaultDpi);

  m.def("validate_coco", [](const std::string& coco) {
    py::list out;
    for (const auto& f : tbx::coco::validate(tbx::coco::dataset_from_json(json::parse(coco)))) {
      out.append(py::make_tuple(f.kind, f.message));
    }
    return out;
  });

  py::class_<tbx::RecordStore>(m, "RecordStore")
      .def(py::init([] { return std::make_unique<tbx::RecordStore>(); }))
      .def(py::init([](const std::filesystem::path& dir) {
             return std::make_unique<tbx::RecordStore>(dir, tbx::SynonymDictionary::builtin());
           }),
           py::arg("data_dir"))
      .def("upsert", [](tbx::RecordStore& s, const std::string& rec) { s.upsert(record_from_json(rec)); },
           "Stores a record given as a JSON string.")
      .def("get", [](const tbx::RecordStore& s, const std::string& id) -> std::optional<std::string> {
        auto r = s.get(id);
        if (!r) return std::nullopt;
        return record_json(*r);
      })
      .def("search", [](const tbx::RecordStore& s, const std::string& q) {
        return s.search(tbx::parse_query(q, s.dictionary()));
      })
      .def("group_by", &tbx::RecordStore::group_by)
      .def("keyword_summary", [](const tbx::RecordStore& s, std::size_t top) {
        py::dict out;
        for (const auto& [k, v] : s.keyword_summary(top)) out[py::str(k)] = py::make_tuple(v.record_count, v.top_values);
        return out;
      }, py::arg("top") = 10)
      .def("snapshot", &tbx::RecordStore::snapshot)
      .def("__len__", &tbx::RecordStore::size)
      .def("ids", &tbx::RecordStore::ids);
}
