#include "tbx/serialization.hpp"

#include "tbx/errors.hpp"

namespace tbx {

using nlohmann::json;

void to_json(json& j, const CanonicalRecord& rec) {
  json dates = json::object();
  for (const auto& [k, d] : rec.dates) dates[k] = d.to_string();
  json unmatched = json::array();
  for (const auto& [k, v] : rec.unmatched) unmatched.push_back({k, v});
  j = json{{"drawing_id", rec.drawing_id},
           {"fields", rec.fields},
           {"dates", dates},
           {"unmatched", unmatched}};
}

void from_json(const json& j, CanonicalRecord& rec) {
  rec = CanonicalRecord{};
  rec.drawing_id = j.at("drawing_id").get<std::string>();
  if (auto f = j.find("fields"); f != j.end()) {
    rec.fields = f->get<std::map<std::string, std::vector<std::string>>>();
  }
  if (auto d = j.find("dates"); d != j.end()) {
    for (auto& [k, v] : d->items()) {
      auto date = parse_iso_date(v.get<std::string>());
      if (!date) {
        throw json::type_error::create(302, "bad date '" + v.get<std::string>() + "'", &v);
      }
      rec.dates.emplace(k, *date);
    }
  }
  if (auto u = j.find("unmatched"); u != j.end()) {
    for (const auto& pair : *u) {
      rec.unmatched.emplace_back(pair.at(0).get<std::string>(),
                                 pair.at(1).get<std::string>());
    }
  }
}

void to_json(json& j, const RawExtraction& raw) {
  json pairs = json::array();
  for (const auto& [k, v] : raw.pairs) pairs.push_back({k, v});
  j = json{{"drawing_id", raw.drawing_id},
           {"source", std::string(to_string(raw.source))},
           {"pairs", pairs}};
}

namespace {

FieldDoc doc_from_object(const json& obj) {
  FieldDoc doc;
  for (auto& [k, v] : obj.items()) {
    std::vector<std::string> values;
    if (v.is_array()) {
      for (const auto& x : v) values.push_back(x.is_string() ? x.get<std::string>() : x.dump());
    } else if (v.is_string()) {
      values.push_back(v.get<std::string>());
    } else {
      values.push_back(v.dump());
    }
    doc.emplace_back(k, std::move(values));
  }
  return doc;
}

}  // namespace

std::map<std::string, FieldDoc> parse_field_docs(std::string_view document) {
  json j = json::parse(document, nullptr, false);
  if (j.is_discarded()) throw ParseError(0, "document", "not valid JSON");
  std::map<std::string, FieldDoc> out;
  try {
    if (j.is_array()) {
      for (const auto& r : j) {
        const CanonicalRecord rec = r.get<CanonicalRecord>();
        out[rec.drawing_id] = to_field_doc(rec);
      }
    } else if (j.is_object()) {
      for (auto& [id, v] : j.items()) {
        if (!v.is_object()) throw ParseError(0, id, "expected an object of fields");
        out[id] = doc_from_object(v);
      }
    } else {
      throw ParseError(0, "document", "expected an object or an array");
    }
  } catch (const json::exception& e) {
    throw ParseError(0, "record", e.what());
  }
  return out;
}

}  // namespace tbx
