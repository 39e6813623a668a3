#include "tbx/coco.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "tbx/errors.hpp"
#include "tbx/geometry.hpp"
#include "tbx/text.hpp"

namespace tbx::coco {

using nlohmann::json;

std::vector<CocoCategory> standard_categories() {
  std::vector<CocoCategory> out;
  long long id = 1;
  for (Category c : kAllCategories) {
    out.push_back({id++, std::string(to_string(c)), json::object()});
  }
  return out;
}

std::string normalize_label(std::string_view label) {
  std::string s = text::normalize_spaces_lower(label);
  for (char& c : s) {
    if (c == ' ' || c == '-') c = '_';
  }
  return s;
}

namespace {

std::string where(std::size_t d, const MarkupDocument& doc, std::size_t p,
                  std::size_t s) {
  return "document " + std::to_string(d) + " ('" + doc.file_name + "'), page " +
         std::to_string(p) + ", shape " + std::to_string(s);
}

// Pixel span of [a, b) in points, at least one pixel wide and inside
// [0, limit].
std::pair<long long, long long> to_pixels(double a, double b, double scale,
                                          long long limit) {
  long long lo = std::llround(a * scale);
  long long hi = std::llround(b * scale);
  if (hi <= lo) {
    hi = lo + 1;
    if (hi > limit) {
      hi = limit;
      lo = limit - 1;
    }
  }
  return {lo, hi};
}

}  // namespace

CocoDataset markup_to_coco(const std::vector<MarkupDocument>& docs, double dpi) {
  const double scale = dpi / 72.0;
  CocoDataset ds;
  ds.categories = standard_categories();
  long long image_id = 1;
  long long ann_id = 1;
  constexpr double kEps = 1e-9;

  for (std::size_t d = 0; d < docs.size(); ++d) {
    const MarkupDocument& doc = docs[d];
    for (std::size_t p = 0; p < doc.pages.size(); ++p) {
      const MarkupPage& page = doc.pages[p];
      CocoImage img;
      img.id = image_id++;
      img.file_name = doc.file_name;
      img.width = std::llround(page.width_pt * scale);
      img.height = std::llround(page.height_pt * scale);
      img.page_index = page.page_index;

      for (std::size_t s = 0; s < page.shapes.size(); ++s) {
        const MarkupShape& shape = page.shapes[s];
        const auto cat = parse_category(normalize_label(shape.label));
        if (shape.label.empty() || !cat) {
          throw Error(ErrorCode::kUnknownLabel,
                      "unknown label '" + shape.label + "' at " +
                          where(d, doc, p, s));
        }
        const PointRect& r = shape.rect;
        if (!(r.w > 0 && r.h > 0) || r.x < -kEps || r.y < -kEps ||
            r.x + r.w > page.width_pt + kEps ||
            r.y + r.h > page.height_pt + kEps) {
          throw Error(ErrorCode::kRectOutOfBounds,
                      "rectangle outside page bounds at " + where(d, doc, p, s));
        }
        const auto [x0, x1] = to_pixels(r.x, r.x + r.w, scale, img.width);
        const auto [y0, y1] = to_pixels(r.y, r.y + r.h, scale, img.height);

        CocoAnnotation ann;
        ann.id = ann_id++;
        ann.image_id = img.id;
        ann.category_id = static_cast<long long>(*cat) + 1;
        ann.bbox = {static_cast<double>(x0), static_cast<double>(y0),
                    static_cast<double>(x1 - x0), static_cast<double>(y1 - y0)};
        ann.area = ann.bbox[2] * ann.bbox[3];
        ann.attributes = {{"label", shape.label},
                          {"author", shape.author},
                          {"created", shape.created}};
        ds.annotations.push_back(std::move(ann));
      }
      ds.images.push_back(std::move(img));
    }
  }
  return ds;
}

std::vector<MarkupDocument> coco_to_markup(const CocoDataset& ds, double dpi) {
  const auto findings = validate(ds);
  if (!findings.empty()) {
    throw Error(ErrorCode::kValidationError,
                "dataset has " + std::to_string(findings.size()) +
                    " validation finding(s), first: " + findings.front().message);
  }
  const double inv = 72.0 / dpi;
  std::map<long long, std::string> cat_names;
  for (const auto& c : ds.categories) cat_names[c.id] = c.name;

  std::vector<MarkupDocument> docs;
  std::map<std::string, std::size_t> doc_index;
  std::map<long long, std::pair<std::size_t, std::size_t>> page_of_image;
  for (const CocoImage& img : ds.images) {
    auto [it, fresh] = doc_index.emplace(img.file_name, docs.size());
    if (fresh) docs.push_back({img.file_name, {}});
    MarkupDocument& doc = docs[it->second];
    doc.pages.push_back({img.page_index, img.width * inv, img.height * inv, {}});
    page_of_image[img.id] = {it->second, doc.pages.size() - 1};
  }
  for (const CocoAnnotation& ann : ds.annotations) {
    const auto [d, p] = page_of_image.at(ann.image_id);
    MarkupShape shape;
    shape.rect = {ann.bbox[0] * inv, ann.bbox[1] * inv, ann.bbox[2] * inv,
                  ann.bbox[3] * inv};
    const json& attrs = ann.attributes;
    shape.label = attrs.contains("label") && attrs["label"].is_string()
                      ? attrs["label"].get<std::string>()
                      : cat_names.at(ann.category_id);
    if (attrs.contains("author") && attrs["author"].is_string()) {
      shape.author = attrs["author"].get<std::string>();
    }
    if (attrs.contains("created") && attrs["created"].is_string()) {
      shape.created = attrs["created"].get<std::string>();
    }
    docs[d].pages[p].shapes.push_back(std::move(shape));
  }
  for (auto& doc : docs) {
    std::stable_sort(doc.pages.begin(), doc.pages.end(),
                     [](const MarkupPage& a, const MarkupPage& b) {
                       return a.page_index < b.page_index;
                     });
  }
  return docs;
}

std::vector<Finding> validate(const CocoDataset& ds) {
  std::vector<Finding> out;
  auto report = [&](const char* kind, std::string msg) {
    out.push_back({kind, std::move(msg)});
  };

  std::map<long long, const CocoImage*> images;
  for (const auto& img : ds.images) {
    if (!images.emplace(img.id, &img).second) {
      report("duplicate_id", "image id " + std::to_string(img.id) + " repeated");
    }
  }
  std::set<long long> cats;
  const auto standard = standard_categories();
  for (const auto& c : ds.categories) {
    if (!cats.insert(c.id).second) {
      report("duplicate_id", "category id " + std::to_string(c.id) + " repeated");
    }
    const bool known = std::any_of(standard.begin(), standard.end(), [&](const auto& s) {
      return s.id == c.id && s.name == c.name;
    });
    if (!known) {
      report("unknown_category", "category " + std::to_string(c.id) + " '" +
                                     c.name + "' is not one of the four drawing categories");
    }
  }
  std::set<long long> anns;
  for (const auto& a : ds.annotations) {
    const std::string tag = "annotation " + std::to_string(a.id);
    if (!anns.insert(a.id).second) report("duplicate_id", tag + " repeated");
    if (!cats.contains(a.category_id)) {
      report("dangling_reference",
             tag + " references missing category " + std::to_string(a.category_id));
    }
    auto img = images.find(a.image_id);
    if (img == images.end()) {
      report("dangling_reference",
             tag + " references missing image " + std::to_string(a.image_id));
    }
    const auto& [x, y, w, h] = a.bbox;
    if (img != images.end() &&
        (x < 0 || y < 0 || w <= 0 || h <= 0 ||
         x + w > static_cast<double>(img->second->width) ||
         y + h > static_cast<double>(img->second->height))) {
      report("bbox_outside_image", tag + " bbox exceeds image bounds");
    }
    if (std::abs(a.area - w * h) > 1e-6 * std::max(1.0, std::abs(w * h))) {
      report("area_mismatch", tag + " area " + std::to_string(a.area) +
                                  " != w*h " + std::to_string(w * h));
    }
  }
  return out;
}

namespace {

json without(const json& obj, std::initializer_list<const char*> known) {
  json extra = json::object();
  for (auto& [k, v] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* n) { return k == n; })) {
      extra[k] = v;
    }
  }
  return extra;
}

}  // namespace

CocoDataset dataset_from_json(const json& j) {
  CocoDataset ds;
  try {
    for (const auto& i : j.at("images")) {
      CocoImage img;
      img.id = i.at("id").get<long long>();
      img.file_name = i.at("file_name").get<std::string>();
      img.width = i.at("width").get<long long>();
      img.height = i.at("height").get<long long>();
      img.page_index = i.value("page_index", 0);
      img.extra = without(i, {"id", "file_name", "width", "height", "page_index"});
      ds.images.push_back(std::move(img));
    }
    for (const auto& a : j.at("annotations")) {
      CocoAnnotation ann;
      ann.id = a.at("id").get<long long>();
      ann.image_id = a.at("image_id").get<long long>();
      ann.category_id = a.at("category_id").get<long long>();
      const auto& b = a.at("bbox");
      if (!b.is_array() || b.size() != 4) {
        throw Error(ErrorCode::kParseError, "annotation bbox must have 4 numbers");
      }
      for (std::size_t k = 0; k < 4; ++k) ann.bbox[k] = b[k].get<double>();
      ann.area = a.contains("area") ? a["area"].get<double>() : ann.bbox[2] * ann.bbox[3];
      if (auto at = a.find("attributes"); at != a.end() && at->is_object()) {
        ann.attributes = *at;
      }
      ann.extra = without(a, {"id", "image_id", "category_id", "bbox", "area",
                              "attributes", "iscrowd"});
      ds.annotations.push_back(std::move(ann));
    }
    for (const auto& c : j.at("categories")) {
      CocoCategory cat;
      cat.id = c.at("id").get<long long>();
      cat.name = c.at("name").get<std::string>();
      cat.extra = without(c, {"id", "name", "supercategory"});
      ds.categories.push_back(std::move(cat));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("malformed COCO: ") + e.what());
  }
  return ds;
}

json dataset_to_json(const CocoDataset& ds) {
  json images = json::array();
  for (const auto& i : ds.images) {
    images.push_back({{"id", i.id},
                      {"file_name", i.file_name},
                      {"width", i.width},
                      {"height", i.height},
                      {"page_index", i.page_index}});
  }
  json anns = json::array();
  for (const auto& a : ds.annotations) {
    anns.push_back({{"id", a.id},
                    {"image_id", a.image_id},
                    {"category_id", a.category_id},
                    {"bbox", a.bbox},
                    {"area", a.area},
                    {"iscrowd", 0},
                    {"attributes", a.attributes}});
  }
  json cats = json::array();
  for (const auto& c : ds.categories) {
    cats.push_back({{"id", c.id}, {"name", c.name}, {"supercategory", "drawing"}});
  }
  return {{"images", images}, {"annotations", anns}, {"categories", cats}};
}

MarkupDocument markup_from_json(const json& j) {
  MarkupDocument doc;
  try {
    doc.file_name = j.at("file_name").get<std::string>();
    for (const auto& p : j.at("pages")) {
      MarkupPage page;
      page.page_index = p.value("page_index", static_cast<int>(doc.pages.size()));
      page.width_pt = p.at("width_pt").get<double>();
      page.height_pt = p.at("height_pt").get<double>();
      for (const auto& s : p.value("shapes", json::array())) {
        MarkupShape shape;
        const auto& r = s.at("rect");
        if (!r.is_array() || r.size() != 4) {
          throw Error(ErrorCode::kParseError, "shape rect must have 4 numbers");
        }
        shape.rect = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>(),
                      r[3].get<double>()};
        shape.label = s.at("label").get<std::string>();
        shape.author = s.value("author", "");
        shape.created = s.value("created", "");
        page.shapes.push_back(std::move(shape));
      }
      doc.pages.push_back(std::move(page));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("malformed markup: ") + e.what());
  }
  return doc;
}

json markup_to_json(const MarkupDocument& doc) {
  json pages = json::array();
  for (const auto& p : doc.pages) {
    json shapes = json::array();
    for (const auto& s : p.shapes) {
      shapes.push_back({{"rect", {s.rect.x, s.rect.y, s.rect.w, s.rect.h}},
                        {"label", s.label},
                        {"author", s.author},
                        {"created", s.created}});
    }
    pages.push_back({{"page_index", p.page_index},
                     {"width_pt", p.width_pt},
                     {"height_pt", p.height_pt},
                     {"shapes", shapes}});
  }
  return {{"file_name", doc.file_name}, {"pages", pages}};
}

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParseError, "cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorCode::kParseError, path.string() + " is not valid JSON");
  }
  return j;
}

}  // namespace

namespace {

std::string image_key(const CocoImage& img) {
  std::string stem = std::filesystem::path(img.file_name).stem().string();
  if (img.page_index > 0) stem += "#" + std::to_string(img.page_index);
  return stem;
}

}  // namespace

CocoDataset load_dataset(const std::filesystem::path& path) {
  return dataset_from_json(read_json(path));
}

MarkupDocument load_markup(const std::filesystem::path& path) {
  return markup_from_json(read_json(path));
}

DetectionMap to_detections(const CocoDataset& ds) {
  if (const auto findings = validate(ds); !findings.empty()) {
    throw Error(ErrorCode::kValidationError, findings.front().message);
  }
  std::map<long long, const CocoImage*> images;
  for (const auto& img : ds.images) images[img.id] = &img;
  std::map<long long, Category> cats;
  for (const auto& c : ds.categories) {
    if (auto cat = parse_category(normalize_label(c.name))) cats[c.id] = *cat;
  }
  DetectionMap out;
  for (const auto& img : ds.images) {
    out.try_emplace(image_key(img));
  }
  for (const auto& a : ds.annotations) {
    auto cat = cats.find(a.category_id);
    if (cat == cats.end()) {
      throw Error(ErrorCode::kValidationError,
                  "annotation " + std::to_string(a.id) + " has a category outside the standard four");
    }
    out[image_key(*images.at(a.image_id))].emplace_back(
        BoundingBox(a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3]), cat->second, 1.0);
  }
  return out;
}

}  // namespace tbx::coco
