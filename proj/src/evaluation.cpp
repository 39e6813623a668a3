#include "tbx/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <sstream>
#include <tuple>

#include "tbx/errors.hpp"
#include "tbx/text.hpp"

namespace tbx {

using nlohmann::json;

std::size_t levenshtein(std::string_view a, std::string_view b) {
  const std::u32string s = text::utf8_decode(a);
  const std::u32string t = text::utf8_decode(b);
  const std::u32string& shorter = s.size() < t.size() ? s : t;
  const std::u32string& longer = s.size() < t.size() ? t : s;
  std::vector<std::size_t> row(shorter.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= longer.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= shorter.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (longer[i - 1] == shorter[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[shorter.size()];
}

namespace {

bool gated_match(std::string_view pred, std::string_view gt, bool gate_open,
                 std::size_t max_distance) {
  const std::string p = text::normalize_spaces_lower(pred);
  const std::string g = text::normalize_spaces_lower(gt);
  if (p == g) return true;
  if (!gate_open) return false;
  return levenshtein(p, g) <= max_distance;
}

}  // namespace

bool fuzzy_key_match(std::string_view pred, std::string_view gt,
                     const FuzzyGates& gates) {
  const std::string g = text::normalize_spaces_lower(gt);
  const bool open = text::utf8_length(g) > gates.key_min_length ||
                    g.find(' ') != std::string::npos;
  return gated_match(pred, g, open, gates.key_max_distance);
}

bool fuzzy_value_match(std::string_view pred, std::string_view gt,
                       const FuzzyGates& gates) {
  const std::string g = text::normalize_spaces_lower(gt);
  const bool open = text::utf8_length(g) > gates.value_min_length;
  return gated_match(pred, g, open, gates.value_max_distance);
}

// Detection metrics

namespace {

bool by_confidence(const Detection& a, const Detection& b) {
  return std::tuple(-a.confidence, a.box.x(), a.box.y(), a.box.w(), a.box.h()) <
         std::tuple(-b.confidence, b.box.x(), b.box.y(), b.box.w(), b.box.h());
}

void finish(CategoryMetrics& m) {
  if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / (m.tp + m.fp);
  if (m.tp + m.fn > 0) m.recall = static_cast<double>(m.tp) / (m.tp + m.fn);
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
}

}  // namespace

DetectionMetrics evaluate_detections(const DetectionMap& preds,
                                     const DetectionMap& gts,
                                     const DetectionEvalParams& params) {
  for (const auto& [id, _] : preds) {
    if (!gts.contains(id)) {
      throw Error(ErrorCode::kMissingGroundTruth,
                  "no ground truth for drawing '" + id + "'");
    }
  }

  DetectionMetrics out;
  out.drawings = gts.size();
  std::size_t tb_correct = 0;
  static const std::vector<Detection> kNone;

  for (const auto& [id, gt_all] : gts) {
    auto pit = preds.find(id);
    const std::vector<Detection>& pred_all = pit == preds.end() ? kNone : pit->second;

    for (Category cat : kAllCategories) {
      std::vector<Detection> p;
      std::vector<Detection> g;
      for (const auto& d : pred_all) {
        if (d.category == cat) p.push_back(d);
      }
      for (const auto& d : gt_all) {
        if (d.category == cat) g.push_back(d);
      }
      std::sort(p.begin(), p.end(), by_confidence);

      CategoryMetrics& m = out[cat];
      m.gt += g.size();
      std::vector<bool> matched(g.size(), false);
      for (const Detection& d : p) {
        std::optional<std::size_t> best;
        double best_iou = params.iou_threshold;
        for (std::size_t j = 0; j < g.size(); ++j) {
          if (matched[j]) continue;
          const double v = iou(d.box, g[j].box);
          if (v > best_iou) {
            best_iou = v;
            best = j;
          }
        }
        if (best) {
          matched[*best] = true;
          ++m.tp;
          continue;
        }
        bool redundant = false;
        if (cat == Category::kTitleBlock) {
          for (std::size_t j = 0; j < g.size(); ++j) {
            if (matched[j] && iou(d.box, g[j].box) >= params.suppression_iou) {
              redundant = true;
              break;
            }
          }
        }
        if (redundant) {
          ++m.ignored;
        } else {
          ++m.fp;
        }
      }
      m.fn += static_cast<std::size_t>(
          std::count(matched.begin(), matched.end(), false));

      if (cat == Category::kTitleBlock) {
        const auto top = select_title_block(p);
        if (g.empty()) {
          tb_correct += top ? 0 : 1;
        } else if (top) {
          tb_correct += std::any_of(g.begin(), g.end(), [&](const Detection& t) {
            return iou(top->box, t.box) > params.iou_threshold;
          });
        }
      }
    }
  }

  for (Category cat : kAllCategories) {
    CategoryMetrics& m = out[cat];
    finish(m);
    if (cat == Category::kTitleBlock) {
      m.accuracy = out.drawings ? static_cast<double>(tb_correct) / out.drawings : 0.0;
    } else {
      m.accuracy = m.gt ? static_cast<double>(m.tp) / m.gt : 0.0;
    }
  }
  return out;
}

// Extraction metrics

FieldDoc to_field_doc(const CanonicalRecord& rec) {
  FieldDoc doc;
  for (const auto& [key, values] : rec.fields) doc.emplace_back(key, values);
  for (const auto& [key, value] : rec.unmatched) {
    auto it = std::find_if(doc.begin(), doc.end(),
                           [&](const auto& kv) { return kv.first == key; });
    if (it == doc.end()) {
      doc.emplace_back(key, std::vector<std::string>{value});
    } else {
      it->second.push_back(value);
    }
  }
  return doc;
}

FieldDoc to_field_doc(const RawExtraction& raw) {
  FieldDoc doc;
  for (const auto& [key, value] : raw.pairs) {
    auto it = std::find_if(doc.begin(), doc.end(),
                           [&](const auto& kv) { return kv.first == key; });
    if (it == doc.end()) {
      doc.emplace_back(key, std::vector<std::string>{value});
    } else {
      it->second.push_back(value);
    }
  }
  return doc;
}

ExtractionMetrics evaluate_extraction(const std::map<std::string, FieldDoc>& preds,
                                      const std::map<std::string, FieldDoc>& gts,
                                      const FuzzyGates& gates) {
  for (const auto& [id, _] : preds) {
    if (!gts.contains(id)) {
      throw Error(ErrorCode::kMissingGroundTruth,
                  "no ground truth for drawing '" + id + "'");
    }
  }
  ExtractionMetrics m;
  static const FieldDoc kEmpty;
  for (const auto& [id, gt] : gts) {
    auto pit = preds.find(id);
    const FieldDoc& pred = pit == preds.end() ? kEmpty : pit->second;
    std::vector<bool> used(pred.size(), false);
    for (const auto& [gkey, gvalues] : gt) {
      ++m.gt_keys;
      const std::string g = text::normalize_spaces_lower(gkey);
      std::optional<std::size_t> best;
      std::size_t best_dist = 0;
      std::string best_norm;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        if (used[i] || !fuzzy_key_match(pred[i].first, gkey, gates)) continue;
        const std::string p = text::normalize_spaces_lower(pred[i].first);
        const std::size_t d = levenshtein(p, g);
        if (!best || d < best_dist || (d == best_dist && p < best_norm)) {
          best = i;
          best_dist = d;
          best_norm = p;
        }
      }
      if (!best) continue;
      used[*best] = true;
      ++m.matched_keys;
      const auto& pvalues = pred[*best].second;
      const bool hit = std::any_of(pvalues.begin(), pvalues.end(), [&](const auto& pv) {
        return std::any_of(gvalues.begin(), gvalues.end(), [&](const auto& gv) {
          return fuzzy_value_match(pv, gv, gates);
        });
      });
      if (hit) ++m.matched_values;
    }
  }
  if (m.gt_keys) m.key_accuracy = static_cast<double>(m.matched_keys) / m.gt_keys;
  if (m.matched_keys) {
    m.value_accuracy = static_cast<double>(m.matched_values) / m.matched_keys;
  }
  return m;
}

// Reports

namespace {

const char* label(Category c) {
  switch (c) {
    case Category::kTitleBlock: return "TitleBlock";
    case Category::kMainContent: return "Main content";
    case Category::kLegend: return "Legend";
    case Category::kNotes: return "Notes";
  }
  return "?";
}

}  // namespace

std::string detection_report_json(const DetectionMetrics& m) {
  json rows = json::array();
  for (Category c : kAllCategories) {
    const CategoryMetrics& r = m[c];
    rows.push_back({{"category", std::string(to_string(c))},
                    {"acc", r.accuracy},
                    {"pr", r.precision},
                    {"rec", r.recall},
                    {"f1", r.f1},
                    {"gt", r.gt},
                    {"tp", r.tp},
                    {"fp", r.fp},
                    {"fn", r.fn},
                    {"ignored", r.ignored}});
  }
  return json{{"drawings", m.drawings}, {"categories", rows}}.dump(2);
}

std::string detection_report_table(const DetectionMetrics& m) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %6s %6s %6s %6s %6s %6s %6s\n",
                "Category", "Acc", "Pr", "Rec", "F1", "TP", "FP", "FN");
  out << line;
  for (Category c : kAllCategories) {
    const CategoryMetrics& r = m[c];
    std::snprintf(line, sizeof line,
                  "%-14s %6.3f %6.3f %6.3f %6.3f %6zu %6zu %6zu\n", label(c),
                  r.accuracy, r.precision, r.recall, r.f1, r.tp, r.fp, r.fn);
    out << line;
  }
  return out.str();
}

std::string extraction_report_json(const ExtractionMetrics& m) {
  return json{{"key_accuracy", m.key_accuracy},
              {"value_accuracy", m.value_accuracy},
              {"gt_keys", m.gt_keys},
              {"matched_keys", m.matched_keys},
              {"matched_values", m.matched_values}}
      .dump(2);
}

std::string extraction_report_table(const ExtractionMetrics& m) {
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "keys   %5zu / %-5zu  accuracy %.3f\nvalues %5zu / %-5zu  "
                "accuracy %.3f\n",
                m.matched_keys, m.gt_keys, m.key_accuracy, m.matched_values,
                m.matched_keys, m.value_accuracy);
  return buf;
}

}  // namespace tbx
