#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>

#include "tbx/canonical.hpp"
#include "tbx/evaluation.hpp"
#include "tbx/extraction.hpp"

namespace tbx {

// Record layout: {"drawing_id", "fields": {id: [values]},
// "dates": {id: "YYYY[-MM[-DD]]"}, "unmatched": [[key, value], ...]}
void to_json(nlohmann::json& j, const CanonicalRecord& rec);
void from_json(const nlohmann::json& j, CanonicalRecord& rec);

void to_json(nlohmann::json& j, const RawExtraction& raw);

// Scoring documents. Accepts either an object keyed by drawing id whose
// values are {key: value-or-[values]} objects, or an array of records in the
// layout above (canonical fields plus unmatched pairs).
// Throws Error(kParseError) on anything else.
std::map<std::string, FieldDoc> parse_field_docs(std::string_view document);

}  // namespace tbx
