#include "default_dictionary.hpp"

namespace tbx::detail {

// Curated from the cell titles seen on building-drawing title blocks.
const char* const kDefaultDictionaryJson = R"json({
  "abbreviations": {
    "dwg": "drawing",
    "drg": "drawing",
    "desc": "description",
    "descr": "description",
    "no": "number",
    "nr": "number",
    "num": "number",
    "rev": "revision",
    "chk": "checked",
    "chkd": "checked",
    "dwn": "drawn",
    "appd": "approved",
    "proj": "project"
  },
  "keys": {
    "drawing_title":       {"display": "Drawing title", "type": "text",
                            "aliases": ["drawing title", "title", "drawing name", "sheet title"]},
    "drawing_number":      {"display": "Drawing number", "type": "text",
                            "aliases": ["drawing number", "dwg no", "drg no", "number"]},
    "drawing_description": {"display": "Drawing description", "type": "text",
                            "aliases": ["drawing description", "description", "dwg desc",
                                        "drawing content", "content"]},
    "project_name":        {"display": "Project name", "type": "text",
                            "aliases": ["project name", "project", "project title", "job name", "job title"]},
    "project_number":      {"display": "Project number", "type": "text",
                            "aliases": ["project number", "job number", "job no", "project no"]},
    "client":              {"display": "Client", "type": "text",
                            "aliases": ["client", "client name"]},
    "scale":               {"display": "Scale", "type": "text",
                            "aliases": ["scale", "scales"]},
    "date":                {"display": "Date", "type": "date",
                            "aliases": ["date", "drawing date", "issue date"]},
    "drawn_by":            {"display": "Drawn by", "type": "text",
                            "aliases": ["drawn by", "drawn", "dwn", "drawn name"]},
    "checked_by":          {"display": "Checked by", "type": "text",
                            "aliases": ["checked by", "checked", "chk"]},
    "approved_by":         {"display": "Approved by", "type": "text",
                            "aliases": ["approved by", "approved", "appd"]},
    "revision":            {"display": "Revision", "type": "text",
                            "aliases": ["revision", "rev", "revision number"]},
    "status":              {"display": "Status", "type": "text",
                            "aliases": ["status", "drawing status", "issue status", "purpose of issue"]},
    "sheet_number":        {"display": "Sheet number", "type": "text",
                            "aliases": ["sheet number", "sheet", "sheet no"]},
    "notes":               {"display": "Notes", "type": "text",
                            "aliases": ["notes", "note", "general notes", "drawing notes", "drawing note"]}
  }
})json";

}  // namespace tbx::detail
