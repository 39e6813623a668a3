#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tbx/canonical.hpp"

namespace tbx {

enum class CmpOp { kLt, kLe, kGt, kGe, kEq };

std::string_view to_string(CmpOp op);

// Boolean condition tree over canonical keys.
struct QueryNode {
  enum class Kind { kAnd, kOr, kNot, kContains, kInAll, kInAny, kEquals, kDateCmp };

  Kind kind = Kind::kAnd;
  std::vector<QueryNode> children;  // And / Or / Not
  std::string key;                  // canonical id for conditions
  std::vector<std::string> terms;   // Contains / In / Equals
  CmpOp op = CmpOp::kEq;
  DateValue date;  // granularity = which parts are set

  bool operator==(const QueryNode&) const = default;

  static QueryNode all_of(std::vector<QueryNode> children);
  static QueryNode any_of(std::vector<QueryNode> children);
  static QueryNode negate(QueryNode child);
  static QueryNode contains(std::string key, std::string term);
  static QueryNode in_all(std::string key, std::vector<std::string> terms);
  static QueryNode in_any(std::string key, std::vector<std::string> terms);
  static QueryNode equals(std::string key, std::string value);
  static QueryNode date_cmp(std::string key, CmpOp op, DateValue date);
};

// Grammar (keywords case-insensitive):
//
//   query     := or_expr
//   or_expr   := and_expr { OR and_expr }
//   and_expr  := unary { AND unary }
//   unary     := NOT unary | atom
//   atom      := '(' or_expr ')' | list IN [ANY] key | condition
//   condition := key ( CONTAINS string | IN [ANY] list
//                    | cmp_op date | '=' ( string | date ) )
//   list      := '[' string { ',' string } ']'
//   key       := quoted string | bare identifier
//   date      := MM/YYYY | YYYY | DD.MM.YYYY
//
// Keys resolve through the synonym dictionary. Empty input parses to an
// empty conjunction, which matches every record.
// Throws QuerySyntaxError or UnknownKeyError, both with byte offsets.
QueryNode parse_query(std::string_view text, const SynonymDictionary& dict);

// Normalized text form; parse_query(print_query(q)) == q.
std::string print_query(const QueryNode& q);

// Canonical keys referenced anywhere in the tree.
std::set<std::string> query_keys(const QueryNode& q);

// Lowercase, split on non-alphanumerics, drop empties.
std::vector<std::string> tokenize(std::string_view value);

// Compares a stored date against a literal at the literal's granularity.
// nullopt when the stored date lacks a part needed to decide.
std::optional<std::strong_ordering> compare_at_granularity(const DateValue& stored,
                                                           const DateValue& literal);

bool date_matches(const DateValue& stored, CmpOp op, const DateValue& literal);

}  // namespace tbx
