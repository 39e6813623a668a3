#include "tbx/query.hpp"

#include <cstdio>
#include <regex>

#include "tbx/errors.hpp"
#include "tbx/text.hpp"

namespace tbx {

std::string_view to_string(CmpOp op) {
  switch (op) {
    case CmpOp::kLt: return "<";
    case CmpOp::kLe: return "<=";
    case CmpOp::kGt: return ">";
    case CmpOp::kGe: return ">=";
    case CmpOp::kEq: return "=";
  }
  return "?";
}

QueryNode QueryNode::all_of(std::vector<QueryNode> children) {
  QueryNode n;
  n.kind = Kind::kAnd;
  n.children = std::move(children);
  return n;
}

QueryNode QueryNode::any_of(std::vector<QueryNode> children) {
  QueryNode n;
  n.kind = Kind::kOr;
  n.children = std::move(children);
  return n;
}

QueryNode QueryNode::negate(QueryNode child) {
  QueryNode n;
  n.kind = Kind::kNot;
  n.children.push_back(std::move(child));
  return n;
}

QueryNode QueryNode::contains(std::string key, std::string term) {
  QueryNode n;
  n.kind = Kind::kContains;
  n.key = std::move(key);
  n.terms.push_back(std::move(term));
  return n;
}

QueryNode QueryNode::in_all(std::string key, std::vector<std::string> terms) {
  QueryNode n;
  n.kind = Kind::kInAll;
  n.key = std::move(key);
  n.terms = std::move(terms);
  return n;
}

QueryNode QueryNode::in_any(std::string key, std::vector<std::string> terms) {
  QueryNode n = in_all(std::move(key), std::move(terms));
  n.kind = Kind::kInAny;
  return n;
}

QueryNode QueryNode::equals(std::string key, std::string value) {
  QueryNode n;
  n.kind = Kind::kEquals;
  n.key = std::move(key);
  n.terms.push_back(std::move(value));
  return n;
}

QueryNode QueryNode::date_cmp(std::string key, CmpOp op, DateValue date) {
  QueryNode n;
  n.kind = Kind::kDateCmp;
  n.key = std::move(key);
  n.op = op;
  n.date = date;
  return n;
}

std::vector<std::string> tokenize(std::string_view value) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value) {
    if (text::is_token_char(c)) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::optional<std::strong_ordering> compare_at_granularity(const DateValue& stored,
                                                           const DateValue& literal) {
  if (auto c = stored.year <=> literal.year; c != 0) return c;
  if (!literal.month) return std::strong_ordering::equal;
  if (!stored.month) return std::nullopt;
  if (auto c = *stored.month <=> *literal.month; c != 0) return c;
  if (!literal.day) return std::strong_ordering::equal;
  if (!stored.day) return std::nullopt;
  return *stored.day <=> *literal.day;
}

bool date_matches(const DateValue& stored, CmpOp op, const DateValue& literal) {
  const auto c = compare_at_granularity(stored, literal);
  if (!c) return false;
  switch (op) {
    case CmpOp::kLt: return *c < 0;
    case CmpOp::kLe: return *c <= 0;
    case CmpOp::kGt: return *c > 0;
    case CmpOp::kGe: return *c >= 0;
    case CmpOp::kEq: return *c == 0;
  }
  return false;
}

namespace {

enum class Tok { kLParen, kRParen, kLBracket, kRBracket, kComma, kString, kWord, kDate, kOp, kEnd };

struct Token {
  Tok type;
  std::size_t offset;
  std::string text;  // decoded string, word, date literal or operator
};

class Lexer {
 public:
  explicit Lexer(std::string_view s) : s_(s) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t' || s_[i_] == '\n' || s_[i_] == '\r')) {
        ++i_;
      }
      if (i_ >= s_.size()) {
        out.push_back({Tok::kEnd, s_.size(), {}});
        return out;
      }
      const std::size_t at = i_;
      const char c = s_[i_];
      switch (c) {
        case '(': out.push_back({Tok::kLParen, at, "("}); ++i_; continue;
        case ')': out.push_back({Tok::kRParen, at, ")"}); ++i_; continue;
        case '[': out.push_back({Tok::kLBracket, at, "["}); ++i_; continue;
        case ']': out.push_back({Tok::kRBracket, at, "]"}); ++i_; continue;
        case ',': out.push_back({Tok::kComma, at, ","}); ++i_; continue;
        case '=': out.push_back({Tok::kOp, at, "="}); ++i_; continue;
        case '<':
        case '>': {
          std::string op(1, c);
          ++i_;
          if (i_ < s_.size() && s_[i_] == '=') {
            op.push_back('=');
            ++i_;
          }
          out.push_back({Tok::kOp, at, op});
          continue;
        }
        case '"':
        case '\'':
          out.push_back({Tok::kString, at, quoted(c)});
          continue;
        default:
          break;
      }
      if (c >= '0' && c <= '9') {
        while (i_ < s_.size() && ((s_[i_] >= '0' && s_[i_] <= '9') || s_[i_] == '/' || s_[i_] == '.')) {
          ++i_;
        }
        out.push_back({Tok::kDate, at, std::string(s_.substr(at, i_ - at))});
        continue;
      }
      if (text::is_ascii_alnum(c) || c == '_') {
        while (i_ < s_.size() && (text::is_ascii_alnum(s_[i_]) || s_[i_] == '_')) ++i_;
        out.push_back({Tok::kWord, at, std::string(s_.substr(at, i_ - at))});
        continue;
      }
      throw QuerySyntaxError(at, "a condition, keyword or operator");
    }
  }

 private:
  std::string quoted(char quote) {
    const std::size_t open = i_++;
    std::string out;
    while (i_ < s_.size()) {
      const char c = s_[i_];
      if (c == quote) {
        ++i_;
        return out;
      }
      if (c == '\\' && i_ + 1 < s_.size()) {
        out.push_back(s_[i_ + 1]);
        i_ += 2;
        continue;
      }
      out.push_back(c);
      ++i_;
    }
    (void)open;
    throw QuerySyntaxError(s_.size(), std::string("closing ") + quote);
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

bool is_keyword(const Token& t, std::string_view kw) {
  return t.type == Tok::kWord && text::to_lower(t.text) == kw;
}

bool is_reserved(const Token& t) {
  for (auto kw : {"and", "or", "not", "in", "any", "contains"}) {
    if (is_keyword(t, kw)) return true;
  }
  return false;
}

class Parser {
 public:
  Parser(std::vector<Token> toks, const SynonymDictionary& dict)
      : toks_(std::move(toks)), dict_(dict) {}

  QueryNode parse() {
    if (peek().type == Tok::kEnd) return QueryNode::all_of({});
    QueryNode q = or_expr();
    if (peek().type != Tok::kEnd) {
      throw QuerySyntaxError(peek().offset, "AND, OR or end of query");
    }
    return q;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  const Token& expect(Tok type, const char* what) {
    if (peek().type != type) throw QuerySyntaxError(peek().offset, what);
    return next();
  }

  QueryNode or_expr() {
    std::vector<QueryNode> parts{and_expr()};
    while (is_keyword(peek(), "or")) {
      next();
      parts.push_back(and_expr());
    }
    return parts.size() == 1 ? std::move(parts.front()) : QueryNode::any_of(std::move(parts));
  }

  QueryNode and_expr() {
    std::vector<QueryNode> parts{unary()};
    while (is_keyword(peek(), "and")) {
      next();
      parts.push_back(unary());
    }
    return parts.size() == 1 ? std::move(parts.front()) : QueryNode::all_of(std::move(parts));
  }

  QueryNode unary() {
    if (is_keyword(peek(), "not")) {
      next();
      return QueryNode::negate(unary());
    }
    return atom();
  }

  QueryNode atom() {
    if (peek().type == Tok::kLParen) {
      next();
      QueryNode inner = or_expr();
      expect(Tok::kRParen, "')'");
      return inner;
    }
    if (peek().type == Tok::kLBracket) {
      std::vector<std::string> terms = list();
      if (!is_keyword(peek(), "in")) throw QuerySyntaxError(peek().offset, "IN");
      next();
      const bool any = is_keyword(peek(), "any");
      if (any) next();
      std::string key = key_ref();
      return any ? QueryNode::in_any(std::move(key), std::move(terms))
                 : QueryNode::in_all(std::move(key), std::move(terms));
    }
    return condition();
  }

  std::string key_ref() {
    const Token& t = peek();
    if (t.type != Tok::kString && (t.type != Tok::kWord || is_reserved(t))) {
      throw QuerySyntaxError(t.offset, "a key");
    }
    next();
    if (dict_.find(t.text)) return t.text;
    if (auto k = canonicalize_key(t.text, dict_)) return k->id;
    throw UnknownKeyError(t.offset, t.text);
  }

  std::string term() {
    const Token& t = peek();
    if (t.type != Tok::kString) throw QuerySyntaxError(t.offset, "a quoted string");
    if (t.text.empty()) throw QuerySyntaxError(t.offset, "a non-empty string");
    next();
    return t.text;
  }

  std::vector<std::string> list() {
    expect(Tok::kLBracket, "'['");
    std::vector<std::string> out{term()};
    while (peek().type == Tok::kComma) {
      next();
      out.push_back(term());
    }
    expect(Tok::kRBracket, "',' or ']'");
    return out;
  }

  DateValue date_literal() {
    static const std::regex mm_yyyy(R"(^(\d{1,2})/(\d{4})$)");
    static const std::regex dd_mm_yyyy(R"(^(\d{1,2})\.(\d{1,2})\.(\d{4})$)");
    static const std::regex yyyy(R"(^\d{4}$)");
    const Token& t = peek();
    constexpr const char* kWhat = "date literal (MM/YYYY, YYYY or DD.MM.YYYY)";
    if (t.type != Tok::kDate) throw QuerySyntaxError(t.offset, kWhat);
    std::smatch m;
    DateValue d;
    if (std::regex_match(t.text, m, mm_yyyy)) {
      d = {std::stoi(m[2].str()), std::stoi(m[1].str()), std::nullopt};
    } else if (std::regex_match(t.text, m, dd_mm_yyyy)) {
      d = {std::stoi(m[3].str()), std::stoi(m[2].str()), std::stoi(m[1].str())};
    } else if (std::regex_match(t.text, yyyy)) {
      d = {std::stoi(t.text), std::nullopt, std::nullopt};
    } else {
      throw QuerySyntaxError(t.offset, kWhat);
    }
    if (!d.valid()) throw QuerySyntaxError(t.offset, "a valid calendar date");
    next();
    return d;
  }

  QueryNode condition() {
    std::string key = key_ref();
    const Token& t = peek();
    if (is_keyword(t, "contains")) {
      next();
      return QueryNode::contains(std::move(key), term());
    }
    if (is_keyword(t, "in")) {
      next();
      const bool any = is_keyword(peek(), "any");
      if (any) next();
      auto terms = list();
      return any ? QueryNode::in_any(std::move(key), std::move(terms))
                 : QueryNode::in_all(std::move(key), std::move(terms));
    }
    if (t.type == Tok::kOp) {
      const std::string op = t.text;
      next();
      if (op == "=") {
        if (peek().type == Tok::kString) return QueryNode::equals(std::move(key), term());
        return QueryNode::date_cmp(std::move(key), CmpOp::kEq, date_literal());
      }
      const CmpOp cmp = op == "<"    ? CmpOp::kLt
                        : op == "<=" ? CmpOp::kLe
                        : op == ">"  ? CmpOp::kGt
                                     : CmpOp::kGe;
      return QueryNode::date_cmp(std::move(key), cmp, date_literal());
    }
    throw QuerySyntaxError(t.offset, "CONTAINS, IN, '=' or a comparison operator");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const SynonymDictionary& dict_;
};

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string date_literal_text(const DateValue& d) {
  char buf[32];
  if (d.day) {
    std::snprintf(buf, sizeof buf, "%02d.%02d.%04d", *d.day, *d.month, d.year);
  } else if (d.month) {
    std::snprintf(buf, sizeof buf, "%02d/%04d", *d.month, d.year);
  } else {
    std::snprintf(buf, sizeof buf, "%04d", d.year);
  }
  return buf;
}

std::string print_node(const QueryNode& q, bool nested) {
  using K = QueryNode::Kind;
  auto list = [](const std::vector<std::string>& terms) {
    std::string out = "[";
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (i) out += ", ";
      out += quote(terms[i]);
    }
    return out + "]";
  };
  switch (q.kind) {
    case K::kAnd:
    case K::kOr: {
      if (q.children.empty()) return q.kind == K::kAnd ? "" : "NOT ()";
      std::string out;
      const char* sep = q.kind == K::kAnd ? " AND " : " OR ";
      for (std::size_t i = 0; i < q.children.size(); ++i) {
        if (i) out += sep;
        out += print_node(q.children[i], true);
      }
      return nested ? "(" + out + ")" : out;
    }
    case K::kNot:
      return "NOT " + print_node(q.children.at(0), true);
    case K::kContains:
      return quote(q.key) + " CONTAINS " + quote(q.terms.at(0));
    case K::kInAll:
      return quote(q.key) + " IN " + list(q.terms);
    case K::kInAny:
      return quote(q.key) + " IN ANY " + list(q.terms);
    case K::kEquals:
      return quote(q.key) + " = " + quote(q.terms.at(0));
    case K::kDateCmp:
      return quote(q.key) + " " + std::string(to_string(q.op)) + " " + date_literal_text(q.date);
  }
  return {};
}

void collect_keys(const QueryNode& q, std::set<std::string>& out) {
  if (!q.key.empty()) out.insert(q.key);
  for (const auto& c : q.children) collect_keys(c, out);
}

}  // namespace

QueryNode parse_query(std::string_view input, const SynonymDictionary& dict) {
  return Parser(Lexer(input).run(), dict).parse();
}

std::string print_query(const QueryNode& q) { return print_node(q, false); }

std::set<std::string> query_keys(const QueryNode& q) {
  std::set<std::string> out;
  collect_keys(q, out);
  return out;
}

}  // namespace tbx
