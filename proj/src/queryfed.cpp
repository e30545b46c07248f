#include "mg/queryfed.hpp"

#include <algorithm>
#include <cctype>

namespace mg::queryfed {

const std::vector<ClinicalAttr>& clinical_vocabulary() {
  static const std::vector<ClinicalAttr> vocab = {
      {"patient_age", AttrType::kInt}, {"laterality", AttrType::kText},
      {"view", AttrType::kText},       {"study_date", AttrType::kDate},
      {"site", AttrType::kText},       {"modality", AttrType::kText},
  };
  return vocab;
}

namespace {

const ClinicalAttr* vocab_lookup(const std::string& name) {
  for (const auto& a : clinical_vocabulary()) {
    if (name == a.name) return &a;
  }
  return nullptr;
}

AstPtr ast_compare(std::string attr, catalog::CmpOp op, Literal lit) {
  auto n = std::make_shared<AstNode>();
  n->kind = AstNode::Kind::kCompare;
  n->cmp = AstComparison{std::move(attr), op, std::move(lit)};
  return n;
}

AstPtr ast_combine(AstNode::Kind kind, std::vector<AstPtr> children) {
  auto n = std::make_shared<AstNode>();
  n->kind = kind;
  n->children = std::move(children);
  return n;
}

// --- Tokenizer -----------------------------------------------------------

struct Token {
  enum class Kind { kWord, kOp, kInt, kString, kLParen, kRParen, kEnd } kind;
  std::string text;
  std::int64_t number = 0;
  std::size_t pos = 0;
};

struct Lexer {
  const std::string& src;
  std::size_t pos = 0;

  [[noreturn]] void bail(std::size_t at, const std::string& why) {
    fail("SyntaxError", why + " (position " + std::to_string(at) + ")");
  }

  Token next() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    if (pos >= src.size()) return {Token::Kind::kEnd, "", 0, pos};
    std::size_t start = pos;
    char c = src[pos];
    if (c == '(') { ++pos; return {Token::Kind::kLParen, "(", 0, start}; }
    if (c == ')') { ++pos; return {Token::Kind::kRParen, ")", 0, start}; }
    if (c == '"') {
      ++pos;
      std::string text;
      while (pos < src.size() && src[pos] != '"') text.push_back(src[pos++]);
      if (pos >= src.size()) bail(start, "unterminated string literal");
      ++pos;
      return {Token::Kind::kString, std::move(text), 0, start};
    }
    if (c == '=' ) { ++pos; return {Token::Kind::kOp, "=", 0, start}; }
    if (c == '!' ) {
      if (pos + 1 < src.size() && src[pos + 1] == '=') { pos += 2; return {Token::Kind::kOp, "!=", 0, start}; }
      bail(start, "expected '=' after '!'");
    }
    if (c == '<' || c == '>') {
      std::string op(1, c);
      ++pos;
      if (pos < src.size() && src[pos] == '=') { op.push_back('='); ++pos; }
      return {Token::Kind::kOp, std::move(op), 0, start};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && pos + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[pos + 1])))) {
      std::size_t dstart = pos;
      if (c == '-') ++pos;
      while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) ++pos;
      // A bare date literal: YYYY-MM-DD.
      if (pos < src.size() && src[pos] == '-' && pos - dstart == 4) {
        while (pos < src.size() &&
               (std::isdigit(static_cast<unsigned char>(src[pos])) || src[pos] == '-')) {
          ++pos;
        }
        return {Token::Kind::kString, src.substr(dstart, pos - dstart), 0, start};
      }
      return {Token::Kind::kInt, src.substr(dstart, pos - dstart),
              std::stoll(src.substr(dstart, pos - dstart)), start};
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_')) {
        ++pos;
      }
      return {Token::Kind::kWord, src.substr(start, pos - start), 0, start};
    }
    bail(start, std::string("unexpected character '") + c + "'");
  }
};

struct Parser {
  Lexer lexer;
  Token current;

  explicit Parser(const std::string& src) : lexer{src} { current = lexer.next(); }

  void advance() { current = lexer.next(); }

  [[noreturn]] void bail(const std::string& why) {
    fail("SyntaxError", why + " (position " + std::to_string(current.pos) + ")");
  }

  AstPtr parse_expr() {
    AstPtr left = parse_term();
    while (current.kind == Token::Kind::kWord &&
           (current.text == "AND" || current.text == "OR")) {
      AstNode::Kind kind =
          current.text == "AND" ? AstNode::Kind::kAnd : AstNode::Kind::kOr;
      advance();
      AstPtr right = parse_term();
      left = ast_combine(kind, {left, right});
    }
    return left;
  }

  AstPtr parse_term() {
    if (current.kind == Token::Kind::kWord && current.text == "NOT") {
      advance();
      return ast_combine(AstNode::Kind::kNot, {parse_term_inner()});
    }
    return parse_term_inner();
  }

  AstPtr parse_term_inner() {
    if (current.kind == Token::Kind::kLParen) {
      advance();
      AstPtr inner = parse_expr();
      if (current.kind != Token::Kind::kRParen) bail("expected ')'");
      advance();
      return inner;
    }
    return parse_comparison();
  }

  AstPtr parse_comparison() {
    if (current.kind != Token::Kind::kWord) bail("expected attribute name");
    std::string attr = current.text;
    std::size_t attr_pos = current.pos;
    const ClinicalAttr* spec = vocab_lookup(attr);
    if (!spec) {
      fail("UnknownAttribute",
           attr + " is not a clinical attribute (position " + std::to_string(attr_pos) + ")");
    }
    advance();
    if (current.kind != Token::Kind::kOp) bail("expected comparison operator");
    catalog::CmpOp op;
    if (current.text == "=") op = catalog::CmpOp::kEq;
    else if (current.text == "!=") op = catalog::CmpOp::kNe;
    else if (current.text == "<") op = catalog::CmpOp::kLt;
    else if (current.text == "<=") op = catalog::CmpOp::kLe;
    else if (current.text == ">") op = catalog::CmpOp::kGt;
    else op = catalog::CmpOp::kGe;
    advance();

    Literal literal;
    switch (spec->type) {
      case AttrType::kInt:
        if (current.kind != Token::Kind::kInt) {
          fail("TypeError", attr + " requires an integer literal (position " +
                                std::to_string(current.pos) + ")");
        }
        literal = current.number;
        break;
      case AttrType::kDate: {
        bool date_shape = current.kind == Token::Kind::kString &&
                          current.text.size() == 10 && current.text[4] == '-' &&
                          current.text[7] == '-';
        if (!date_shape) {
          fail("TypeError", attr + " requires a YYYY-MM-DD date literal (position " +
                                std::to_string(current.pos) + ")");
        }
        literal = current.text;
        break;
      }
      case AttrType::kText:
        if (current.kind != Token::Kind::kString) {
          fail("TypeError", attr + " requires a quoted string literal (position " +
                                std::to_string(current.pos) + ")");
        }
        literal = current.text;
        break;
    }
    advance();
    return ast_compare(std::move(attr), op, std::move(literal));
  }
};

}  // namespace

QueryAst parse_query(const std::string& text) {
  Parser parser(text);
  if (parser.current.kind == Token::Kind::kEnd) {
    fail("SyntaxError", "empty query (position 0)");
  }
  AstPtr root = parser.parse_expr();
  if (parser.current.kind != Token::Kind::kEnd) parser.bail("trailing input");
  return QueryAst{root};
}

// --- Translation -------------------------------------------------------------

namespace {

catalog::CmpOp invert_for_age(catalog::CmpOp op) {
  // age OP k  <=>  birth_year inverted(OP) (query_year - k)
  switch (op) {
    case catalog::CmpOp::kLt: return catalog::CmpOp::kGt;
    case catalog::CmpOp::kLe: return catalog::CmpOp::kGe;
    case catalog::CmpOp::kGt: return catalog::CmpOp::kLt;
    case catalog::CmpOp::kGe: return catalog::CmpOp::kLe;
    default: return op;  // = and != are symmetric
  }
}

catalog::PredicatePtr translate_node(const AstPtr& node, int query_year) {
  switch (node->kind) {
    case AstNode::Kind::kCompare: {
      const AstComparison& cmp = node->cmp;
      if (cmp.attr == "patient_age") {
        std::int64_t age = std::get<std::int64_t>(cmp.literal);
        return catalog::make_compare("birth_year", invert_for_age(cmp.op),
                                     static_cast<std::int64_t>(query_year) - age);
      }
      catalog::AttrValue literal;
      if (std::holds_alternative<std::int64_t>(cmp.literal)) {
        literal = std::get<std::int64_t>(cmp.literal);
      } else {
        literal = std::get<std::string>(cmp.literal);
      }
      return catalog::make_compare(cmp.attr, cmp.op, std::move(literal));
    }
    case AstNode::Kind::kAnd: {
      std::vector<catalog::PredicatePtr> children;
      for (const auto& c : node->children) children.push_back(translate_node(c, query_year));
      return catalog::make_and(std::move(children));
    }
    case AstNode::Kind::kOr: {
      std::vector<catalog::PredicatePtr> children;
      for (const auto& c : node->children) children.push_back(translate_node(c, query_year));
      return catalog::make_or(std::move(children));
    }
    case AstNode::Kind::kNot:
      return catalog::make_not(translate_node(node->children.at(0), query_year));
  }
  fail("TypeError", "unreachable AST node kind");
}

}  // namespace

catalog::CatalogQuery translate(const QueryAst& ast, int query_year) {
  return catalog::CatalogQuery{translate_node(ast.root, query_year)};
}

// --- Planning ------------------------------------------------------------------

FederationPlan plan(const QueryAst& ast, const PlanContext& ctx) {
  if (ctx.session_principal.empty()) {
    fail("NotAuthenticated", "query planning requires an authenticated session");
  }
  catalog::CatalogQuery q = translate(ast, ctx.query_year);
  FederationPlan out;
  out.origin_vo = ctx.session_vo;

  if (ctx.topology->mode == fedvo::Mode::kP1) {
    // One VO, one central catalogue: a single local leg.
    PlanLeg leg;
    leg.target_vo = ctx.topology->vo_names.front();
    leg.query = q;
    leg.local = true;
    out.legs.push_back(std::move(leg));
    return out;
  }

  // P2: one LOCAL leg plus one leg per trusted foreign hospital VO. The
  // central VO carries no patient data and is never a query target.
  for (const auto& vo : ctx.topology->vo_names) {
    if (vo == ctx.topology->central_vo) continue;
    PlanLeg leg;
    leg.target_vo = vo;
    leg.query = q;
    if (vo == ctx.session_vo) {
      leg.local = true;
      out.legs.push_back(std::move(leg));
      continue;
    }
    try {
      auto cred = ctx.credential_source(vo);
      if (!cred) {
        leg.predetermined = resultset::LegStatus::kUnreachable;
        out.legs.push_back(std::move(leg));
        continue;
      }
      leg.credential = *cred;
      out.legs.push_back(std::move(leg));
    } catch (const Error& e) {
      if (util::starts_with(e.code(), "Denied")) {
        out.denied_vos.push_back(vo);
      } else {
        throw;
      }
    }
  }
  return out;
}

resultset::ResultSet execute_plan(const FederationPlan& plan_, const LegRunner& runner) {
  std::vector<std::pair<std::string, std::vector<resultset::Row>>> per_vo;
  std::map<std::string, resultset::LegStatus> statuses;
  std::map<std::string, std::string> guid_owner;
  for (const auto& vo : plan_.denied_vos) {
    statuses[vo] = resultset::LegStatus::kDenied;
  }
  for (const auto& leg : plan_.legs) {
    if (leg.predetermined) {
      statuses[leg.target_vo] = *leg.predetermined;
      continue;
    }
    LegOutcome outcome = runner(leg);
    statuses[leg.target_vo] = outcome.status;
    if (outcome.status == resultset::LegStatus::kOk) {
      for (const auto& row : outcome.rows) {
        // Rows report their owner VO as origin; remember it for dedup.
        guid_owner.emplace(row.guid, row.origin_vo);
      }
      per_vo.emplace_back(leg.target_vo, std::move(outcome.rows));
    }
  }
  return resultset::merge_rows(std::move(per_vo), statuses, guid_owner);
}

}  // namespace mg::queryfed
