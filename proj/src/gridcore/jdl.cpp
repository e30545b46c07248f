#include "mg/gridcore/jdl.hpp"

#include <algorithm>
#include <cctype>

#include "mg/util.hpp"

namespace mg::gridcore {

namespace {

// Attribute model the Requirements grammar may reference.
enum class AdAttrKind { kText, kNumber, kStringSet };

struct AdAttr {
  const char* name;
  AdAttrKind kind;
};

const std::vector<AdAttr>& ad_attrs() {
  static const std::vector<AdAttr> attrs = {
      {"ce_id", AdAttrKind::kText},        {"site", AdAttrKind::kText},
      {"vo", AdAttrKind::kText},           {"max_running", AdAttrKind::kNumber},
      {"queue_length", AdAttrKind::kNumber}, {"packages", AdAttrKind::kStringSet},
      {"local_se", AdAttrKind::kText},
  };
  return attrs;
}

const AdAttr* ad_attr(const std::string& name) {
  for (const auto& a : ad_attrs()) {
    if (name == a.name) return &a;
  }
  return nullptr;
}

struct ReqToken {
  enum class Kind { kWord, kOp, kNumber, kString, kLParen, kRParen, kEnd } kind;
  std::string text;
  long number = 0;
};

struct ReqLexer {
  const std::string& src;
  std::size_t pos = 0;

  ReqToken next() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    if (pos >= src.size()) return {ReqToken::Kind::kEnd, ""};
    char c = src[pos];
    if (c == '(') { ++pos; return {ReqToken::Kind::kLParen, "("}; }
    if (c == ')') { ++pos; return {ReqToken::Kind::kRParen, ")"}; }
    if (c == '"') {
      ++pos;
      std::string text;
      while (pos < src.size() && src[pos] != '"') text.push_back(src[pos++]);
      if (pos >= src.size()) fail("MalformedRequirements", "unterminated string");
      ++pos;
      return {ReqToken::Kind::kString, std::move(text)};
    }
    if (c == '=') { ++pos; return {ReqToken::Kind::kOp, "="}; }
    if (c == '!' && pos + 1 < src.size() && src[pos + 1] == '=') {
      pos += 2;
      return {ReqToken::Kind::kOp, "!="};
    }
    if (c == '<' || c == '>') { ++pos; return {ReqToken::Kind::kOp, std::string(1, c)}; }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos;
      while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) ++pos;
      std::string text = src.substr(start, pos - start);
      return {ReqToken::Kind::kNumber, text, std::stol(text)};
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos;
      while (pos < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_')) {
        ++pos;
      }
      return {ReqToken::Kind::kWord, src.substr(start, pos - start)};
    }
    fail("MalformedRequirements", std::string("unexpected character '") + c + "'");
  }
};

ReqExprPtr make_node(ReqExpr node) {
  return std::make_shared<ReqExpr>(std::move(node));
}

struct ReqParser {
  ReqLexer lexer;
  ReqToken current;

  explicit ReqParser(const std::string& src) : lexer{src} { current = lexer.next(); }
  void advance() { current = lexer.next(); }

  ReqExprPtr parse_expr() {
    ReqExprPtr left = parse_term();
    while (current.kind == ReqToken::Kind::kWord &&
           (current.text == "AND" || current.text == "OR")) {
      ReqExpr node;
      node.kind = current.text == "AND" ? ReqExpr::Kind::kAnd : ReqExpr::Kind::kOr;
      advance();
      node.children = {left, parse_term()};
      left = make_node(std::move(node));
    }
    return left;
  }

  ReqExprPtr parse_term() {
    if (current.kind == ReqToken::Kind::kWord && current.text == "NOT") {
      advance();
      ReqExpr node;
      node.kind = ReqExpr::Kind::kNot;
      node.children = {parse_term()};
      return make_node(std::move(node));
    }
    if (current.kind == ReqToken::Kind::kLParen) {
      advance();
      ReqExprPtr inner = parse_expr();
      if (current.kind != ReqToken::Kind::kRParen) {
        fail("MalformedRequirements", "expected ')'");
      }
      advance();
      return inner;
    }
    return parse_comparison();
  }

  ReqExprPtr parse_comparison() {
    if (current.kind != ReqToken::Kind::kWord) {
      fail("MalformedRequirements", "expected attribute name, found '" + current.text + "'");
    }
    const AdAttr* attr = ad_attr(current.text);
    if (!attr) fail("MalformedRequirements", "unknown ad attribute " + current.text);
    ReqExpr node;
    node.kind = ReqExpr::Kind::kCompare;
    node.attr = current.text;
    advance();

    if (current.kind == ReqToken::Kind::kWord && current.text == "CONTAINS") {
      node.op = "CONTAINS";
    } else if (current.kind == ReqToken::Kind::kOp) {
      node.op = current.text;
    } else {
      fail("MalformedRequirements", "expected operator after " + node.attr);
    }
    advance();

    if (current.kind == ReqToken::Kind::kNumber) {
      if (attr->kind != AdAttrKind::kNumber) {
        fail("MalformedRequirements", node.attr + " is not numeric");
      }
      node.literal_is_number = true;
      node.literal_number = current.number;
      node.literal = current.text;
    } else if (current.kind == ReqToken::Kind::kString) {
      if (attr->kind == AdAttrKind::kNumber) {
        fail("MalformedRequirements", node.attr + " requires a numeric literal");
      }
      node.literal = current.text;
    } else {
      fail("MalformedRequirements", "expected literal after operator");
    }
    if (node.op == "CONTAINS" && attr->kind != AdAttrKind::kStringSet) {
      fail("MalformedRequirements", "CONTAINS applies to packages only");
    }
    if ((node.op == "<" || node.op == ">") && attr->kind != AdAttrKind::kNumber) {
      fail("MalformedRequirements", node.op + " applies to numeric attributes only");
    }
    advance();
    return make_node(std::move(node));
  }
};

}  // namespace

ReqExprPtr parse_requirements(const std::string& text) {
  ReqParser parser(text);
  if (parser.current.kind == ReqToken::Kind::kEnd) {
    fail("MalformedRequirements", "empty requirements expression");
  }
  ReqExprPtr root = parser.parse_expr();
  if (parser.current.kind != ReqToken::Kind::kEnd) {
    fail("MalformedRequirements", "trailing input in requirements");
  }
  return root;
}

bool eval_requirements(const ReqExprPtr& expr, const ResourceAd& ad) {
  if (!expr) return true;
  switch (expr->kind) {
    case ReqExpr::Kind::kAnd:
      return eval_requirements(expr->children[0], ad) &&
             eval_requirements(expr->children[1], ad);
    case ReqExpr::Kind::kOr:
      return eval_requirements(expr->children[0], ad) ||
             eval_requirements(expr->children[1], ad);
    case ReqExpr::Kind::kNot:
      return !eval_requirements(expr->children[0], ad);
    case ReqExpr::Kind::kCompare:
      break;
  }
  const ReqExpr& e = *expr;
  if (e.attr == "packages") {
    bool present = ad.packages.count(e.literal) > 0;
    if (e.op == "CONTAINS" || e.op == "=") return present;
    if (e.op == "!=") return !present;
    return false;
  }
  if (e.literal_is_number) {
    long value = e.attr == "max_running" ? ad.max_running : ad.queue_length;
    if (e.op == "=") return value == e.literal_number;
    if (e.op == "!=") return value != e.literal_number;
    if (e.op == "<") return value < e.literal_number;
    if (e.op == ">") return value > e.literal_number;
    return false;
  }
  std::string value;
  if (e.attr == "ce_id") value = ad.ce_id;
  else if (e.attr == "site") value = ad.site;
  else if (e.attr == "vo") value = ad.vo;
  else if (e.attr == "local_se") value = ad.local_se;
  if (e.op == "=") return value == e.literal;
  if (e.op == "!=") return value != e.literal;
  return false;
}

JobDescriptor parse_jdl(const std::string& text) {
  JobDescriptor jd;
  jd.jdl_text = text;
  for (const auto& raw_line : util::split(text, '\n')) {
    std::string line = util::trim(raw_line);
    if (line.empty() || util::starts_with(line, "#")) continue;
    if (line.back() != ';') fail("MalformedJDL", "line missing ';': " + line);
    line.pop_back();
    auto eq = line.find('=');
    if (eq == std::string::npos) fail("MalformedJDL", "line missing '=': " + line);
    std::string key = util::trim(line.substr(0, eq));
    std::string value = util::trim(line.substr(eq + 1));
    auto unquote = [&](const std::string& v) {
      if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
        return v.substr(1, v.size() - 2);
      }
      return v;
    };
    if (key == "Executable") {
      jd.executable = unquote(value);
    } else if (key == "Arguments") {
      for (const auto& arg : util::split(unquote(value), ' ')) {
        if (!arg.empty()) jd.arguments.push_back(arg);
      }
    } else if (key == "InputData") {
      for (const auto& lfn : util::split(unquote(value), ',')) {
        std::string t = util::trim(lfn);
        if (!t.empty()) jd.input_data.push_back(t);
      }
    } else if (key == "Requirements") {
      jd.requirements_text = value;
      jd.requirements = parse_requirements(value);
    } else if (key == "OutputLFN") {
      jd.output_lfn = unquote(value);
    } else {
      fail("MalformedJDL", "unknown JDL key " + key);
    }
  }
  if (jd.executable.empty()) fail("MalformedJDL", "Executable is required");
  return jd;
}

std::string render_jdl(const JobDescriptor& jd) {
  std::string out = "Executable = \"" + jd.executable + "\";\n";
  if (!jd.arguments.empty()) {
    out += "Arguments = \"" + util::join(jd.arguments, " ") + "\";\n";
  }
  if (!jd.input_data.empty()) {
    out += "InputData = \"" + util::join(jd.input_data, ",") + "\";\n";
  }
  if (!jd.requirements_text.empty()) {
    out += "Requirements = " + jd.requirements_text + ";\n";
  }
  if (!jd.output_lfn.empty()) {
    out += "OutputLFN = \"" + jd.output_lfn + "\";\n";
  }
  return out;
}

}  // namespace mg::gridcore
