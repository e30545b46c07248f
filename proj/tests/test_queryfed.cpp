#include <doctest.h>

#include <random>

#include "mg/queryfed.hpp"

using namespace mg;
using namespace mg::queryfed;

namespace {

#define CHECK_FAILS_WITH(expr, expected_code)          \
  do {                                                 \
    try {                                              \
      (void)(expr);                                    \
      FAIL("expected " expected_code ", none thrown"); \
    } catch (const Error& e) {                         \
      CHECK(e.code() == std::string(expected_code));   \
    }                                                  \
  } while (0)

}  // namespace

TEST_CASE("parse builds the documented AST shape") {
  QueryAst ast = parse_query("laterality = \"L\" AND patient_age >= 50");
  REQUIRE(ast.root->kind == AstNode::Kind::kAnd);
  REQUIRE(ast.root->children.size() == 2);
  const AstNode& left = *ast.root->children[0];
  const AstNode& right = *ast.root->children[1];
  CHECK(left.kind == AstNode::Kind::kCompare);
  CHECK(left.cmp.attr == "laterality");
  CHECK(left.cmp.op == catalog::CmpOp::kEq);
  CHECK(std::get<std::string>(left.cmp.literal) == "L");
  CHECK(right.cmp.attr == "patient_age");
  CHECK(right.cmp.op == catalog::CmpOp::kGe);
  CHECK(std::get<std::int64_t>(right.cmp.literal) == 50);
}

TEST_CASE("parse failure modes carry positions and codes") {
  try {
    parse_query("");
    FAIL("expected SyntaxError");
  } catch (const Error& e) {
    CHECK(e.code() == "SyntaxError");
    CHECK(std::string(e.what()).find("position 0") != std::string::npos);
  }
  CHECK_FAILS_WITH(parse_query("height > 3"), "UnknownAttribute");
  CHECK_FAILS_WITH(parse_query("patient_age >= \"old\""), "TypeError");
  CHECK_FAILS_WITH(parse_query("laterality = L"), "TypeError");
  CHECK_FAILS_WITH(parse_query("study_date = 42"), "TypeError");
  CHECK_FAILS_WITH(parse_query("laterality = \"L\" AND"), "SyntaxError");
  CHECK_FAILS_WITH(parse_query("(laterality = \"L\""), "SyntaxError");
  CHECK_FAILS_WITH(parse_query("laterality = \"L\" garbage"), "SyntaxError");
}

TEST_CASE("grammar covers NOT, parentheses and dates") {
  QueryAst ast = parse_query(
      "NOT (site = \"udine\" OR study_date < 2004-01-15) AND modality = \"MG\"");
  REQUIRE(ast.root->kind == AstNode::Kind::kAnd);
  CHECK(ast.root->children[0]->kind == AstNode::Kind::kNot);
  const AstNode& inner = *ast.root->children[0]->children[0];
  CHECK(inner.kind == AstNode::Kind::kOr);
  CHECK(std::get<std::string>(inner.children[1]->cmp.literal) == "2004-01-15");
}

namespace {

// Independent age-semantics oracle: evaluate the ORIGINAL ast over a
// record carrying birth_year, computing age = query_year - birth_year.
bool ast_eval(const AstPtr& node, const std::map<std::string, catalog::AttrValue>& rec,
              int query_year) {
  switch (node->kind) {
    case AstNode::Kind::kAnd:
      return ast_eval(node->children[0], rec, query_year) &&
             ast_eval(node->children[1], rec, query_year);
    case AstNode::Kind::kOr:
      return ast_eval(node->children[0], rec, query_year) ||
             ast_eval(node->children[1], rec, query_year);
    case AstNode::Kind::kNot:
      return !ast_eval(node->children[0], rec, query_year);
    case AstNode::Kind::kCompare:
      break;
  }
  const AstComparison& cmp = node->cmp;
  std::string attr = cmp.attr;
  std::int64_t lhs_num = 0;
  std::string lhs_text;
  bool numeric = false;
  if (attr == "patient_age") {
    auto it = rec.find("birth_year");
    if (it == rec.end()) return false;
    lhs_num = query_year - std::get<std::int64_t>(it->second);
    numeric = true;
  } else {
    auto it = rec.find(attr);
    if (it == rec.end()) return false;
    if (std::holds_alternative<std::int64_t>(it->second)) {
      lhs_num = std::get<std::int64_t>(it->second);
      numeric = true;
    } else {
      lhs_text = std::get<std::string>(it->second);
    }
  }
  int c;
  if (numeric) {
    std::int64_t rhs = std::get<std::int64_t>(cmp.literal);
    c = lhs_num < rhs ? -1 : (lhs_num == rhs ? 0 : 1);
  } else {
    const std::string& rhs = std::get<std::string>(cmp.literal);
    c = lhs_text < rhs ? -1 : (lhs_text == rhs ? 0 : 1);
  }
  switch (cmp.op) {
    case catalog::CmpOp::kEq: return c == 0;
    case catalog::CmpOp::kNe: return c != 0;
    case catalog::CmpOp::kLt: return c < 0;
    case catalog::CmpOp::kLe: return c <= 0;
    case catalog::CmpOp::kGt: return c > 0;
    case catalog::CmpOp::kGe: return c >= 0;
    default: return false;
  }
}

}  // namespace

TEST_CASE("age translation: patient_age >= 50 in 2004 becomes birth_year <= 1954") {
  QueryAst ast = parse_query("patient_age >= 50");
  catalog::CatalogQuery q = translate(ast, 2004);
  REQUIRE(q.root->kind == catalog::Predicate::Kind::kCompare);
  CHECK(q.root->cmp.attr == "birth_year");
  CHECK(q.root->cmp.op == catalog::CmpOp::kLe);
  CHECK(std::get<std::int64_t>(q.root->cmp.literal) == 1954);
}

TEST_CASE("translation preserves semantics for every operator and year") {
  const char* ops[] = {"=", "!=", "<", "<=", ">", ">="};
  for (const char* op : ops) {
    for (int age : {0, 30, 50, 74}) {
      QueryAst ast = parse_query("patient_age " + std::string(op) + " " + std::to_string(age));
      catalog::CatalogQuery q = translate(ast, 2004);
      for (std::int64_t birth_year = 1920; birth_year <= 2010; ++birth_year) {
        std::map<std::string, catalog::AttrValue> rec{{"birth_year", birth_year}};
        CHECK(catalog::eval_predicate(q.root, rec) == ast_eval(ast.root, rec, 2004));
      }
    }
  }
}

TEST_CASE("non-age attributes map one to one and NOT distributes unchanged") {
  catalog::CatalogQuery q = translate(parse_query("laterality = \"L\""), 2004);
  CHECK(q.render() == "(= laterality \"L\")");

  catalog::CatalogQuery q2 = translate(parse_query("NOT laterality = \"L\""), 2004);
  CHECK(q2.render() == "(NOT (= laterality \"L\"))");

  catalog::CatalogQuery q3 =
      translate(parse_query("site = \"udine\" OR modality != \"MG\""), 2004);
  CHECK(q3.render() == "(OR (= site \"udine\") (!= modality \"MG\"))");
}

TEST_CASE("randomized translation equivalence over full records") {
  std::mt19937_64 rng(8080);
  std::uniform_int_distribution<int> year(1930, 1990);
  std::uniform_int_distribution<int> coin(0, 1);
  const char* queries[] = {
      "patient_age >= 50 AND laterality = \"L\"",
      "NOT patient_age < 40",
      "(patient_age > 30 AND patient_age < 70) OR site = \"udine\"",
      "modality = \"MG\" AND NOT (laterality = \"R\" OR patient_age <= 45)",
      "study_date >= 2004-01-10 AND patient_age != 55",
  };
  for (const char* text : queries) {
    QueryAst ast = parse_query(text);
    catalog::CatalogQuery q = translate(ast, 2004);
    for (int i = 0; i < 200; ++i) {
      std::map<std::string, catalog::AttrValue> rec;
      rec["birth_year"] = static_cast<std::int64_t>(year(rng));
      rec["laterality"] = std::string(coin(rng) ? "L" : "R");
      rec["site"] = std::string(coin(rng) ? "udine" : "oxford");
      rec["modality"] = std::string(coin(rng) ? "MG" : "CT");
      char buf[16];
      std::snprintf(buf, sizeof buf, "2004-01-%02d", 1 + i % 28);
      rec["study_date"] = std::string(buf);
      CHECK(catalog::eval_predicate(q.root, rec) == ast_eval(ast.root, rec, 2004));
    }
  }
}

namespace {

PlanContext make_ctx(const fedvo::Topology& topology, const fedvo::VoRegistry& registry,
                     std::function<std::optional<std::string>(const std::string&)> source) {
  PlanContext ctx;
  ctx.topology = &topology;
  ctx.registry = &registry;
  ctx.session_principal = "rossi@udine-vo";
  ctx.session_vo = "udine-vo";
  ctx.query_year = 2004;
  ctx.credential_source = std::move(source);
  return ctx;
}

}  // namespace

TEST_CASE("planning requires an authenticated session") {
  fedvo::Topology t;
  t.mode = fedvo::Mode::kP1;
  t.vo_names = {"mammogrid"};
  fedvo::VoRegistry reg;
  PlanContext ctx = make_ctx(t, reg, nullptr);
  ctx.session_principal.clear();
  CHECK_FAILS_WITH(plan(parse_query("patient_age > 1"), ctx), "NotAuthenticated");
}

TEST_CASE("P1 plans exactly one leg") {
  fedvo::Topology t;
  t.mode = fedvo::Mode::kP1;
  t.vo_names = {"mammogrid"};
  fedvo::VoRegistry reg;
  FederationPlan p = plan(parse_query("laterality = \"L\""),
                          make_ctx(t, reg, nullptr));
  REQUIRE(p.legs.size() == 1);
  CHECK(p.legs[0].local);
  CHECK(p.legs[0].target_vo == "mammogrid");
}

TEST_CASE("P2 with three hospital VOs and full trust plans three legs") {
  fedvo::Topology t;
  t.mode = fedvo::Mode::kP2;
  t.vo_names = {"udine-vo", "cambridge-vo", "oxford-vo", "mgcentral"};
  t.central_vo = "mgcentral";
  fedvo::VoRegistry reg;

  FederationPlan p = plan(parse_query("laterality = \"L\""),
                          make_ctx(t, reg, [](const std::string& vo) {
                            return std::optional<std::string>("cred-for-" + vo);
                          }));
  REQUIRE(p.legs.size() == 3);  // central VO is never a data target
  int locals = 0;
  for (const auto& leg : p.legs) {
    if (leg.local) {
      ++locals;
      CHECK(leg.target_vo == "udine-vo");
      CHECK(leg.credential.empty());
    } else {
      CHECK(leg.credential == "cred-for-" + leg.target_vo);
    }
  }
  CHECK(locals == 1);
  CHECK(p.denied_vos.empty());
}

TEST_CASE("revoked trust drops the leg and records DENIED at merge") {
  fedvo::Topology t;
  t.mode = fedvo::Mode::kP2;
  t.vo_names = {"udine-vo", "cambridge-vo", "oxford-vo", "mgcentral"};
  t.central_vo = "mgcentral";
  fedvo::VoRegistry reg;

  FederationPlan p = plan(
      parse_query("laterality = \"L\""),
      make_ctx(t, reg, [](const std::string& vo) -> std::optional<std::string> {
        if (vo == "cambridge-vo") fail("Denied(target)", "trust revoked");
        return "cred-for-" + vo;
      }));
  CHECK(p.legs.size() == 2);
  REQUIRE(p.denied_vos.size() == 1);
  CHECK(p.denied_vos[0] == "cambridge-vo");

  resultset::ResultSet rs = execute_plan(p, [](const PlanLeg& leg) {
    LegOutcome out;
    out.rows.push_back({"g-" + leg.target_vo, leg.target_vo, "/mg/x/" + leg.target_vo, {}});
    return out;
  });
  CHECK(rs.vo_status.at("cambridge-vo") == resultset::LegStatus::kDenied);
  CHECK(rs.rows.size() == 2);
}

TEST_CASE("execute_plan merges, dedupes by guid and degrades per leg") {
  FederationPlan p;
  p.origin_vo = "udine-vo";
  for (const char* vo : {"udine-vo", "cambridge-vo", "oxford-vo"}) {
    PlanLeg leg;
    leg.target_vo = vo;
    p.legs.push_back(leg);
  }

  SUBCASE("all legs empty") {
    resultset::ResultSet rs = execute_plan(p, [](const PlanLeg&) { return LegOutcome{}; });
    CHECK(rs.rows.empty());
    for (const auto& [vo, status] : rs.vo_status) {
      CHECK(status == resultset::LegStatus::kOk);
    }
  }
  SUBCASE("duplicate guid keeps the owner VO's row") {
    resultset::ResultSet rs = execute_plan(p, [](const PlanLeg& leg) {
      LegOutcome out;
      // A study owned by cambridge is replicated at every VO; rows always
      // report the owner as origin.
      out.rows.push_back({"g-shared", "cambridge-vo", "/mg/cambridge/img", {}});
      out.rows.push_back({"g-" + leg.target_vo, leg.target_vo, "/mg/own/" + leg.target_vo, {}});
      return out;
    });
    CHECK(rs.rows.size() == 4);
    int shared = 0;
    for (const auto& row : rs.rows) {
      if (row.guid == "g-shared") {
        ++shared;
        CHECK(row.origin_vo == "cambridge-vo");
      }
    }
    CHECK(shared == 1);
    // Sorted by (origin_vo, lfn).
    for (std::size_t i = 1; i < rs.rows.size(); ++i) {
      CHECK(std::tie(rs.rows[i - 1].origin_vo, rs.rows[i - 1].lfn) <=
            std::tie(rs.rows[i].origin_vo, rs.rows[i].lfn));
    }
  }
  SUBCASE("unreachable legs degrade while others return rows") {
    resultset::ResultSet rs = execute_plan(p, [](const PlanLeg& leg) {
      LegOutcome out;
      if (leg.target_vo == "oxford-vo") {
        out.status = resultset::LegStatus::kUnreachable;
        return out;
      }
      out.rows.push_back({"g-" + leg.target_vo, leg.target_vo, "/mg/x", {}});
      return out;
    });
    CHECK(rs.vo_status.at("oxford-vo") == resultset::LegStatus::kUnreachable);
    CHECK(rs.rows.size() == 2);
  }
}
