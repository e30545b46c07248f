#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mg/catalog.hpp"
#include "mg/fedvo.hpp"
#include "mg/resultset.hpp"

// Clinical query language over six attributes (patient_age, laterality,
// view, study_date, site, modality), its translation into catalogue
// predicates, federation planning across VOs, and result merging.
namespace mg::queryfed {

enum class AttrType { kInt, kText, kDate };

struct ClinicalAttr {
  const char* name;
  AttrType type;
};

const std::vector<ClinicalAttr>& clinical_vocabulary();

// --- AST ------------------------------------------------------------------

struct AstNode;
using AstPtr = std::shared_ptr<const AstNode>;

using Literal = std::variant<std::int64_t, std::string>;  // ints, strings/dates

struct AstComparison {
  std::string attr;
  catalog::CmpOp op;  // =, !=, <, <=, >, >= (no CONTAINS in the grammar)
  Literal literal;
};

struct AstNode {
  enum class Kind { kCompare, kAnd, kOr, kNot } kind;
  AstComparison cmp;
  std::vector<AstPtr> children;
};

struct QueryAst {
  AstPtr root;
};

// Recursive-descent parser for:
//   query := expr ; expr := term {("AND"|"OR") term} ;
//   term := ["NOT"] (comparison | "(" expr ")") ;
//   comparison := attr op literal ;
//   literal := integer | quoted string | date "YYYY-MM-DD"
// Errors: SyntaxError(position), UnknownAttribute, TypeError.
QueryAst parse_query(const std::string& text);

// Semantics-preserving rewrite into catalogue predicates: patient_age
// becomes a birth_year bound (age = query_year - birth_year); every other
// attribute maps 1:1.
catalog::CatalogQuery translate(const QueryAst& ast, int query_year);

// --- Planning / execution ----------------------------------------------------

struct PlanLeg {
  std::string target_vo;
  catalog::CatalogQuery query;
  // Empty for LOCAL legs; otherwise the encoded CrossVOCredential.
  std::string credential;
  bool local = false;
  // Legs that failed at planning (e.g. credential service unreachable)
  // carry their final status here and are not executed.
  std::optional<resultset::LegStatus> predetermined;
};

struct FederationPlan {
  std::string origin_vo;
  std::vector<PlanLeg> legs;
  // VOs skipped for lack of trust, recorded DENIED at merge.
  std::vector<std::string> denied_vos;
};

struct PlanContext {
  const fedvo::Topology* topology = nullptr;
  const fedvo::VoRegistry* registry = nullptr;
  std::string session_principal;  // empty = not authenticated
  std::string session_vo;
  int query_year = 0;
  // Obtains a credential for (target_vo, permission, scope); returns
  // nullopt when the credential service is unreachable. Throws
  // Error("Denied(...)") when authorization fails.
  std::function<std::optional<std::string>(const std::string& target_vo)>
      credential_source;
};

FederationPlan plan(const QueryAst& ast, const PlanContext& ctx);

struct LegOutcome {
  resultset::LegStatus status = resultset::LegStatus::kOk;
  std::vector<resultset::Row> rows;
};

using LegRunner = std::function<LegOutcome(const PlanLeg&)>;

// Runs every leg (failures degrade to per-leg status), merges rows with
// guid dedup favoring the owner VO, sorts by (origin_vo, lfn).
resultset::ResultSet execute_plan(const FederationPlan& plan_, const LegRunner& runner);

}  // namespace mg::queryfed
