#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "mg/error.hpp"

// JDL dialect: `key = value;` lines with a boolean Requirements expression
// over resource-advertisement attributes (ops =, !=, <, >, CONTAINS,
// AND, OR, NOT).
namespace mg::gridcore {

struct ResourceAd {
  std::string ce_id;
  std::string site;
  std::string vo;
  int max_running = 1;
  int queue_length = 0;
  std::set<std::string> packages;
  std::string local_se;
};

// Requirements expression tree.
struct ReqExpr;
using ReqExprPtr = std::shared_ptr<const ReqExpr>;

struct ReqExpr {
  enum class Kind { kCompare, kAnd, kOr, kNot } kind;
  // kCompare: attr op literal
  std::string attr;
  std::string op;  // "=", "!=", "<", ">", "CONTAINS"
  std::string literal;
  bool literal_is_number = false;
  long literal_number = 0;
  std::vector<ReqExprPtr> children;
};

// Throws MalformedRequirements on syntax errors or unknown attributes.
ReqExprPtr parse_requirements(const std::string& text);
bool eval_requirements(const ReqExprPtr& expr, const ResourceAd& ad);

struct JobDescriptor {
  std::string jdl_text;
  std::string executable;
  std::vector<std::string> arguments;
  std::vector<std::string> input_data;  // logical names
  std::string requirements_text;
  ReqExprPtr requirements;
  std::string output_lfn;
};

// Parses the `key = value;` JDL form. Recognized keys: Executable,
// Arguments, InputData (comma-separated lfns), Requirements, OutputLFN.
// Throws MalformedJDL.
JobDescriptor parse_jdl(const std::string& text);

std::string render_jdl(const JobDescriptor& jd);

}  // namespace mg::gridcore
