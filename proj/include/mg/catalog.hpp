#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "mg/error.hpp"
#include "mg/util.hpp"

// Virtual file catalogue: a hierarchical logical namespace mapping logical
// file names to replica sets, with directory-attached metadata schemas and
// a predicate query engine. One instance per grid-box; single writer,
// mutations serialized by the owning service.
namespace mg::catalog {

// Absolute slash-separated path; segments match [A-Za-z0-9_.-]+.
bool valid_logical_name(std::string_view lfn);
std::string parent_of(std::string_view lfn);  // "/" has no parent

struct PhysicalLocation {
  std::string se_id;
  std::string object_key;

  auto operator<=>(const PhysicalLocation&) const = default;
};

enum class ColumnType { kInt, kText, kDate, kFloat };

const char* column_type_name(ColumnType t);
std::optional<ColumnType> column_type_from(std::string_view name);

struct MetadataSchema {
  std::string dir;
  std::map<std::string, ColumnType> columns;
};

// Typed attribute value. Dates are ISO "YYYY-MM-DD" strings and compare
// lexicographically.
using AttrValue = std::variant<std::int64_t, std::string, double>;

std::string attr_value_to_text(const AttrValue& v);
AttrValue parse_attr_value(ColumnType type, std::string_view text);  // throws TypeMismatch

struct VersionRecord {
  std::uint64_t size = 0;
  std::string checksum;  // SHA-256 hex
  std::vector<PhysicalLocation> replicas;
};

struct FileEntry {
  std::string guid;  // 128-bit hex
  std::string lfn;
  std::uint64_t size = 0;
  std::string checksum;
  std::string owner_vo;
  std::uint32_t version = 1;
  std::vector<PhysicalLocation> replicas;  // sorted by (se_id, object_key)
  std::map<std::string, AttrValue> attrs;
  // Prior versions stay addressable by (lfn, version).
  std::map<std::uint32_t, VersionRecord> history;
  // Provenance marks consumed by the governance audit.
  std::string mirrored_from;  // site id when this row is a P1 central mirror

  std::string render() const;  // snapshot "key=value" block
};

// --- Query predicates ------------------------------------------------------

enum class CmpOp { kEq, kNe, kLt, kLe, kGt, kGe, kContains };

const char* cmp_op_name(CmpOp op);

struct Predicate;
using PredicatePtr = std::shared_ptr<const Predicate>;

struct Comparison {
  std::string attr;
  CmpOp op;
  AttrValue literal;
};

struct Predicate {
  enum class Kind { kCompare, kAnd, kOr, kNot } kind;
  Comparison cmp;              // kCompare
  std::vector<PredicatePtr> children;  // kAnd/kOr (2+), kNot (1)
};

PredicatePtr make_compare(std::string attr, CmpOp op, AttrValue literal);
PredicatePtr make_and(std::vector<PredicatePtr> children);
PredicatePtr make_or(std::vector<PredicatePtr> children);
PredicatePtr make_not(PredicatePtr child);

struct CatalogQuery {
  PredicatePtr root;  // null means "match everything"

  std::string render() const;  // canonical prefix text form
  static CatalogQuery parse(std::string_view text);
};

// A predicate over an attribute absent from the entry evaluates false
// (never errors) as long as the schema knows the attribute.
bool eval_predicate(const PredicatePtr& p, const std::map<std::string, AttrValue>& attrs);

// --- Store -----------------------------------------------------------------

// Verifies that the bytes a location points at carry the expected digest.
// Wired to the SE layer by gridcore; tests inject a table.
using ReplicaVerifier =
    std::function<std::optional<std::string>(const PhysicalLocation&)>;

struct MutationLogLine {
  std::uint64_t seq;
  std::string line;  // full "SEQ <n> <op> <args>" text
};

class CatalogStore {
 public:
  CatalogStore();

  void set_replica_verifier(ReplicaVerifier verifier);
  // Random source for guids; injected so deployments control determinism.
  void set_guid_source(std::function<std::string()> source);

  void mkdir(const std::string& lfn);
  bool dir_exists(const std::string& lfn) const;

  // `guid` is normally drawn from the guid source; mirroring passes the
  // origin entry's guid through so both copies share identity.
  std::string register_file(const std::string& lfn, const PhysicalLocation& location,
                            std::uint64_t size, const std::string& checksum,
                            const std::string& owner_vo, const std::string& guid = "");
  void add_replica(const std::string& lfn, const PhysicalLocation& location);
  const FileEntry& lookup(const std::string& lfn) const;
  const FileEntry* try_lookup(const std::string& lfn) const;
  // Returns the version record for (lfn, version); current version included.
  VersionRecord lookup_version(const std::string& lfn, std::uint32_t version) const;

  void attach_schema(const MetadataSchema& schema);
  const MetadataSchema* governing_schema(const std::string& lfn) const;
  void set_attrs(const std::string& lfn, const std::map<std::string, std::string>& kv);
  void set_attrs_typed(const std::string& lfn, const std::map<std::string, AttrValue>& kv);

  // New content for an existing entry: version increments, prior replica
  // set is preserved in history.
  std::uint32_t update_content(const std::string& lfn, const PhysicalLocation& location,
                               std::uint64_t size, const std::string& checksum);

  void mark_mirrored(const std::string& lfn, const std::string& from_site);

  // Compensation path for failed multi-step ingests; the guid is retired.
  void erase_entry(const std::string& lfn);

  std::vector<std::string> find(const std::string& dir_prefix, const CatalogQuery& q) const;

  std::vector<const FileEntry*> entries_under(const std::string& dir_prefix) const;
  std::vector<const FileEntry*> all_entries() const;

  // Append-log of mutations ("SEQ <n> <op> <percent-encoded args>") and a
  // full-state snapshot; both line-oriented UTF-8.
  const std::vector<MutationLogLine>& mutation_log() const { return log_; }
  std::string snapshot() const;
  static CatalogStore restore(const std::string& snapshot_text);

 private:
  void log_mutation(const std::string& op, const std::vector<std::string>& args);
  FileEntry& entry_for_update(const std::string& lfn);
  void check_attr_types(const MetadataSchema& schema,
                        const std::map<std::string, AttrValue>& kv) const;

  std::set<std::string> dirs_;
  std::map<std::string, FileEntry> entries_;  // keyed by lfn, sorted
  std::map<std::string, MetadataSchema> schemas_;
  std::set<std::string> guids_;
  std::vector<MutationLogLine> log_;
  std::uint64_t next_seq_ = 1;
  ReplicaVerifier verifier_;
  std::function<std::string()> guid_source_;
};

}  // namespace mg::catalog
