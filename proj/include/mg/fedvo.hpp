#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mg/error.hpp"
#include "mg/resultset.hpp"
#include "mg/util.hpp"

// Virtual-organisation model: membership, roles, directional trust
// relations, dual-consent cross-VO credentials, P1/P2 topology modes,
// Super-VO routing and governance audits.
namespace mg::fedvo {

using util::Bytes;

enum class Permission : std::uint8_t {
  kReadMeta,
  kReadImage,
  kWrite,
  kExecute,
  kAdmin,
};

const char* permission_name(Permission p);
std::optional<Permission> permission_from(std::string_view name);

using PermissionSet = std::set<Permission>;

std::string permissions_to_text(const PermissionSet& perms);     // "perm,perm"
PermissionSet permissions_from_text(std::string_view text);

struct Role {
  std::string name;
  PermissionSet permissions;

  // admin implies every other permission.
  bool grants(Permission p) const;
};

struct VoUser {
  std::string principal;  // "user@vo"
  std::vector<Role> roles;

  bool holds(Permission p) const;
};

struct VODescriptor {
  std::string name;
  std::vector<std::string> sites;
  std::vector<VoUser> users;
  std::set<std::string> packages;
  std::vector<std::string> grid_partitions;  // config-only, no behavior
  std::string config_root;
  std::string catalogue_node;  // node hosting this VO's catalogue

  const VoUser* find_user(const std::string& principal) const;
};

struct TrustRelation {
  std::string from_vo;  // whose users may act...
  std::string to_vo;    // ...inside this VO
  PermissionSet granted;  // subset of {read-meta, read-image, execute}
  std::string scope;      // logical-name prefix

  std::string render() const;  // "TRUST <from> <to> <perm,perm> <scope>"
};

bool grantable_cross_vo(Permission p);
bool scope_contains(const std::string& scope, const std::string& path);

struct CrossVOCredential {
  std::string credential_id;
  std::string principal;
  std::string origin_vo;
  std::string target_vo;
  PermissionSet permissions;
  std::string scope;
  std::int64_t expires_at = 0;  // epoch seconds
  Bytes signature;              // HMAC under target VO's key

  // Wire form: `MGC1.<base64 payload>.<base64 mac>`; payload is the sorted
  // key=value line set.
  std::string encode() const;
  static CrossVOCredential decode(const std::string& wire);
  std::string canonical_payload() const;
};

CrossVOCredential sign_credential(CrossVOCredential cred, const Bytes& target_vo_key);

// True iff the signature verifies, the credential is unexpired at `now`,
// the permission is granted, and the path sits inside the scope.
bool credential_verify(const CrossVOCredential& cred, const Bytes& target_vo_key,
                       std::int64_t now, Permission permission, const std::string& path);

// --- VO registry + trust table ----------------------------------------------

class VoRegistry {
 public:
  void vo_create(const std::string& name);
  void vo_add_site(const std::string& vo, const std::string& site);
  void vo_add_user(const std::string& vo, const std::string& principal,
                   const std::vector<Role>& roles);
  void vo_add_package(const std::string& vo, const std::string& package);
  void vo_set_catalogue_node(const std::string& vo, const std::string& node);

  const VODescriptor& get(const std::string& vo) const;
  const VODescriptor* try_get(const std::string& vo) const;
  std::vector<std::string> vo_names() const;
  std::optional<std::string> vo_of_site(const std::string& site) const;

  void trust_grant(const std::string& from_vo, const std::string& to_vo,
                   const PermissionSet& permissions, const std::string& scope);
  void trust_revoke(const std::string& from_vo, const std::string& to_vo);
  const TrustRelation* trust_between(const std::string& from_vo,
                                     const std::string& to_vo) const;
  std::vector<TrustRelation> trust_relations() const;

  // Trust table external form: one `TRUST <from> <to> <perms> <scope>` line
  // per relation.
  std::string render_trust_table() const;
  void load_trust_table(const std::string& text);

 private:
  std::map<std::string, VODescriptor> vos_;
  std::map<std::pair<std::string, std::string>, TrustRelation> trust_;
};

// --- Dual-consent authorization (VOMS) ---------------------------------------

struct DenialInfo {
  enum class Side { kOrigin, kTarget } side;
  std::string reason;
};

// Both checks must pass: the origin VO confirms the principal's roles carry
// the permission; the target VO confirms a trust relation grants it for the
// scope. Throws Error("Denied(origin)") / Error("Denied(target)") /
// Error("UnknownVO").
CrossVOCredential voms_authorize(const VoRegistry& registry, const std::string& principal,
                                 const std::string& origin_vo, const std::string& target_vo,
                                 Permission permission, const std::string& scope,
                                 const Bytes& target_vo_key, std::int64_t now,
                                 std::int64_t ttl_seconds, const std::string& credential_id);

// --- Topology -----------------------------------------------------------------

enum class Mode { kP1, kP2 };

const char* mode_name(Mode m);

struct ForeignGridAdapter {
  std::string grid_id;
  std::string presented_ce_id;
  std::string presented_se_id;
  std::string site;
  std::string vo;  // the VO that federated with this grid
  std::set<std::string> packages;
  int max_running = 4;
};

struct Topology {
  Mode mode = Mode::kP1;
  std::string central_vo;
  std::vector<std::string> vo_names;
  std::map<std::string, std::vector<std::string>> supervo_children;
  std::vector<ForeignGridAdapter> foreign_grids;

  void validate() const;  // throws InvalidTopology
};

// Super-VO tree helpers. Attach keeps the tree acyclic.
void supervo_attach(Topology& topology, const std::string& parent_vo,
                    const std::string& child_vo);
std::vector<std::string> supervo_leaves(const Topology& topology, const std::string& root);

// Fans a query to every leaf VO reachable from `root` honoring per-edge
// trust (querying_vo must hold read-meta trust into each child edge's VO),
// then merges per federated-query semantics. The executor runs the query
// at one VO and returns its rows.
using LegExecutor = std::function<std::pair<resultset::LegStatus, std::vector<resultset::Row>>(
    const std::string& target_vo)>;

resultset::ResultSet supervo_route(const Topology& topology, const VoRegistry& registry,
                                   const std::string& root, const std::string& querying_vo,
                                   const LegExecutor& executor);

// --- Governance audit -----------------------------------------------------------

// One hosted patient record (catalogue entry or SE replica) as seen by the
// audit scan.
struct HostedRecord {
  std::string hosting_vo;
  std::string hosting_node;
  std::string owner_vo;
  std::string lfn;
  std::string guid;
  bool is_central_mirror = false;   // created by P1 metadata mirroring
  bool via_logged_transfer = false; // replica created by a credentialed FTD transfer
};

struct GovernanceFinding {
  HostedRecord record;
  bool exempt;
  std::string reason;
};

struct GovernanceReport {
  std::vector<GovernanceFinding> findings;  // all foreign-hosted records

  std::vector<GovernanceFinding> violations() const;
  bool compliant() const { return violations().empty(); }
  std::string render() const;
};

GovernanceReport audit_governance(const Topology& topology,
                                  const std::vector<HostedRecord>& records);

}  // namespace mg::fedvo
