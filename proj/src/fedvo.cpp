#include "mg/fedvo.hpp"

#include <algorithm>

#include "mg/crypto.hpp"

namespace mg::fedvo {

const char* permission_name(Permission p) {
  switch (p) {
    case Permission::kReadMeta: return "read-meta";
    case Permission::kReadImage: return "read-image";
    case Permission::kWrite: return "write";
    case Permission::kExecute: return "execute";
    case Permission::kAdmin: return "admin";
  }
  return "?";
}

std::optional<Permission> permission_from(std::string_view name) {
  if (name == "read-meta") return Permission::kReadMeta;
  if (name == "read-image") return Permission::kReadImage;
  if (name == "write") return Permission::kWrite;
  if (name == "execute") return Permission::kExecute;
  if (name == "admin") return Permission::kAdmin;
  return std::nullopt;
}

std::string permissions_to_text(const PermissionSet& perms) {
  std::vector<std::string> names;
  for (Permission p : perms) names.push_back(permission_name(p));
  return util::join(names, ",");
}

PermissionSet permissions_from_text(std::string_view text) {
  PermissionSet out;
  for (const auto& part : util::split(text, ',')) {
    if (part.empty()) continue;
    auto p = permission_from(part);
    if (!p) fail("UnknownPermission", part);
    out.insert(*p);
  }
  return out;
}

bool Role::grants(Permission p) const {
  return permissions.count(Permission::kAdmin) > 0 || permissions.count(p) > 0;
}

bool VoUser::holds(Permission p) const {
  return std::any_of(roles.begin(), roles.end(),
                     [&](const Role& r) { return r.grants(p); });
}

const VoUser* VODescriptor::find_user(const std::string& principal) const {
  for (const auto& u : users) {
    if (u.principal == principal) return &u;
  }
  return nullptr;
}

bool grantable_cross_vo(Permission p) {
  return p == Permission::kReadMeta || p == Permission::kReadImage ||
         p == Permission::kExecute;
}

bool scope_contains(const std::string& scope, const std::string& path) {
  if (scope == "/" || scope == path) return true;
  return util::starts_with(path, scope + "/");
}

std::string TrustRelation::render() const {
  return "TRUST " + from_vo + " " + to_vo + " " + permissions_to_text(granted) + " " + scope;
}

// --- Credentials ---------------------------------------------------------

std::string CrossVOCredential::canonical_payload() const {
  // Sorted key=value lines; the MAC covers exactly these bytes.
  std::string out;
  out += "expires_at=" + std::to_string(expires_at) + "\n";
  out += "id=" + util::percent_encode(credential_id) + "\n";
  out += "origin_vo=" + util::percent_encode(origin_vo) + "\n";
  out += "permissions=" + permissions_to_text(permissions) + "\n";
  out += "principal=" + util::percent_encode(principal) + "\n";
  out += "scope=" + util::percent_encode(scope) + "\n";
  out += "target_vo=" + util::percent_encode(target_vo) + "\n";
  return out;
}

std::string CrossVOCredential::encode() const {
  return "MGC1." + util::base64_encode(canonical_payload()) + "." +
         util::base64_encode(signature);
}

CrossVOCredential CrossVOCredential::decode(const std::string& wire) {
  auto parts = util::split(wire, '.');
  if (parts.size() != 3 || parts[0] != "MGC1") fail("MalformedCredential", "bad envelope");
  auto payload = util::base64_decode(parts[1]);
  auto mac = util::base64_decode(parts[2]);
  if (!payload || !mac) fail("MalformedCredential", "bad base64");
  CrossVOCredential cred;
  cred.signature = *mac;
  for (const auto& line : util::split(util::to_string(*payload), '\n')) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) fail("MalformedCredential", "bad payload line");
    std::string key = line.substr(0, eq);
    auto value = util::percent_decode(line.substr(eq + 1));
    if (!value) fail("MalformedCredential", "bad payload encoding");
    if (key == "expires_at") cred.expires_at = std::stoll(*value);
    else if (key == "id") cred.credential_id = *value;
    else if (key == "origin_vo") cred.origin_vo = *value;
    else if (key == "permissions") cred.permissions = permissions_from_text(*value);
    else if (key == "principal") cred.principal = *value;
    else if (key == "scope") cred.scope = *value;
    else if (key == "target_vo") cred.target_vo = *value;
  }
  return cred;
}

CrossVOCredential sign_credential(CrossVOCredential cred, const Bytes& target_vo_key) {
  auto mac = crypto::hmac_sha256(target_vo_key, cred.canonical_payload());
  cred.signature.assign(mac.begin(), mac.end());
  return cred;
}

bool credential_verify(const CrossVOCredential& cred, const Bytes& target_vo_key,
                       std::int64_t now, Permission permission, const std::string& path) {
  auto expected = crypto::hmac_sha256(target_vo_key, cred.canonical_payload());
  if (cred.signature.size() != expected.size() ||
      !std::equal(expected.begin(), expected.end(), cred.signature.begin())) {
    return false;
  }
  if (now >= cred.expires_at) return false;
  if (!cred.permissions.count(permission)) return false;
  return scope_contains(cred.scope, path);
}

// --- Registry ---------------------------------------------------------------

void VoRegistry::vo_create(const std::string& name) {
  if (vos_.count(name)) fail("Duplicate", "VO exists: " + name);
  VODescriptor vo;
  vo.name = name;
  vo.config_root = "/" + name;
  vos_[name] = std::move(vo);
}

void VoRegistry::vo_add_site(const std::string& vo, const std::string& site) {
  auto existing = vo_of_site(site);
  if (existing) {
    if (*existing == vo) return;  // idempotent
    fail("SiteTaken", site + " already belongs to " + *existing);
  }
  auto it = vos_.find(vo);
  if (it == vos_.end()) fail("UnknownVO", vo);
  it->second.sites.push_back(site);
}

void VoRegistry::vo_add_user(const std::string& vo, const std::string& principal,
                             const std::vector<Role>& roles) {
  auto it = vos_.find(vo);
  if (it == vos_.end()) fail("UnknownVO", vo);
  for (auto& u : it->second.users) {
    if (u.principal == principal) {
      u.roles = roles;
      return;
    }
  }
  it->second.users.push_back(VoUser{principal, roles});
}

void VoRegistry::vo_add_package(const std::string& vo, const std::string& package) {
  auto it = vos_.find(vo);
  if (it == vos_.end()) fail("UnknownVO", vo);
  it->second.packages.insert(package);
}

void VoRegistry::vo_set_catalogue_node(const std::string& vo, const std::string& node) {
  auto it = vos_.find(vo);
  if (it == vos_.end()) fail("UnknownVO", vo);
  it->second.catalogue_node = node;
}

const VODescriptor& VoRegistry::get(const std::string& vo) const {
  auto it = vos_.find(vo);
  if (it == vos_.end()) fail("UnknownVO", vo);
  return it->second;
}

const VODescriptor* VoRegistry::try_get(const std::string& vo) const {
  auto it = vos_.find(vo);
  return it == vos_.end() ? nullptr : &it->second;
}

std::vector<std::string> VoRegistry::vo_names() const {
  std::vector<std::string> names;
  for (const auto& [name, vo] : vos_) names.push_back(name);
  return names;
}

std::optional<std::string> VoRegistry::vo_of_site(const std::string& site) const {
  for (const auto& [name, vo] : vos_) {
    if (std::find(vo.sites.begin(), vo.sites.end(), site) != vo.sites.end()) {
      return name;
    }
  }
  return std::nullopt;
}

void VoRegistry::trust_grant(const std::string& from_vo, const std::string& to_vo,
                             const PermissionSet& permissions, const std::string& scope) {
  if (!vos_.count(from_vo)) fail("UnknownVO", from_vo);
  if (!vos_.count(to_vo)) fail("UnknownVO", to_vo);
  for (Permission p : permissions) {
    if (!grantable_cross_vo(p)) {
      fail("UngrantablePermission",
           std::string(permission_name(p)) + " is never grantable cross-VO");
    }
  }
  trust_[{from_vo, to_vo}] = TrustRelation{from_vo, to_vo, permissions, scope};
}

void VoRegistry::trust_revoke(const std::string& from_vo, const std::string& to_vo) {
  trust_.erase({from_vo, to_vo});
}

const TrustRelation* VoRegistry::trust_between(const std::string& from_vo,
                                               const std::string& to_vo) const {
  auto it = trust_.find({from_vo, to_vo});
  return it == trust_.end() ? nullptr : &it->second;
}

std::vector<TrustRelation> VoRegistry::trust_relations() const {
  std::vector<TrustRelation> out;
  for (const auto& [key, rel] : trust_) out.push_back(rel);
  return out;
}

std::string VoRegistry::render_trust_table() const {
  std::string out;
  for (const auto& [key, rel] : trust_) {
    out += rel.render();
    out += '\n';
  }
  return out;
}

void VoRegistry::load_trust_table(const std::string& text) {
  for (const auto& line : util::split(text, '\n')) {
    if (line.empty()) continue;
    auto parts = util::split(line, ' ');
    if (parts.size() != 5 || parts[0] != "TRUST") fail("MalformedTrustTable", line);
    trust_grant(parts[1], parts[2], permissions_from_text(parts[3]), parts[4]);
  }
}

// --- VOMS ---------------------------------------------------------------------

CrossVOCredential voms_authorize(const VoRegistry& registry, const std::string& principal,
                                 const std::string& origin_vo, const std::string& target_vo,
                                 Permission permission, const std::string& scope,
                                 const Bytes& target_vo_key, std::int64_t now,
                                 std::int64_t ttl_seconds, const std::string& credential_id) {
  const VODescriptor& origin = registry.get(origin_vo);
  registry.get(target_vo);

  const VoUser* user = origin.find_user(principal);
  if (!user) fail("Denied(origin)", principal + " is not a member of " + origin_vo);
  if (!user->holds(permission)) {
    fail("Denied(origin)", principal + " lacks role with " + permission_name(permission));
  }

  const TrustRelation* trust = registry.trust_between(origin_vo, target_vo);
  if (!trust) {
    fail("Denied(target)", "no trust relation " + origin_vo + " -> " + target_vo);
  }
  if (!trust->granted.count(permission)) {
    fail("Denied(target)",
         "trust relation does not grant " + std::string(permission_name(permission)));
  }
  if (!scope_contains(trust->scope, scope)) {
    fail("Denied(target)", "requested scope " + scope + " outside trusted " + trust->scope);
  }

  CrossVOCredential cred;
  cred.credential_id = credential_id;
  cred.principal = principal;
  cred.origin_vo = origin_vo;
  cred.target_vo = target_vo;
  cred.permissions = {permission};
  cred.scope = scope;
  cred.expires_at = now + ttl_seconds;
  return sign_credential(std::move(cred), target_vo_key);
}

// --- Topology -------------------------------------------------------------------

const char* mode_name(Mode m) { return m == Mode::kP1 ? "P1" : "P2"; }

void Topology::validate() const {
  if (mode == Mode::kP1) {
    if (vo_names.size() != 1) {
      fail("InvalidTopology", "P1 requires exactly one VO, found " +
                                  std::to_string(vo_names.size()));
    }
  } else {
    if (vo_names.size() < 3) {
      fail("InvalidTopology", "P2 requires >=2 hospital VOs plus a central VO");
    }
    if (central_vo.empty() ||
        std::find(vo_names.begin(), vo_names.end(), central_vo) == vo_names.end()) {
      fail("InvalidTopology", "P2 requires a central VO");
    }
  }
}

namespace {

bool supervo_reaches(const Topology& t, const std::string& from, const std::string& needle) {
  if (from == needle) return true;
  auto it = t.supervo_children.find(from);
  if (it == t.supervo_children.end()) return false;
  for (const auto& child : it->second) {
    if (supervo_reaches(t, child, needle)) return true;
  }
  return false;
}

}  // namespace

void supervo_attach(Topology& topology, const std::string& parent_vo,
                    const std::string& child_vo) {
  if (supervo_reaches(topology, child_vo, parent_vo)) {
    fail("CycleDetected", child_vo + " already reaches " + parent_vo);
  }
  auto& children = topology.supervo_children[parent_vo];
  if (std::find(children.begin(), children.end(), child_vo) == children.end()) {
    children.push_back(child_vo);
  }
}

std::vector<std::string> supervo_leaves(const Topology& topology, const std::string& root) {
  auto it = topology.supervo_children.find(root);
  if (it == topology.supervo_children.end() || it->second.empty()) {
    return {root};
  }
  std::vector<std::string> out;
  for (const auto& child : it->second) {
    for (auto& leaf : supervo_leaves(topology, child)) out.push_back(std::move(leaf));
  }
  return out;
}

resultset::ResultSet supervo_route(const Topology& topology, const VoRegistry& registry,
                                   const std::string& root, const std::string& querying_vo,
                                   const LegExecutor& executor) {
  std::vector<std::pair<std::string, std::vector<resultset::Row>>> per_vo;
  std::map<std::string, resultset::LegStatus> statuses;
  for (const auto& leaf : supervo_leaves(topology, root)) {
    if (leaf != querying_vo) {
      const TrustRelation* trust = registry.trust_between(querying_vo, leaf);
      if (!trust || !trust->granted.count(Permission::kReadMeta)) {
        statuses[leaf] = resultset::LegStatus::kDenied;
        continue;
      }
    }
    auto [status, rows] = executor(leaf);
    statuses[leaf] = status;
    if (status == resultset::LegStatus::kOk) {
      per_vo.emplace_back(leaf, std::move(rows));
    }
  }
  return resultset::merge_rows(std::move(per_vo), statuses);
}

// --- Governance audit ---------------------------------------------------------

std::vector<GovernanceFinding> GovernanceReport::violations() const {
  std::vector<GovernanceFinding> out;
  for (const auto& f : findings) {
    if (!f.exempt) out.push_back(f);
  }
  return out;
}

std::string GovernanceReport::render() const {
  std::string out = "GOVERNANCE findings=" + std::to_string(findings.size()) +
                    " violations=" + std::to_string(violations().size()) + "\n";
  for (const auto& f : findings) {
    out += std::string(f.exempt ? "exempt " : "VIOLATION ") + f.record.hosting_vo + " hosts " +
           f.record.lfn + " owned by " + f.record.owner_vo + " (" + f.reason + ")\n";
  }
  return out;
}

GovernanceReport audit_governance(const Topology& topology,
                                  const std::vector<HostedRecord>& records) {
  GovernanceReport report;
  for (const auto& rec : records) {
    if (rec.owner_vo == rec.hosting_vo) continue;
    GovernanceFinding finding{rec, false, ""};
    if (topology.mode == Mode::kP1 && rec.is_central_mirror) {
      finding.exempt = true;
      finding.reason = "P1 central metadata mirror";
    } else if (rec.via_logged_transfer) {
      finding.exempt = true;
      finding.reason = "replica from logged credentialed transfer";
    } else {
      finding.reason = "foreign-hosted patient record";
    }
    report.findings.push_back(std::move(finding));
  }
  return report;
}

}  // namespace mg::fedvo
