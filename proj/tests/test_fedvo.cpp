#include <doctest.h>

#include "mg/fedvo.hpp"

using namespace mg;
using namespace mg::fedvo;

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

Role role_with(std::initializer_list<Permission> perms) {
  Role r;
  r.name = "test-role";
  r.permissions = perms;
  return r;
}

VoRegistry two_vo_registry() {
  VoRegistry reg;
  reg.vo_create("udine-vo");
  reg.vo_create("cambridge-vo");
  reg.vo_add_site("udine-vo", "udine");
  reg.vo_add_site("cambridge-vo", "cambridge");
  reg.vo_add_user("udine-vo", "rossi@udine-vo",
                  {role_with({Permission::kReadMeta, Permission::kReadImage})});
  return reg;
}

const util::Bytes kTargetKey(32, 0x42);

}  // namespace

TEST_CASE("admin implies every permission") {
  Role admin = role_with({Permission::kAdmin});
  CHECK(admin.grants(Permission::kReadMeta));
  CHECK(admin.grants(Permission::kWrite));
  CHECK(admin.grants(Permission::kExecute));
  Role reader = role_with({Permission::kReadMeta});
  CHECK(reader.grants(Permission::kReadMeta));
  CHECK_FALSE(reader.grants(Permission::kWrite));
}

TEST_CASE("vo descriptors: duplicates and site ownership") {
  VoRegistry reg = two_vo_registry();
  CHECK_FAILS_WITH(reg.vo_create("udine-vo"), "Duplicate");
  CHECK_FAILS_WITH(reg.vo_add_site("cambridge-vo", "udine"), "SiteTaken");
  CHECK(reg.vo_of_site("udine") == std::string("udine-vo"));
  CHECK_FALSE(reg.vo_of_site("nowhere").has_value());
}

TEST_CASE("write and admin are never grantable cross-VO") {
  VoRegistry reg = two_vo_registry();
  CHECK_FAILS_WITH(
      reg.trust_grant("udine-vo", "cambridge-vo", {Permission::kWrite}, "/mg"),
      "UngrantablePermission");
  CHECK_FAILS_WITH(
      reg.trust_grant("udine-vo", "cambridge-vo", {Permission::kAdmin}, "/mg"),
      "UngrantablePermission");
  reg.trust_grant("udine-vo", "cambridge-vo", {Permission::kReadMeta}, "/mg");
  CHECK(reg.trust_between("udine-vo", "cambridge-vo") != nullptr);
  // Directional: the reverse relation does not exist.
  CHECK(reg.trust_between("cambridge-vo", "udine-vo") == nullptr);
}

TEST_CASE("trust table renders and reloads") {
  VoRegistry reg = two_vo_registry();
  reg.trust_grant("udine-vo", "cambridge-vo",
                  {Permission::kReadMeta, Permission::kReadImage}, "/mg/cambridge");
  std::string table = reg.render_trust_table();
  CHECK(table == "TRUST udine-vo cambridge-vo read-image,read-meta /mg/cambridge\n");

  VoRegistry reg2 = two_vo_registry();
  reg2.load_trust_table(table);
  const TrustRelation* rel = reg2.trust_between("udine-vo", "cambridge-vo");
  REQUIRE(rel != nullptr);
  CHECK(rel->scope == "/mg/cambridge");
  CHECK(rel->granted.count(Permission::kReadImage) == 1);
}

TEST_CASE("dual consent truth table over role x trust") {
  const std::int64_t now = 1000;
  for (bool has_role : {false, true}) {
    for (bool has_trust : {false, true}) {
      VoRegistry reg;
      reg.vo_create("origin");
      reg.vo_create("target");
      reg.vo_add_user("origin", "u@origin",
                      {role_with(has_role ? std::initializer_list<Permission>{Permission::kReadMeta}
                                          : std::initializer_list<Permission>{})});
      if (has_trust) {
        reg.trust_grant("origin", "target", {Permission::kReadMeta}, "/mg");
      }
      if (has_role && has_trust) {
        CrossVOCredential cred =
            voms_authorize(reg, "u@origin", "origin", "target", Permission::kReadMeta,
                           "/mg", kTargetKey, now, 600, "c1");
        CHECK(credential_verify(cred, kTargetKey, now + 1, Permission::kReadMeta, "/mg/x"));
      } else if (!has_role) {
        // The origin check runs first regardless of trust state.
        CHECK_FAILS_WITH(voms_authorize(reg, "u@origin", "origin", "target",
                                        Permission::kReadMeta, "/mg", kTargetKey, now, 600,
                                        "c1"),
                         "Denied(origin)");
      } else {
        CHECK_FAILS_WITH(voms_authorize(reg, "u@origin", "origin", "target",
                                        Permission::kReadMeta, "/mg", kTargetKey, now, 600,
                                        "c1"),
                         "Denied(target)");
      }
    }
  }
}

TEST_CASE("revocation blocks new credentials") {
  VoRegistry reg = two_vo_registry();
  reg.trust_grant("udine-vo", "cambridge-vo", {Permission::kReadMeta}, "/mg");
  CrossVOCredential cred =
      voms_authorize(reg, "rossi@udine-vo", "udine-vo", "cambridge-vo",
                     Permission::kReadMeta, "/mg", kTargetKey, 0, 600, "c1");
  reg.trust_revoke("udine-vo", "cambridge-vo");
  CHECK_FAILS_WITH(voms_authorize(reg, "rossi@udine-vo", "udine-vo", "cambridge-vo",
                                  Permission::kReadMeta, "/mg", kTargetKey, 1, 600, "c2"),
                   "Denied(target)");
  // Already-issued credentials survive until expiry (documented trade-off).
  CHECK(credential_verify(cred, kTargetKey, 10, Permission::kReadMeta, "/mg/x"));
}

TEST_CASE("credential verification is strict") {
  VoRegistry reg = two_vo_registry();
  reg.trust_grant("udine-vo", "cambridge-vo", {Permission::kReadMeta}, "/mg/cambridge");
  CrossVOCredential cred =
      voms_authorize(reg, "rossi@udine-vo", "udine-vo", "cambridge-vo",
                     Permission::kReadMeta, "/mg/cambridge", kTargetKey, 0, 600, "c1");

  SUBCASE("fresh credential verifies") {
    CHECK(credential_verify(cred, kTargetKey, 1, Permission::kReadMeta, "/mg/cambridge/img"));
  }
  SUBCASE("one flipped signature byte fails") {
    CrossVOCredential tampered = cred;
    tampered.signature[5] ^= 1;
    CHECK_FALSE(credential_verify(tampered, kTargetKey, 1, Permission::kReadMeta,
                                  "/mg/cambridge/img"));
  }
  SUBCASE("tampered payload fails") {
    CrossVOCredential tampered = cred;
    tampered.permissions = {Permission::kReadImage};
    CHECK_FALSE(credential_verify(tampered, kTargetKey, 1, Permission::kReadImage,
                                  "/mg/cambridge/img"));
  }
  SUBCASE("expired credential fails") {
    CHECK_FALSE(credential_verify(cred, kTargetKey, 600, Permission::kReadMeta,
                                  "/mg/cambridge/img"));
  }
  SUBCASE("scope containment") {
    CHECK_FALSE(credential_verify(cred, kTargetKey, 1, Permission::kReadMeta, "/mg/udine/img"));
    CHECK_FALSE(credential_verify(cred, kTargetKey, 1, Permission::kReadMeta,
                                  "/mg/cambridgeshire"));
  }
  SUBCASE("permission mismatch fails") {
    CHECK_FALSE(credential_verify(cred, kTargetKey, 1, Permission::kReadImage,
                                  "/mg/cambridge/img"));
  }
  SUBCASE("wire form round-trips and still verifies") {
    CrossVOCredential back = CrossVOCredential::decode(cred.encode());
    CHECK(credential_verify(back, kTargetKey, 1, Permission::kReadMeta, "/mg/cambridge/img"));
    CHECK(back.principal == "rossi@udine-vo");
    CHECK(util::starts_with(cred.encode(), "MGC1."));
  }
}

TEST_CASE("topology invariants") {
  Topology t;
  t.mode = Mode::kP1;
  t.vo_names = {"mammogrid"};
  t.validate();

  t.vo_names = {"a", "b"};
  CHECK_FAILS_WITH(t.validate(), "InvalidTopology");

  t.mode = Mode::kP2;
  t.vo_names = {"a", "b", "central"};
  t.central_vo = "central";
  t.validate();
  t.central_vo = "missing";
  CHECK_FAILS_WITH(t.validate(), "InvalidTopology");
}

TEST_CASE("supervo attach keeps the tree acyclic") {
  Topology t;
  supervo_attach(t, "root", "a");
  supervo_attach(t, "root", "b");
  supervo_attach(t, "a", "a1");
  CHECK_FAILS_WITH(supervo_attach(t, "a1", "root"), "CycleDetected");
  CHECK_FAILS_WITH(supervo_attach(t, "root", "root"), "CycleDetected");

  auto leaves = supervo_leaves(t, "root");
  CHECK(leaves == std::vector<std::string>{"a1", "b"});
  CHECK(supervo_leaves(t, "solo") == std::vector<std::string>{"solo"});
}

TEST_CASE("supervo route honors per-edge trust and merges by guid") {
  VoRegistry reg;
  for (const char* vo : {"root", "left", "right"}) reg.vo_create(vo);
  reg.trust_grant("root", "left", {Permission::kReadMeta}, "/mg");
  reg.trust_grant("root", "right", {Permission::kReadMeta}, "/mg");

  Topology t;
  supervo_attach(t, "root", "left");
  supervo_attach(t, "root", "right");

  auto executor = [](const std::string& vo)
      -> std::pair<resultset::LegStatus, std::vector<resultset::Row>> {
    std::vector<resultset::Row> rows;
    rows.push_back({"g-" + vo, vo, "/mg/" + vo + "/img", {}});
    rows.push_back({"g-shared", vo, "/mg/" + vo + "/shared", {}});
    return {resultset::LegStatus::kOk, rows};
  };

  resultset::ResultSet rs = supervo_route(t, reg, "root", "root", executor);
  CHECK(rs.rows.size() == 3);  // g-left, g-right, g-shared (deduped)
  CHECK(rs.vo_status.at("left") == resultset::LegStatus::kOk);
  CHECK(rs.vo_status.at("right") == resultset::LegStatus::kOk);

  // Revoking one edge drops exactly that VO's rows.
  reg.trust_revoke("root", "right");
  resultset::ResultSet rs2 = supervo_route(t, reg, "root", "root", executor);
  CHECK(rs2.vo_status.at("right") == resultset::LegStatus::kDenied);
  for (const auto& row : rs2.rows) CHECK(row.origin_vo != "right");

  // A single-node tree routes to the root alone (its own data, no trust
  // needed).
  Topology solo;
  resultset::ResultSet rs3 = supervo_route(solo, reg, "left", "left", executor);
  CHECK(rs3.rows.size() == 2);
}

TEST_CASE("governance audit flags only non-exempt foreign records") {
  Topology p2;
  p2.mode = Mode::kP2;

  std::vector<HostedRecord> records;
  records.push_back({"udine-vo", "udine", "udine-vo", "/mg/udine/a", "g1", false, false});
  records.push_back({"cambridge-vo", "cambridge", "udine-vo", "/mg/udine/b", "g2", false, true});
  records.push_back({"cambridge-vo", "cambridge", "udine-vo", "/mg/udine/c", "g3", false, false});

  GovernanceReport report = audit_governance(p2, records);
  REQUIRE(report.findings.size() == 2);  // own-VO rows never appear
  auto violations = report.violations();
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].record.guid == "g3");
  CHECK_FALSE(report.compliant());

  SUBCASE("P1 central mirrors are exempt") {
    Topology p1;
    p1.mode = Mode::kP1;
    std::vector<HostedRecord> mirrors;
    mirrors.push_back({"mammogrid", "cern", "other", "/mg/udine/a", "g1", true, false});
    GovernanceReport r = audit_governance(p1, mirrors);
    REQUIRE(r.findings.size() == 1);
    CHECK(r.findings[0].exempt);
    CHECK(r.compliant());
  }
}

TEST_CASE("result set text form round-trips") {
  resultset::ResultSet rs;
  rs.rows.push_back({"g1", "udine-vo", "/mg/udine/img1",
                     {{"laterality", "L"}, {"pseudonym", "PSN:aa11"}}});
  rs.rows.push_back({"g2", "oxford-vo", "/mg/oxford/x", {{"site", "ox|ford"}}});
  rs.vo_status["udine-vo"] = resultset::LegStatus::kOk;
  rs.vo_status["cambridge-vo"] = resultset::LegStatus::kUnreachable;

  std::string text = rs.render();
  CHECK(util::starts_with(text, "MGRS/1 rows=2"));
  resultset::ResultSet back = resultset::ResultSet::parse(text);
  CHECK(back.rows == rs.rows);
  CHECK(back.vo_status == rs.vo_status);
}
