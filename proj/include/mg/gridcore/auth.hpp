#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mg/crypto.hpp"
#include "mg/error.hpp"
#include "mg/gridcore/audit.hpp"
#include "mg/wire.hpp"

// Authentication, the portal/interface factory, and session bookkeeping.
// The login flow mirrors the ten-step message sequence: steps 1..6 here,
// steps 7..10 in the portal dispatch path.
namespace mg::gridcore {

enum class CredMechanism { kPwd, kHostCert, kToken };

struct Credentials {
  std::string principal;  // "user@vo"
  CredMechanism mechanism = CredMechanism::kPwd;
  std::string secret;     // password, host id, or session token
};

struct Endpoint {
  std::string node_id;
  std::string service_name;
  std::string instance_id;  // "<principal>/<n>" so users never collide

  std::string to_string() const {
    return node_id + "/" + service_name + "/" + instance_id;
  }
};

struct SessionToken {
  std::string token;  // 32 random bytes, hex
  std::string principal;
  std::int64_t issued_at = 0;
  std::int64_t expires_at = 0;
  Endpoint portal;
};

struct Session {
  std::string session_id;  // audit correlation ("s<n>")
  SessionToken token;
  std::string user;  // principal before '@'
  std::string vo;
  Endpoint interface_endpoint;
  Endpoint portal_endpoint;
};

class AuthService {
 public:
  AuthService(std::string node_id, std::string node_vo, AuditLog& audit,
              crypto::Rng& rng, const wire::Keyring& keyring);

  void set_session_ttl(std::int64_t seconds) { session_ttl_ = seconds; }
  void set_max_portals_per_user(std::size_t n) { max_portals_per_user_ = n; }

  void add_user(const std::string& principal, const std::string& password);
  bool known_user(const std::string& principal) const;

  // Fig-3 steps 1..6. Errors: BadCredentials, UnknownVO, Expired.
  SessionToken authenticate(const Credentials& creds, std::int64_t now);

  // Step-2 helper exposed for the factory contract; callable only from
  // authenticate (kept private in spirit, public for tests of the limit).
  Endpoint factory_create_portal(const std::string& principal, std::int64_t now);
  Endpoint factory_create_interface(const std::string& principal, std::int64_t now);

  // Session lookup for dispatch; errors: SessionExpired.
  const Session& session_for(const std::string& token, std::int64_t now) const;
  const Session* try_session(const std::string& token, std::int64_t now) const;

  std::size_t live_portals(const std::string& principal, std::int64_t now) const;
  std::size_t live_session_count(std::int64_t now) const;

 private:
  Endpoint create_instance(const std::string& service, const std::string& principal,
                           std::int64_t now);

  std::string node_id_;
  std::string node_vo_;
  AuditLog& audit_;
  crypto::Rng& rng_;
  const wire::Keyring& keyring_;
  std::int64_t session_ttl_ = 30 * 60;
  std::size_t max_portals_per_user_ = 8;

  struct StoredUser {
    std::string salt_hex;
    std::string password_hash;  // sha256(salt || password) hex
  };
  std::map<std::string, StoredUser> users_;
  std::map<std::string, Session> sessions_;  // by token
  std::map<std::string, std::uint64_t> instance_counters_;   // per principal+service
  struct Instance {
    Endpoint endpoint;
    std::int64_t expires_at;
  };
  std::vector<Instance> portal_instances_;
  std::uint64_t next_session_number_ = 1;
};

}  // namespace mg::gridcore
