#include "mg/gridcore/auth.hpp"

#include <algorithm>

#include "mg/util.hpp"

namespace mg::gridcore {

AuthService::AuthService(std::string node_id, std::string node_vo, AuditLog& audit,
                         crypto::Rng& rng, const wire::Keyring& keyring)
    : node_id_(std::move(node_id)),
      node_vo_(std::move(node_vo)),
      audit_(audit),
      rng_(rng),
      keyring_(keyring) {}

void AuthService::add_user(const std::string& principal, const std::string& password) {
  StoredUser user;
  user.salt_hex = rng_.hex(8);
  user.password_hash = crypto::sha256_hex(user.salt_hex + password);
  users_[principal] = std::move(user);
}

bool AuthService::known_user(const std::string& principal) const {
  return users_.count(principal) > 0;
}

Endpoint AuthService::create_instance(const std::string& service,
                                      const std::string& principal, std::int64_t now) {
  (void)now;
  std::uint64_t n = ++instance_counters_[principal + "|" + service];
  return Endpoint{node_id_, service, principal + "/" + std::to_string(n)};
}

Endpoint AuthService::factory_create_interface(const std::string& principal,
                                               std::int64_t now) {
  return create_instance("interface", principal, now);
}

Endpoint AuthService::factory_create_portal(const std::string& principal, std::int64_t now) {
  // Expired sessions release their portal slots lazily.
  std::size_t live = live_portals(principal, now);
  if (live >= max_portals_per_user_) {
    fail("ResourceExhausted", principal + " already holds " + std::to_string(live) +
                                  " portal instances (max " +
                                  std::to_string(max_portals_per_user_) + ")");
  }
  Endpoint ep = create_instance("portal", principal, now);
  portal_instances_.push_back({ep, now + session_ttl_});
  return ep;
}

std::size_t AuthService::live_portals(const std::string& principal, std::int64_t now) const {
  return static_cast<std::size_t>(std::count_if(
      portal_instances_.begin(), portal_instances_.end(), [&](const Instance& inst) {
        return inst.expires_at > now &&
               util::starts_with(inst.endpoint.instance_id, principal + "/");
      }));
}

std::size_t AuthService::live_session_count(std::int64_t now) const {
  return static_cast<std::size_t>(
      std::count_if(sessions_.begin(), sessions_.end(), [&](const auto& kv) {
        return kv.second.token.expires_at > now;
      }));
}

SessionToken AuthService::authenticate(const Credentials& creds, std::int64_t now) {
  std::string session_id = "s" + std::to_string(next_session_number_++);
  // Step 1: client reaches the authentication module.
  audit_.record(now, 1, session_id, "auth", "connect " + creds.principal);
  // Step 2: the authentication module hands the credentials to the factory.
  audit_.record(now, 2, session_id, "factory", "verify-credentials");

  auto at = creds.principal.rfind('@');
  if (at == std::string::npos) fail("BadCredentials", "principal must be user@vo");
  std::string vo = creds.principal.substr(at + 1);
  if (vo != node_vo_) fail("UnknownVO", vo + " is not served by this grid-box");

  switch (creds.mechanism) {
    case CredMechanism::kPwd: {
      auto it = users_.find(creds.principal);
      if (it == users_.end() ||
          it->second.password_hash != crypto::sha256_hex(it->second.salt_hex + creds.secret)) {
        fail("BadCredentials", "password rejected for " + creds.principal);
      }
      break;
    }
    case CredMechanism::kHostCert: {
      if (!keyring_.secret_for(creds.secret)) {
        fail("BadCredentials", "host certificate " + creds.secret + " not enrolled");
      }
      break;
    }
    case CredMechanism::kToken: {
      auto it = sessions_.find(creds.secret);
      if (it == sessions_.end()) fail("BadCredentials", "unknown session token");
      if (it->second.token.expires_at <= now) fail("Expired", "session token expired");
      break;
    }
  }

  // Step 3: factory creates the client's interface instance.
  Endpoint interface_ep = factory_create_interface(creds.principal, now);
  audit_.record(now, 3, session_id, "factory", "interface-created " + interface_ep.to_string());
  // Step 4: interface URL returns to the authentication module.
  audit_.record(now, 4, session_id, "auth", "interface-url " + interface_ep.to_string());
  // Step 5: the authentication module creates the portal instance.
  Endpoint portal_ep = factory_create_portal(creds.principal, now);
  audit_.record(now, 5, session_id, "auth", "portal-created " + portal_ep.to_string());

  SessionToken token;
  token.token = rng_.hex(32);
  token.principal = creds.principal;
  token.issued_at = now;
  token.expires_at = now + session_ttl_;
  token.portal = portal_ep;

  Session session;
  session.session_id = session_id;
  session.token = token;
  session.user = creds.principal.substr(0, at);
  session.vo = vo;
  session.interface_endpoint = interface_ep;
  session.portal_endpoint = portal_ep;
  sessions_[token.token] = session;

  // Step 6: the portal URL goes back to the client.
  audit_.record(now, 6, session_id, "portal", "portal-url " + portal_ep.to_string());
  return token;
}

const Session& AuthService::session_for(const std::string& token, std::int64_t now) const {
  const Session* s = try_session(token, now);
  if (!s) fail("SessionExpired", "token not valid");
  return *s;
}

const Session* AuthService::try_session(const std::string& token, std::int64_t now) const {
  auto it = sessions_.find(token);
  if (it == sessions_.end()) return nullptr;
  if (it->second.token.expires_at <= now) return nullptr;
  return &it->second;
}

}  // namespace mg::gridcore
