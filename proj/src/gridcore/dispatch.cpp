// Wire-facing dispatch for a grid-box: the auth/portal/dbproxy/ftd/vos
// service surface, the portal step 7..10 flow, and the admin verbs.
#include <algorithm>

#include "mg/gridcore/gridbox.hpp"

namespace mg::gridcore {

namespace {

std::map<std::string, std::string> parse_attr_header(const std::string& joined) {
  std::map<std::string, std::string> out;
  if (joined.empty()) return out;
  for (const auto& pair : util::split(joined, ';')) {
    auto eq = pair.find('=');
    if (eq == std::string::npos) fail("MalformedPayload", "bad attrs header");
    auto k = util::percent_decode(pair.substr(0, eq));
    auto v = util::percent_decode(pair.substr(eq + 1));
    if (!k || !v) fail("MalformedPayload", "bad attrs header encoding");
    out[*k] = *v;
  }
  return out;
}

}  // namespace

wire::Payload GridBox::dbproxy_execute(const AuthContext& ctx, const wire::Payload& req) {
  const std::string& op = req.header("op");

  auto authorize_read = [&](const std::string& path) {
    switch (ctx.kind) {
      case AuthContext::Kind::kLocalSession:
        return;
      case AuthContext::Kind::kPeerNode: {
        auto vo = directory_.vo_of_node(ctx.peer_node);
        if (!vo || *vo != identity_.vo) {
          fail("NotAuthorized", "node " + ctx.peer_node + " is foreign to " + identity_.vo);
        }
        return;
      }
      case AuthContext::Kind::kCredential: {
        const auto& cred = *ctx.credential;
        if (cred.target_vo != identity_.vo) {
          fail("NotAuthorized", "credential targets " + cred.target_vo);
        }
        const util::Bytes& key = directory_.vo_keys.at(identity_.vo);
        bool ok = fedvo::credential_verify(cred, key, now(), fedvo::Permission::kReadMeta,
                                           path) ||
                  fedvo::credential_verify(cred, key, now(), fedvo::Permission::kReadImage,
                                           path);
        if (!ok) fail("NotAuthorized", "credential rejected for " + path);
        return;
      }
    }
  };
  auto authorize_write = [&] {
    // Writes never cross VO boundaries; only local sessions and same-VO
    // peers reach them.
    if (ctx.kind == AuthContext::Kind::kCredential) {
      fail("NotAuthorized", "cross-VO credentials never authorize writes");
    }
    if (ctx.kind == AuthContext::Kind::kPeerNode) {
      auto vo = directory_.vo_of_node(ctx.peer_node);
      if (!vo || *vo != identity_.vo) {
        fail("NotAuthorized", "node " + ctx.peer_node + " is foreign to " + identity_.vo);
      }
    }
  };

  if (op == "lookup") {
    const std::string& lfn = req.header("lfn");
    authorize_read(lfn);
    const catalog::FileEntry& entry = catalogue_.lookup(lfn);
    return wire::make_response(req.correlation_id, {{"guid", entry.guid}},
                               util::to_bytes(render_entry_wire(entry)));
  }
  if (op == "find") {
    const std::string& dir = req.header("dir");
    authorize_read(dir);
    catalog::CatalogQuery q = catalog::CatalogQuery::parse(req.header("q"));
    auto lfns = catalogue_.find(dir, q);
    std::vector<const catalog::FileEntry*> entries;
    entries.reserve(lfns.size());
    for (const auto& lfn : lfns) entries.push_back(&catalogue_.lookup(lfn));
    resultset::ResultSet rs;
    rs.rows = rows_for_entries(entries);
    return wire::make_response(req.correlation_id,
                               {{"rows", std::to_string(rs.rows.size())}},
                               util::to_bytes(rs.render()));
  }
  if (op == "register" || op == "mirror_register") {
    authorize_write();
    catalog::PhysicalLocation loc{req.header("se"), req.header("key")};
    std::string guid = catalogue_.register_file(
        req.header("lfn"), loc, std::stoull(req.header("size")), req.header("checksum"),
        req.header("owner_vo"), req.maybe_header("guid").value_or(""));
    if (op == "mirror_register") {
      catalogue_.mark_mirrored(req.header("lfn"), req.header("mirror_from"));
      catalogue_.set_attrs(req.header("lfn"),
                           parse_attr_header(req.maybe_header("attrs").value_or("")));
    }
    return wire::make_response(req.correlation_id, {{"guid", guid}});
  }
  if (op == "mirror_update") {
    authorize_write();
    catalog::PhysicalLocation loc{req.header("se"), req.header("key")};
    std::uint32_t version = catalogue_.update_content(
        req.header("lfn"), loc, std::stoull(req.header("size")), req.header("checksum"));
    catalogue_.set_attrs(req.header("lfn"),
                         parse_attr_header(req.maybe_header("attrs").value_or("")));
    return wire::make_response(req.correlation_id, {{"version", std::to_string(version)}});
  }
  if (op == "add_replica") {
    authorize_write();
    catalogue_.add_replica(req.header("lfn"), {req.header("se"), req.header("key")});
    return wire::make_response(req.correlation_id, {{"ok", "1"}});
  }
  if (op == "set_attrs") {
    authorize_write();
    catalogue_.set_attrs(req.header("lfn"),
                         parse_attr_header(req.maybe_header("attrs").value_or("")));
    return wire::make_response(req.correlation_id, {{"ok", "1"}});
  }
  if (op == "mkdir") {
    authorize_write();
    catalogue_.mkdir(req.header("lfn"));
    return wire::make_response(req.correlation_id, {{"ok", "1"}});
  }
  fail("NoSuchOperation", "dbproxy op " + op);
}

// --- portal ----------------------------------------------------------------------

wire::Payload GridBox::portal_dispatch(const std::string& token, const wire::Payload& request) {
  std::int64_t t = now();
  const Session* session = auth_.try_session(token, t);
  if (!session) {
    // Request reached the portal (step 7) but never crosses to the
    // middleware layer (no step 8).
    audit_.record(t, 7, "invalid", "portal", "rejected expired-or-unknown token");
    fail("SessionExpired", "token not valid");
  }
  const std::string op = request.maybe_header("miop").value_or("");
  audit_.record(t, 7, session->session_id, "portal", "request " + op);

  using Handler = std::function<wire::Payload()>;
  auto with_body = [&](std::map<std::string, std::string> headers, util::Bytes body) {
    return wire::make_response(request.correlation_id, std::move(headers), std::move(body));
  };

  Handler handler;
  if (op == "mi.add") {
    handler = [&] {
      std::string guid = mi_add(*session, request.body, request.header("lfn"));
      return with_body({{"guid", guid}}, {});
    };
  } else if (op == "mi.retrieve") {
    handler = [&] {
      std::optional<std::uint32_t> version;
      if (auto v = request.maybe_header("version")) {
        version = static_cast<std::uint32_t>(std::stoul(*v));
      }
      util::Bytes bytes = mi_retrieve(*session, request.header("lfn"), version);
      return with_body({{"size", std::to_string(bytes.size())}}, std::move(bytes));
    };
  } else if (op == "mi.update") {
    handler = [&] {
      std::uint32_t version = mi_update(*session, request.header("lfn"), request.body);
      return with_body({{"version", std::to_string(version)}}, {});
    };
  } else if (op == "mi.query") {
    handler = [&] {
      std::optional<int> year;
      if (auto y = request.maybe_header("query_year")) year = std::stoi(*y);
      resultset::ResultSet rs = mi_query(*session, request.header("q"), year);
      return with_body({{"rows", std::to_string(rs.rows.size())}},
                       util::to_bytes(rs.render()));
    };
  } else if (op == "mi.addAlgorithm") {
    handler = [&] {
      mi_add_algorithm(*session, request.header("name"), request.body,
                       request.header("checksum"));
      return with_body({{"ok", "1"}}, {});
    };
  } else if (op == "mi.executeAlgorithm") {
    handler = [&] {
      std::vector<std::string> inputs;
      for (const auto& lfn : util::split(request.header("inputs"), ',')) {
        if (!lfn.empty()) inputs.push_back(lfn);
      }
      std::string task = mi_execute_algorithm(*session, request.header("name"), inputs,
                                              request.header("output"));
      return with_body({{"task", task}}, {});
    };
  } else if (op == "job.status") {
    handler = [&] {
      const Task& task = jobmanager_status(request.header("task"));
      std::string history;
      for (const auto& h : task.history) {
        history += util::iso8601_utc(h.at);
        history += ' ';
        history += task_status_name(h.from);
        history += "->";
        history += task_status_name(h.to);
        if (!h.note.empty()) history += " " + util::percent_encode(h.note, " ");
        history += '\n';
      }
      return with_body({{"status", task_status_name(task.status)},
                        {"result", task.result_lfn}},
                       util::to_bytes(history));
    };
  } else if (op == "job.submit") {
    handler = [&] {
      std::string task = jobmanager_submit(*session, util::to_string(request.body));
      return with_body({{"task", task}}, {});
    };
  } else if (util::starts_with(op, "admin.")) {
    handler = [&] {
      std::map<std::string, std::string> args;
      for (const auto& [k, v] : request.headers) {
        if (k != "svc" && k != "op" && k != "miop" && k != "token") args[k] = v;
      }
      std::string out;
      admin_execute(*session, op.substr(6), args, &out);
      return with_body({{"ok", "1"}}, util::to_bytes(out));
    };
  } else {
    fail("NoSuchOperation", op.empty() ? "missing miop header" : op);
  }

  // Step 8: portal -> middleware interface.
  audit_.record(t, 8, session->session_id, "interface", "forward " + op);
  try {
    wire::Payload response = handler();
    audit_.record(t, 9, session->session_id, "interface", "response " + op);
    audit_.record(t, 10, session->session_id, "portal", "reply " + op);
    return response;
  } catch (const Error& e) {
    // Errors are responses too; the round trip still completes.
    audit_.record(t, 9, session->session_id, "interface", "error " + e.code());
    audit_.record(t, 10, session->session_id, "portal", "reply-error " + e.code());
    throw;
  }
}

// --- admin verbs --------------------------------------------------------------------

void GridBox::admin_execute(const Session& session, const std::string& verb,
                            const std::map<std::string, std::string>& args,
                            std::string* out) {
  if (!principal_holds(session.token.principal, fedvo::Permission::kAdmin)) {
    fail("NotAuthorized", verb + " requires the admin role");
  }
  auto arg = [&](const std::string& key) -> const std::string& {
    auto it = args.find(key);
    if (it == args.end()) fail("MalformedPayload", "missing admin arg " + key);
    return it->second;
  };

  if (verb == "vo.create") {
    directory_.registry.vo_create(arg("name"));
  } else if (verb == "site.add") {
    directory_.registry.vo_add_site(arg("vo"), arg("site"));
  } else if (verb == "user.add") {
    std::vector<fedvo::Role> roles;
    for (const auto& name : util::split(arg("roles"), ',')) {
      if (name.empty()) continue;
      fedvo::Role role;
      role.name = name;
      auto p = fedvo::permission_from(name);
      if (!p) fail("UnknownPermission", name);
      role.permissions = {*p};
      roles.push_back(std::move(role));
    }
    directory_.registry.vo_add_user(arg("vo"), arg("principal"), roles);
    if (arg("vo") == identity_.vo) {
      auth_.add_user(arg("principal"), arg("password"));
    }
  } else if (verb == "trust.grant") {
    directory_.registry.trust_grant(arg("from"), arg("to"),
                                    fedvo::permissions_from_text(arg("perms")), arg("scope"));
  } else if (verb == "trust.revoke") {
    directory_.registry.trust_revoke(arg("from"), arg("to"));
  } else if (verb == "mode.set") {
    std::size_t live = directory_.live_session_counter ? directory_.live_session_counter()
                                                       : live_sessions();
    // The switching admin's own session is inherent to issuing the command.
    if (live > 1) {
      fail("InvalidTopology", "mode switch requires quiesce; " + std::to_string(live) +
                                  " sessions live");
    }
    fedvo::Mode mode;
    if (arg("mode") == "P1") mode = fedvo::Mode::kP1;
    else if (arg("mode") == "P2") mode = fedvo::Mode::kP2;
    else fail("InvalidTopology", "unknown mode " + arg("mode"));
    fedvo::Topology candidate = directory_.topology;
    candidate.mode = mode;
    candidate.validate();
    directory_.topology = candidate;
  } else if (verb == "audit") {
    if (!directory_.governance_scan) fail("NoSuchOperation", "governance scan not wired");
    auto report = fedvo::audit_governance(directory_.topology, directory_.governance_scan());
    if (out) *out = report.render();
  } else if (verb == "algo.list") {
    std::string text;
    for (const auto& alg : algorithms_.list()) {
      text += alg.name + " version=" + std::to_string(alg.version) +
              " checksum=" + alg.checksum + "\n";
    }
    if (out) *out = text;
  } else {
    fail("NoSuchOperation", "admin." + verb);
  }
}

// --- top-level wire dispatch -----------------------------------------------------------

wire::Payload GridBox::handle_request(const std::string& peer_host, const wire::Payload& req) {
  try {
    const std::string& svc = req.header("svc");
    bool peer_is_node = directory_.is_node(peer_host);
    bool peer_is_adapter = directory_.foreign_grids.count(peer_host) > 0;

    if (svc == "auth") {
      Credentials creds;
      creds.principal = req.header("user");
      const std::string& mech = req.header("mech");
      if (mech == "PWD") creds.mechanism = CredMechanism::kPwd;
      else if (mech == "HOSTCERT") creds.mechanism = CredMechanism::kHostCert;
      else if (mech == "TOKEN") creds.mechanism = CredMechanism::kToken;
      else fail("BadCredentials", "unknown mechanism " + mech);
      creds.secret = req.header("secret");
      SessionToken token = authenticate(creds);
      return wire::make_response(req.correlation_id,
                                 {{"token", token.token},
                                  {"portal", token.portal.to_string()},
                                  {"expires_at", std::to_string(token.expires_at)}});
    }
    if (svc == "portal") {
      wire::Payload rsp = portal_dispatch(req.header("token"), req);
      rsp.correlation_id = req.correlation_id;
      return rsp;
    }
    if (svc == "dbproxy") {
      AuthContext ctx;
      if (auto cred_text = req.maybe_header("credential")) {
        ctx.kind = AuthContext::Kind::kCredential;
        ctx.credential = fedvo::CrossVOCredential::decode(*cred_text);
      } else if (peer_is_node) {
        ctx.kind = AuthContext::Kind::kPeerNode;
        ctx.peer_node = peer_host;
      } else {
        fail("NotAuthorized", "direct catalogue access is not exposed to " + peer_host);
      }
      return dbproxy_execute(ctx, req);
    }
    if (svc == "ftd") {
      if (!peer_is_node && !peer_is_adapter) {
        fail("PeerUnauthenticated", peer_host + " may not use the transfer daemon");
      }
      if (req.header("op") != "fetch") fail("NoSuchOperation", req.header("op"));
      const std::string& key = req.header("key");
      if (!se_.has(key)) fail("NotFound", "object " + key + " at " + se_.id());
      util::Bytes bytes = se_.get(key);
      return wire::make_response(req.correlation_id,
                                 {{"checksum", crypto::sha256_hex(bytes)}},
                                 std::move(bytes));
    }
    if (svc == "vos") {
      if (!peer_is_node) fail("NotAuthorized", "vos service is node-to-node only");
      if (req.header("op") != "authorize") fail("NoSuchOperation", req.header("op"));
      auto permission = fedvo::permission_from(req.header("permission"));
      if (!permission) fail("UnknownPermission", req.header("permission"));
      std::string credential = vos_co_sign(req.header("principal"), req.header("origin"),
                                           *permission, req.header("scope"));
      return wire::make_response(req.correlation_id, {{"credential", credential}});
    }
    fail("NoSuchOperation", "service " + svc);
  } catch (const Error& e) {
    return wire::make_error(req.correlation_id, e.code(), e.what());
  }
}

}  // namespace mg::gridcore
