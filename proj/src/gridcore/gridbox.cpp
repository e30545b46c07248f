#include "mg/gridcore/gridbox.hpp"

#include <algorithm>

namespace mg::gridcore {

std::string FederationDirectory::node_of_se(const std::string& se_id) const {
  auto it = se_to_node.find(se_id);
  if (it == se_to_node.end()) fail("UnknownNode", "no node hosts SE " + se_id);
  return it->second;
}

std::optional<std::string> FederationDirectory::vo_of_node(const std::string& node_id) const {
  auto it = nodes.find(node_id);
  if (it == nodes.end()) return std::nullopt;
  return it->second.vo;
}

std::map<std::string, catalog::AttrValue> MammoAttrs::to_attr_map() const {
  return {
      {"birth_year", birth_year}, {"laterality", laterality}, {"view", view},
      {"study_date", study_date}, {"site", site},             {"modality", modality},
      {"pseudonym", pseudonym},
  };
}

MammoAttrs extract_attrs(const dicomlite::DataSet& anonymized, const std::string& site) {
  auto rec = dicomlite::to_structured(anonymized);
  MammoAttrs attrs;
  const std::string& birth = rec.leaves.at("patient.birth_date");
  attrs.birth_year = std::stoll(birth.substr(0, 4));
  attrs.laterality = rec.leaves.at("series.laterality");
  attrs.view = rec.leaves.at("series.view");
  const std::string& da = rec.leaves.at("study.date");  // YYYYMMDD -> ISO
  attrs.study_date = da.substr(0, 4) + "-" + da.substr(4, 2) + "-" + da.substr(6, 2);
  attrs.site = site;
  attrs.modality = rec.leaves.at("series.modality");
  attrs.pseudonym = rec.leaves.at("patient.id");
  return attrs;
}

// --- wire forms ------------------------------------------------------------

std::string render_entry_wire(const catalog::FileEntry& entry) {
  return entry.render();
}

catalog::FileEntry parse_entry_wire(const std::string& text) {
  catalog::FileEntry entry;
  auto decode = [](std::string_view s) {
    auto d = util::percent_decode(s);
    if (!d) fail("MalformedPayload", "bad entry encoding");
    return *d;
  };
  for (const auto& line : util::split(text, '\n')) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string value = decode(line.substr(eq + 1));
    if (key == "lfn") entry.lfn = value;
    else if (key == "guid") entry.guid = value;
    else if (key == "size") entry.size = std::stoull(value);
    else if (key == "checksum") entry.checksum = value;
    else if (key == "owner_vo") entry.owner_vo = value;
    else if (key == "version") entry.version = static_cast<std::uint32_t>(std::stoul(value));
    else if (key == "replica") {
      auto parts = util::split(value, '|');
      entry.replicas.push_back({parts[0], parts[1]});
    } else if (key == "hist") {
      auto parts = util::split(value, '|');
      catalog::VersionRecord rec;
      std::uint32_t v = static_cast<std::uint32_t>(std::stoul(parts[0]));
      rec.size = std::stoull(parts[1]);
      rec.checksum = parts[2];
      for (std::size_t j = 3; j < parts.size(); ++j) {
        auto caret = parts[j].find('^');
        rec.replicas.push_back({parts[j].substr(0, caret), parts[j].substr(caret + 1)});
      }
      entry.history[v] = rec;
    } else if (util::starts_with(key, "attr.")) {
      entry.attrs[key.substr(5)] = value;  // text form suffices on the wire
    }
  }
  return entry;
}

std::vector<resultset::Row> rows_for_entries(
    const std::vector<const catalog::FileEntry*>& entries) {
  std::vector<resultset::Row> rows;
  rows.reserve(entries.size());
  for (const auto* entry : entries) {
    resultset::Row row;
    row.guid = entry->guid;
    row.origin_vo = entry->owner_vo;
    row.lfn = entry->lfn;
    for (const auto& [name, value] : entry->attrs) {
      row.attrs[name] = catalog::attr_value_to_text(value);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// --- GridBox ------------------------------------------------------------------

GridBox::GridBox(NodeIdentity identity, FederationDirectory& directory, NodeBus& bus,
                 std::uint64_t rng_seed, std::function<std::int64_t()> now_fn)
    : identity_(std::move(identity)),
      directory_(directory),
      bus_(bus),
      rng_(rng_seed),
      now_fn_(std::move(now_fn)),
      auth_(identity_.node_id, identity_.vo, audit_, rng_, directory_.keyring),
      se_(identity_.node_id + "-se") {
  catalogue_.set_guid_source([this] { return draw_guid(); });
  catalogue_.set_replica_verifier(
      [this](const catalog::PhysicalLocation& loc) -> std::optional<std::string> {
        if (loc.se_id == se_.id()) return se_.digest_of(loc.object_key);
        try {
          auto bytes = fetch_object_bytes(loc.se_id, loc.object_key, "");
          return crypto::sha256_hex(bytes);
        } catch (const Error&) {
          return std::nullopt;
        }
      });

  // Clinical namespace and plumbing directories.
  catalogue_.mkdir("/mg");
  for (const auto& [node_id, ident] : directory_.nodes) {
    catalogue_.mkdir("/mg/" + ident.site);
  }
  catalogue_.mkdir("/algorithms");
  catalogue_.mkdir("/results");
  catalog::MetadataSchema schema;
  schema.dir = "/mg";
  schema.columns = {
      {"birth_year", catalog::ColumnType::kInt}, {"laterality", catalog::ColumnType::kText},
      {"view", catalog::ColumnType::kText},      {"study_date", catalog::ColumnType::kDate},
      {"site", catalog::ColumnType::kText},      {"modality", catalog::ColumnType::kText},
      {"pseudonym", catalog::ColumnType::kText},
  };
  catalogue_.attach_schema(schema);
}

std::size_t GridBox::live_sessions() const {
  return auth_.live_session_count(now());
}

std::int64_t GridBox::session_ttl() const {
  return const_cast<ConfigTree&>(config_).get_int(identity_.vo, identity_.site,
                                                  identity_.node_id, "session_ttl_s", 1800);
}

int GridBox::ce_max_running() const {
  return static_cast<int>(const_cast<ConfigTree&>(config_).get_int(
      identity_.vo, identity_.site, identity_.node_id, "ce_max_running", 4));
}

ResourceAd GridBox::resource_ad(int queue_length) const {
  ResourceAd ad;
  ad.ce_id = identity_.node_id + "-ce";
  ad.site = identity_.site;
  ad.vo = identity_.vo;
  ad.max_running = ce_max_running();
  ad.queue_length = queue_length;
  for (const auto& alg : algorithms_.list()) ad.packages.insert(alg.name);
  ad.local_se = se_.id();
  return ad;
}

std::string GridBox::draw_guid() {
  return rng_.hex(16);
}

std::string GridBox::object_key(const std::string& guid, std::uint32_t version) const {
  return guid + ".v" + std::to_string(version);
}

bool GridBox::principal_holds(const std::string& principal, fedvo::Permission p) const {
  const fedvo::VODescriptor* vo = directory_.registry.try_get(identity_.vo);
  if (!vo) return false;
  const fedvo::VoUser* user = vo->find_user(principal);
  return user && user->holds(p);
}

SessionToken GridBox::authenticate(const Credentials& creds) {
  auth_.set_session_ttl(session_ttl());
  auth_.set_max_portals_per_user(static_cast<std::size_t>(
      config_.get_int(identity_.vo, identity_.site, identity_.node_id,
                      "max_portals_per_user", 8)));
  return auth_.authenticate(creds, now());
}

// --- ingest --------------------------------------------------------------------

std::string GridBox::mi_add(const Session& session, const util::Bytes& file_bytes,
                            const std::string& lfn) {
  dicomlite::DataSet ds = dicomlite::parse(file_bytes);
  auto report = dicomlite::validate(ds);
  if (!report.ok()) {
    fail("IncompleteDataSet", "validation found " +
                                  std::to_string(report.error_count()) + " error(s) in " + lfn);
  }
  const dicomlite::AnonymizationKey& key = directory_.site_keys.at(identity_.site);
  dicomlite::DataSet anonymized = dicomlite::anonymize(ds, key);
  util::Bytes stored = dicomlite::serialize(anonymized);
  std::string checksum = crypto::sha256_hex(stored);
  MammoAttrs attrs = extract_attrs(anonymized, identity_.site);

  // Fail before any side effect if the name is taken.
  if (catalogue_.try_lookup(lfn)) fail("AlreadyExists", lfn);

  std::string guid = draw_guid();
  std::string key1 = object_key(guid, 1);
  catalog::PhysicalLocation loc{se_.id(), key1};
  se_.put(key1, stored);
  std::string registered_guid;
  try {
    registered_guid = catalogue_.register_file(lfn, loc, stored.size(), checksum,
                                               session.vo);
    catalogue_.set_attrs_typed(lfn, attrs.to_attr_map());
    mirror_to_central(lfn, attrs, loc, stored.size(), checksum, false, registered_guid);
  } catch (...) {
    se_.remove(key1);
    catalogue_.erase_entry(lfn);
    throw;
  }
  return registered_guid;
}

void GridBox::mirror_to_central(const std::string& lfn, const MammoAttrs& attrs,
                                const catalog::PhysicalLocation& loc, std::uint64_t size,
                                const std::string& checksum, bool is_update,
                                const std::string& guid) {
  if (directory_.topology.mode != fedvo::Mode::kP1) return;
  if (directory_.central_node == identity_.node_id) return;

  std::map<std::string, std::string> attr_text;
  for (const auto& [k, v] : attrs.to_attr_map()) {
    attr_text[k] = catalog::attr_value_to_text(v);
  }
  std::string attrs_joined;
  for (const auto& [k, v] : attr_text) {
    if (!attrs_joined.empty()) attrs_joined += ";";
    attrs_joined += util::percent_encode(k, ";") + "=" + util::percent_encode(v, ";");
  }
  wire::Payload req = wire::make_request(
      0, {{"svc", "dbproxy"},
          {"op", is_update ? "mirror_update" : "mirror_register"},
          {"lfn", lfn},
          {"guid", guid},
          {"size", std::to_string(size)},
          {"checksum", checksum},
          {"owner_vo", identity_.vo},
          {"se", loc.se_id},
          {"key", loc.object_key},
          {"mirror_from", identity_.site},
          {"attrs", attrs_joined}});
  bus_.request(identity_.node_id, directory_.central_node, std::move(req));
}

// --- retrieval --------------------------------------------------------------------

const catalog::FileEntry* GridBox::locate_entry(const std::string& lfn,
                                                std::string* home_node) const {
  const catalog::FileEntry* entry = catalogue_.try_lookup(lfn);
  if (entry) {
    if (home_node) *home_node = identity_.node_id;
    return entry;
  }
  return nullptr;
}

catalog::FileEntry GridBox::fetch_remote_entry(const std::string& node, const std::string& lfn,
                                               const std::string& credential) const {
  std::map<std::string, std::string> headers{
      {"svc", "dbproxy"}, {"op", "lookup"}, {"lfn", lfn}};
  if (!credential.empty()) headers["credential"] = credential;
  wire::Payload rsp = bus_.request(identity_.node_id, node,
                                   wire::make_request(0, std::move(headers)));
  return parse_entry_wire(util::to_string(rsp.body));
}

util::Bytes GridBox::fetch_object_bytes(const std::string& se_id, const std::string& key,
                                        const std::string& expected_checksum) {
  std::string node = directory_.node_of_se(se_id);
  wire::Payload rsp = bus_.request(
      identity_.node_id, node,
      wire::make_request(0, {{"svc", "ftd"}, {"op", "fetch"}, {"key", key}}));
  if (!expected_checksum.empty() &&
      crypto::sha256_hex(rsp.body) != expected_checksum) {
    fail("ChecksumMismatch", "fetched object " + key + " does not match " + expected_checksum);
  }
  return rsp.body;
}

util::Bytes GridBox::mi_retrieve(const Session& session, const std::string& lfn,
                                 std::optional<std::uint32_t> version) {
  catalog::FileEntry entry;
  std::string home_node;
  if (const catalog::FileEntry* local = locate_entry(lfn, &home_node)) {
    entry = *local;
  } else {
    // Resolve the home catalogue from the site prefix (/mg/<site>/...).
    auto segments = util::split(lfn, '/');
    std::string site = segments.size() > 2 ? segments[2] : "";
    auto owner_vo = directory_.registry.vo_of_site(site);
    if (directory_.topology.mode == fedvo::Mode::kP1) {
      home_node = directory_.central_node;
      entry = fetch_remote_entry(home_node, lfn, "");
    } else {
      if (!owner_vo) fail("NotFound", lfn);
      if (*owner_vo == session.vo) fail("NotFound", lfn);
      std::string credential;
      try {
        credential = obtain_credential(session, *owner_vo, fedvo::Permission::kReadImage,
                                       "/mg/" + site);
      } catch (const Error& e) {
        if (util::starts_with(e.code(), "Denied")) {
          fail("NotAuthorized", e.what());
        }
        throw;
      }
      home_node = directory_.registry.get(*owner_vo).catalogue_node;
      entry = fetch_remote_entry(home_node, lfn, credential);
    }
  }

  // Local-VO reads still require the read-image role.
  if (entry.owner_vo == session.vo &&
      !principal_holds(session.token.principal, fedvo::Permission::kReadImage)) {
    fail("NotAuthorized", session.token.principal + " lacks read-image in " + session.vo);
  }

  std::uint32_t want = version.value_or(entry.version);
  auto hist = entry.history.find(want);
  if (hist == entry.history.end()) {
    fail("NotFound", lfn + " version " + std::to_string(want));
  }
  const catalog::VersionRecord& record = hist->second;

  // Nearest replica: the local SE wins; remote fetches land in the cache.
  for (const auto& replica : record.replicas) {
    if (replica.se_id == se_.id() && se_.has(replica.object_key)) {
      return se_.get(replica.object_key);
    }
  }
  std::string last_error;
  for (const auto& replica : record.replicas) {
    if (replica.se_id == se_.id()) continue;
    try {
      util::Bytes bytes = fetch_object_bytes(replica.se_id, replica.object_key,
                                             record.checksum);
      se_.put_cached(replica.object_key, bytes);
      // A cross-boundary image fetch is itself a scheduled transfer;
      // log it so governance can account for the cached copy.
      std::string tid = transfers_.enqueue(replica.object_key, lfn, replica.se_id,
                                           se_.id(), record.checksum);
      auto& req = transfers_.get(tid);
      req.status = TransferStatus::kDone;
      req.credentialed = true;
      req.note = "retrieve cache fill";
      return bytes;
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  fail("NotFound", "no reachable replica of " + lfn +
                       (last_error.empty() ? "" : " (" + last_error + ")"));
}

std::uint32_t GridBox::mi_update(const Session& session, const std::string& lfn,
                                 const util::Bytes& file_bytes) {
  const catalog::FileEntry* entry = catalogue_.try_lookup(lfn);
  if (!entry) {
    // Updates are owner-only; a foreign lfn is NotAuthorized, an unknown
    // one NotFound.
    auto segments = util::split(lfn, '/');
    std::string site = segments.size() > 2 ? segments[2] : "";
    auto owner_vo = directory_.registry.vo_of_site(site);
    if (owner_vo && *owner_vo != session.vo) {
      fail("NotAuthorized", "mi.update is owner-VO only");
    }
    fail("NotFound", lfn);
  }
  if (entry->owner_vo != session.vo) fail("NotAuthorized", "mi.update is owner-VO only");
  if (!principal_holds(session.token.principal, fedvo::Permission::kWrite)) {
    fail("NotAuthorized", session.token.principal + " lacks write in " + session.vo);
  }

  dicomlite::DataSet ds = dicomlite::parse(file_bytes);
  auto report = dicomlite::validate(ds);
  if (!report.ok()) {
    fail("IncompleteDataSet", "validation found " +
                                  std::to_string(report.error_count()) + " error(s)");
  }
  const dicomlite::AnonymizationKey& key = directory_.site_keys.at(identity_.site);
  dicomlite::DataSet anonymized = dicomlite::anonymize(ds, key);
  util::Bytes stored = dicomlite::serialize(anonymized);
  std::string checksum = crypto::sha256_hex(stored);
  MammoAttrs attrs = extract_attrs(anonymized, identity_.site);

  std::string new_key = object_key(entry->guid, entry->version + 1);
  catalog::PhysicalLocation loc{se_.id(), new_key};
  se_.put(new_key, stored);
  std::uint32_t new_version;
  try {
    new_version = catalogue_.update_content(lfn, loc, stored.size(), checksum);
    catalogue_.set_attrs_typed(lfn, attrs.to_attr_map());
    mirror_to_central(lfn, attrs, loc, stored.size(), checksum, true, entry->guid);
  } catch (...) {
    se_.remove(new_key);
    throw;
  }
  return new_version;
}

// --- query -----------------------------------------------------------------------

std::string GridBox::vos_co_sign(const std::string& principal, const std::string& origin_vo,
                                 fedvo::Permission permission, const std::string& scope) {
  // Target-side half of the dual consent: trust relation + signature.
  const std::string& target_vo = identity_.vo;
  const fedvo::TrustRelation* trust = directory_.registry.trust_between(origin_vo, target_vo);
  if (!trust) fail("Denied(target)", "no trust relation " + origin_vo + " -> " + target_vo);
  if (!trust->granted.count(permission)) {
    fail("Denied(target)", "trust does not grant " +
                               std::string(fedvo::permission_name(permission)));
  }
  if (!fedvo::scope_contains(trust->scope, scope)) {
    fail("Denied(target)", "scope " + scope + " outside trusted " + trust->scope);
  }
  fedvo::CrossVOCredential cred;
  cred.credential_id = identity_.node_id + "-c" + std::to_string(credential_counter_++);
  cred.principal = principal;
  cred.origin_vo = origin_vo;
  cred.target_vo = target_vo;
  cred.permissions = {permission};
  cred.scope = scope;
  cred.expires_at = now() + config_.get_int(identity_.vo, identity_.site, identity_.node_id,
                                            "credential_ttl_s", 600);
  cred = fedvo::sign_credential(std::move(cred), directory_.vo_keys.at(target_vo));
  return cred.encode();
}

std::string GridBox::obtain_credential(const Session& session, const std::string& target_vo,
                                       fedvo::Permission permission, const std::string& scope) {
  // Origin-side check first: the principal must hold the permission here.
  if (!principal_holds(session.token.principal, permission)) {
    fail("Denied(origin)", session.token.principal + " lacks role with " +
                               fedvo::permission_name(permission));
  }
  const std::string target_node = directory_.registry.get(target_vo).catalogue_node;
  wire::Payload rsp = bus_.request(
      identity_.node_id, target_node,
      wire::make_request(0, {{"svc", "vos"},
                             {"op", "authorize"},
                             {"principal", session.token.principal},
                             {"origin", session.vo},
                             {"permission", fedvo::permission_name(permission)},
                             {"scope", scope}}));
  return rsp.header("credential");
}

resultset::ResultSet GridBox::mi_query(const Session& session, const std::string& query_text,
                                       std::optional<int> query_year) {
  queryfed::QueryAst ast = queryfed::parse_query(query_text);
  queryfed::PlanContext ctx;
  ctx.topology = &directory_.topology;
  ctx.registry = &directory_.registry;
  ctx.session_principal = session.token.principal;
  ctx.session_vo = session.vo;
  ctx.query_year = query_year.value_or(util::utc_year(now()));
  ctx.credential_source = [&](const std::string& target_vo) -> std::optional<std::string> {
    try {
      return obtain_credential(session, target_vo, fedvo::Permission::kReadMeta, "/mg");
    } catch (const Error& e) {
      if (util::starts_with(e.code(), "Denied")) throw;
      return std::nullopt;  // transport failure: the leg is unreachable
    }
  };
  queryfed::FederationPlan plan = queryfed::plan(ast, ctx);

  auto runner = [&](const queryfed::PlanLeg& leg) -> queryfed::LegOutcome {
    queryfed::LegOutcome outcome;
    try {
      std::vector<resultset::Row> rows;
      std::string target_node = directory_.registry.get(leg.target_vo).catalogue_node;
      if (directory_.topology.mode == fedvo::Mode::kP1) {
        target_node = directory_.central_node;
      }
      if (target_node == identity_.node_id) {
        auto lfns = catalogue_.find("/mg", leg.query);
        std::vector<const catalog::FileEntry*> entries;
        for (const auto& lfn : lfns) entries.push_back(&catalogue_.lookup(lfn));
        rows = rows_for_entries(entries);
      } else {
        std::map<std::string, std::string> headers{{"svc", "dbproxy"},
                                                   {"op", "find"},
                                                   {"dir", "/mg"},
                                                   {"q", leg.query.render()}};
        if (!leg.credential.empty()) headers["credential"] = leg.credential;
        wire::Payload rsp = bus_.request(identity_.node_id, target_node,
                                         wire::make_request(0, std::move(headers)));
        rows = resultset::ResultSet::parse(util::to_string(rsp.body)).rows;
      }
      outcome.rows = std::move(rows);
    } catch (const Error& e) {
      if (e.code() == "NoRoute" || e.code() == "Timeout" || e.code() == "UnknownNode" ||
          e.code() == "ChannelClosed") {
        outcome.status = resultset::LegStatus::kUnreachable;
      } else if (util::starts_with(e.code(), "Denied") || e.code() == "NotAuthorized") {
        outcome.status = resultset::LegStatus::kDenied;
      } else {
        throw;
      }
    }
    return outcome;
  };
  return queryfed::execute_plan(plan, runner);
}

// --- algorithms / jobs ----------------------------------------------------------

void GridBox::mi_add_algorithm(const Session& session, const std::string& name,
                               const util::Bytes& artifact, const std::string& checksum) {
  bool allowed = principal_holds(session.token.principal, fedvo::Permission::kAdmin) ||
                 principal_holds(session.token.principal, fedvo::Permission::kExecute);
  if (!allowed) fail("NotAuthorized", "mi.addAlgorithm requires admin or execute role");
  algorithms_.register_algorithm(name, artifact, checksum);

  std::string lfn = "/algorithms/" + name;
  if (const catalog::FileEntry* existing = catalogue_.try_lookup(lfn)) {
    std::string key = object_key(existing->guid, existing->version + 1);
    se_.put(key, artifact);
    catalogue_.update_content(lfn, {se_.id(), key}, artifact.size(), checksum);
  } else {
    std::string guid = draw_guid();
    std::string key = object_key(guid, 1);
    se_.put(key, artifact);
    catalogue_.register_file(lfn, {se_.id(), key}, artifact.size(), checksum, session.vo);
  }
}

std::string GridBox::jobmanager_submit(const Session& session, const std::string& jdl_text) {
  JobDescriptor jd = parse_jdl(jdl_text);
  if (!algorithms_.registered(jd.executable)) {
    fail("UnknownAlgorithm", jd.executable + " is not registered on this grid-box");
  }
  // Submission only queues; brokers assign resources.
  return tasks_.submit(std::move(jd), session.token.principal, session.vo, now());
}

std::string GridBox::mi_execute_algorithm(const Session& session, const std::string& name,
                                          const std::vector<std::string>& input_lfns,
                                          const std::string& output_lfn) {
  if (!algorithms_.registered(name)) fail("UnknownAlgorithm", name);
  if (!principal_holds(session.token.principal, fedvo::Permission::kExecute) &&
      !principal_holds(session.token.principal, fedvo::Permission::kAdmin)) {
    fail("NotAuthorized", "mi.executeAlgorithm requires the execute role");
  }
  // Caller must be able to read every input: own-VO data only at submit.
  for (const auto& lfn : input_lfns) {
    auto segments = util::split(lfn, '/');
    if (segments.size() > 2 && segments[1] == "mg") {
      auto owner = directory_.registry.vo_of_site(segments[2]);
      if (owner && *owner != session.vo) {
        fail("NotAuthorized", "input " + lfn + " belongs to VO " + *owner);
      }
    }
  }
  JobDescriptor jd;
  jd.executable = name;
  jd.input_data = input_lfns;
  jd.requirements_text = "packages CONTAINS \"" + name + "\"";
  jd.requirements = parse_requirements(jd.requirements_text);
  jd.output_lfn = output_lfn;
  jd.jdl_text = render_jdl(jd);
  return tasks_.submit(std::move(jd), session.token.principal, session.vo, now());
}

const Task& GridBox::jobmanager_status(const std::string& task_id) const {
  return tasks_.get(task_id);
}

// --- scheduling cycles ------------------------------------------------------------

bool GridBox::se_holds_lfn(const std::string& lfn, const std::string& se_id) const {
  auto info = resolve_input(lfn);
  if (!info) return false;
  return std::find(info->replica_ses.begin(), info->replica_ses.end(), se_id) !=
         info->replica_ses.end();
}

std::optional<InputInfo> GridBox::resolve_input(const std::string& lfn) const {
  const catalog::FileEntry* entry = catalogue_.try_lookup(lfn);
  catalog::FileEntry fetched;
  if (!entry) {
    // The entry may live at another box of this VO or, in P1, centrally.
    std::string home;
    if (directory_.topology.mode == fedvo::Mode::kP1) {
      home = directory_.central_node;
    } else {
      auto segments = util::split(lfn, '/');
      std::string site = segments.size() > 2 ? segments[2] : "";
      auto owner = directory_.registry.vo_of_site(site);
      if (!owner) return std::nullopt;
      home = directory_.registry.get(*owner).catalogue_node;
    }
    if (home == identity_.node_id) return std::nullopt;
    try {
      fetched = fetch_remote_entry(home, lfn, "");
      entry = &fetched;
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  InputInfo info;
  auto hist = entry->history.find(entry->version);
  const auto& replicas = hist != entry->history.end() ? hist->second.replicas : entry->replicas;
  info.guid = replicas.empty() ? entry->guid : replicas.front().object_key;
  info.checksum = entry->checksum;
  for (const auto& r : replicas) info.replica_ses.push_back(r.se_id);
  return info;
}

std::vector<std::string> GridBox::broker_tick(const std::vector<ResourceAd>& ads) {
  ReplicaLocator locator = [this](const std::string& lfn, const std::string& se_id) {
    return se_holds_lfn(lfn, se_id);
  };
  return broker_cycle(tasks_, ads, locator, now());
}

std::vector<StagingDecision> GridBox::optimizer_tick(const std::vector<ResourceAd>& ads) {
  ReplicaLocator locator = [this](const std::string& lfn, const std::string& se_id) {
    return se_holds_lfn(lfn, se_id);
  };
  InputResolver resolver = [this](const std::string& lfn) { return resolve_input(lfn); };
  return optimizer_pass(tasks_, transfers_, ads, locator, resolver);
}

void GridBox::ce_execute(Task& task, TaskQueue& queue, const std::string& register_at_node) {
  queue.transition(task.task_id, TaskStatus::kRunning, now(), "on " + identity_.node_id + "-ce");
  std::vector<util::Bytes> inputs;
  for (const auto& lfn : task.jdl.input_data) {
    auto info = resolve_input(lfn);
    const catalog::PhysicalLocation* here = nullptr;
    catalog::FileEntry fetched;
    if (info) {
      // Find the object key of the replica on this SE.
      const catalog::FileEntry* entry = catalogue_.try_lookup(lfn);
      if (!entry) {
        try {
          fetched = fetch_remote_entry(
              directory_.topology.mode == fedvo::Mode::kP1
                  ? directory_.central_node
                  : directory_.registry.get(task.owner_vo).catalogue_node,
              lfn, "");
          entry = &fetched;
        } catch (const Error&) {
          entry = nullptr;
        }
      }
      if (entry) {
        auto hist = entry->history.find(entry->version);
        const auto& replicas =
            hist != entry->history.end() ? hist->second.replicas : entry->replicas;
        for (const auto& r : replicas) {
          if (r.se_id == se_.id()) here = &r;
        }
        if (here && se_.has(here->object_key)) {
          inputs.push_back(se_.get(here->object_key));
          continue;
        }
      }
    }
    queue.transition(task.task_id, TaskStatus::kError, now(),
                     "InputMissing: " + lfn + " has no replica at " + se_.id());
    return;
  }

  util::Bytes output;
  try {
    output = algorithms_.run(task.jdl.executable, inputs);
  } catch (const Error& e) {
    queue.transition(task.task_id, TaskStatus::kError, now(),
                     std::string("AlgorithmFault: ") + e.what());
    return;
  } catch (const std::exception& e) {
    queue.transition(task.task_id, TaskStatus::kError, now(),
                     std::string("AlgorithmFault: ") + e.what());
    return;
  }

  std::string guid = draw_guid();
  std::string key = object_key(guid, 1);
  se_.put(key, output);
  std::string checksum = crypto::sha256_hex(output);
  if (register_at_node == identity_.node_id) {
    catalogue_.register_file(task.jdl.output_lfn, {se_.id(), key}, output.size(), checksum,
                             task.owner_vo);
  } else {
    bus_.request(identity_.node_id, register_at_node,
                 wire::make_request(0, {{"svc", "dbproxy"},
                                        {"op", "register"},
                                        {"lfn", task.jdl.output_lfn},
                                        {"size", std::to_string(output.size())},
                                        {"checksum", checksum},
                                        {"owner_vo", task.owner_vo},
                                        {"se", se_.id()},
                                        {"key", key}}));
  }
  task.result_lfn = task.jdl.output_lfn;
  queue.transition(task.task_id, TaskStatus::kDone, now(), "output at " + task.jdl.output_lfn);
}

void GridBox::ftd_transfer(TransferRequest& req, const std::string& catalogue_node) {
  // Mutual authentication precedes any bytes: both ends must be enrolled.
  std::string source_node = directory_.node_of_se(req.source_se);
  if (!directory_.keyring.secret_for(identity_.host_id) ||
      !directory_.keyring.secret_for(source_node)) {
    req.status = TransferStatus::kFailed;
    req.note = "PeerUnauthenticated";
    fail("PeerUnauthenticated", "host certificate missing for transfer peers");
  }
  req.status = TransferStatus::kTransferring;
  util::Bytes bytes;
  try {
    bytes = fetch_object_bytes(req.source_se, req.guid, "");
  } catch (const Error& e) {
    req.status = TransferStatus::kFailed;
    req.note = e.code() == "NotFound" ? "SourceMissing" : e.code();
    return;
  }
  if (crypto::sha256_hex(bytes) != req.checksum) {
    // Integrity failure: no partial copy survives.
    se_.remove(req.guid);
    req.status = TransferStatus::kFailed;
    req.note = "ChecksumMismatch";
    return;
  }
  se_.put(req.guid, bytes);
  try {
    if (catalogue_node == identity_.node_id) {
      catalogue_.add_replica(req.lfn, {se_.id(), req.guid});
    } else {
      bus_.request(identity_.node_id, catalogue_node,
                   wire::make_request(0, {{"svc", "dbproxy"},
                                          {"op", "add_replica"},
                                          {"lfn", req.lfn},
                                          {"se", se_.id()},
                                          {"key", req.guid},
                                          {"transfer", req.transfer_id}}));
    }
  } catch (const Error& e) {
    se_.remove(req.guid);
    req.status = TransferStatus::kFailed;
    req.note = e.code();
    return;
  }
  req.status = TransferStatus::kDone;
  req.credentialed = true;
}

}  // namespace mg::gridcore
