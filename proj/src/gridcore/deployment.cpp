#include "mg/gridcore/deployment.hpp"

#include <algorithm>

namespace mg::gridcore {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

wire::Payload Deployment::BusProxy::request(const std::string& from_node,
                                            const std::string& to_node, wire::Payload req) {
  if (!target) fail("NoRoute", "bus not wired yet");
  return target->request(from_node, to_node, std::move(req));
}

wire::Payload DirectBus::request(const std::string& from_node, const std::string& to_node,
                                 wire::Payload req) {
  req.correlation_id = next_correlation_++;
  wire::Payload rsp = deployment_.dispatch_request(to_node, from_node, req);
  if (rsp.type == "ERR") {
    fail(rsp.header("code"), rsp.header("message"));
  }
  return rsp;
}

Deployment::Deployment(DeploymentConfig config, BusFactory bus_factory)
    : config_(std::move(config)) {
  crypto::Rng master(config_.seed);

  // Federation directory: VO registry, topology, keys, keyring.
  directory_.topology.mode = config_.mode;
  if (config_.mode == fedvo::Mode::kP1) {
    const std::string vo = "mammogrid";
    directory_.registry.vo_create(vo);
    directory_.topology.vo_names = {vo};
    directory_.topology.central_vo = vo;
    for (auto& spec : config_.nodes) spec.vo = vo;
  } else {
    std::vector<std::string> vos;
    for (const auto& spec : config_.nodes) {
      if (!directory_.registry.try_get(spec.vo)) {
        directory_.registry.vo_create(spec.vo);
        vos.push_back(spec.vo);
      }
    }
    if (!directory_.registry.try_get(config_.central_vo)) {
      directory_.registry.vo_create(config_.central_vo);
      vos.push_back(config_.central_vo);
    }
    directory_.topology.vo_names = vos;
    directory_.topology.central_vo = config_.central_vo;
  }
  directory_.central_node = config_.central_node.empty() ? config_.nodes.front().node_id
                                                         : config_.central_node;
  directory_.topology.validate();

  for (const auto& spec : config_.nodes) {
    NodeIdentity identity{spec.node_id, spec.site, spec.vo, spec.node_id};
    directory_.nodes[spec.node_id] = identity;
    directory_.registry.vo_add_site(spec.vo, spec.site);
    directory_.se_to_node[spec.node_id + "-se"] = spec.node_id;
    // One catalogue node per VO: the first node declared for it.
    if (directory_.registry.get(spec.vo).catalogue_node.empty()) {
      directory_.registry.vo_set_catalogue_node(spec.vo, spec.node_id);
    }
    directory_.keyring.enroll(spec.node_id, master.bytes(32));
  }
  for (const auto& host : config_.client_hosts) {
    directory_.keyring.enroll(host, master.bytes(32));
  }
  for (const auto& name : directory_.registry.vo_names()) {
    directory_.vo_keys[name] = master.bytes(32);
  }
  for (const auto& spec : config_.nodes) {
    if (!directory_.site_keys.count(spec.site)) {
      directory_.site_keys.emplace(
          spec.site, dicomlite::make_key(master.bytes(32), master.bytes(16)));
    }
  }

  directory_.live_session_counter = [this] { return live_sessions(); };
  directory_.governance_scan = [this] { return governance_records(); };

  for (const auto& spec : config_.nodes) {
    std::uint64_t node_seed = config_.seed ^ fnv1a(spec.node_id);
    auto box = std::make_unique<GridBox>(directory_.nodes[spec.node_id], directory_, proxy_,
                                         node_seed, [this] { return now_; });
    boxes_[spec.node_id] = std::move(box);
    node_order_.push_back(spec.node_id);
  }

  if (bus_factory) {
    bus_ = bus_factory(*this);
  } else {
    bus_ = std::make_unique<DirectBus>(*this);
  }
  proxy_.target = bus_.get();
}

Deployment::~Deployment() = default;

GridBox& Deployment::box(const std::string& node_id) {
  auto it = boxes_.find(node_id);
  if (it == boxes_.end()) fail("UnknownNode", node_id);
  return *it->second;
}

void Deployment::add_user(const std::string& vo, const std::string& user,
                          const std::string& password,
                          const std::vector<fedvo::Permission>& perms) {
  std::string principal = user + "@" + vo;
  std::vector<fedvo::Role> roles;
  for (auto p : perms) {
    roles.push_back(fedvo::Role{fedvo::permission_name(p), {p}});
  }
  directory_.registry.vo_add_user(vo, principal, roles);
  for (auto& [node_id, box] : boxes_) {
    if (box->identity().vo == vo) box->auth().add_user(principal, password);
  }
}

void Deployment::attach_foreign(const fedvo::ForeignGridAdapter& adapter) {
  if (adapters_.count(adapter.grid_id)) fail("Duplicate", adapter.grid_id);
  AdapterState state;
  state.adapter = adapter;
  state.se = std::make_unique<StorageElement>(adapter.presented_se_id);
  for (const auto& pkg : adapter.packages) {
    if (state.algorithms.is_builtin(pkg)) {
      util::Bytes artifact = util::to_bytes(pkg);
      state.algorithms.register_algorithm(pkg, artifact, crypto::sha256_hex(artifact));
    }
  }
  directory_.foreign_grids[adapter.grid_id] = adapter;
  directory_.se_to_node[adapter.presented_se_id] = adapter.grid_id;
  directory_.topology.foreign_grids.push_back(adapter);
  crypto::Rng seeder(config_.seed ^ fnv1a(adapter.grid_id));
  directory_.keyring.enroll(adapter.grid_id, seeder.bytes(32));
  adapters_[adapter.grid_id] = std::move(state);
}

void Deployment::detach_foreign(const std::string& grid_id) {
  auto it = adapters_.find(grid_id);
  if (it == adapters_.end()) return;
  directory_.se_to_node.erase(it->second.adapter.presented_se_id);
  directory_.foreign_grids.erase(grid_id);
  auto& fg = directory_.topology.foreign_grids;
  fg.erase(std::remove_if(fg.begin(), fg.end(),
                          [&](const fedvo::ForeignGridAdapter& a) {
                            return a.grid_id == grid_id;
                          }),
           fg.end());
  adapters_.erase(it);
}

std::size_t Deployment::live_sessions() const {
  std::size_t n = 0;
  for (const auto& [id, box] : boxes_) n += box->live_sessions();
  return n;
}

void Deployment::set_mode(fedvo::Mode mode) {
  if (live_sessions() > 0) {
    fail("InvalidTopology", "mode switch requires quiesce");
  }
  fedvo::Topology candidate = directory_.topology;
  candidate.mode = mode;
  candidate.validate();
  directory_.topology = candidate;
}

std::string Deployment::client_login(const std::string& client_host, const std::string& node,
                                     const std::string& principal,
                                     const std::string& password) {
  wire::Payload rsp = proxy_.request(
      client_host, node,
      wire::make_request(0, {{"svc", "auth"},
                             {"op", "login"},
                             {"user", principal},
                             {"mech", "PWD"},
                             {"secret", password}}));
  return rsp.header("token");
}

wire::Payload Deployment::client_call(const std::string& client_host, const std::string& node,
                                      std::map<std::string, std::string> headers,
                                      util::Bytes body) {
  headers["svc"] = "portal";
  headers["op"] = "dispatch";
  return proxy_.request(client_host, node,
                        wire::make_request(0, std::move(headers), std::move(body)));
}

wire::Payload Deployment::dispatch_request(const std::string& to_host,
                                           const std::string& from_host,
                                           const wire::Payload& req) {
  auto box_it = boxes_.find(to_host);
  if (box_it != boxes_.end()) return box_it->second->handle_request(from_host, req);
  auto adapter_it = adapters_.find(to_host);
  if (adapter_it != adapters_.end()) return handle_adapter_request(to_host, from_host, req);
  return wire::make_error(req.correlation_id, "UnknownNode", to_host);
}

wire::Payload Deployment::handle_adapter_request(const std::string& grid_id,
                                                 const std::string& from_host,
                                                 const wire::Payload& req) {
  try {
    AdapterState& state = adapters_.at(grid_id);
    if (req.header("svc") != "ftd" || req.header("op") != "fetch") {
      fail("NoSuchOperation", "foreign grid exposes only ftd.fetch");
    }
    if (!directory_.is_node(from_host) && !directory_.keyring.secret_for(from_host)) {
      fail("PeerUnauthenticated", from_host);
    }
    const std::string& key = req.header("key");
    if (!state.se->has(key)) fail("NotFound", key);
    util::Bytes bytes = state.se->get(key);
    return wire::make_response(req.correlation_id,
                               {{"checksum", crypto::sha256_hex(bytes)}}, std::move(bytes));
  } catch (const Error& e) {
    return wire::make_error(req.correlation_id, e.code(), e.what());
  }
}

// --- cycles -----------------------------------------------------------------

std::vector<ResourceAd> Deployment::gather_ads() const {
  // Live queue length per CE across every box's task queue.
  std::map<std::string, int> ce_load;
  for (const auto& [id, box] : boxes_) {
    for (const Task* task : box->tasks().all()) {
      if (task->status == TaskStatus::kAssigned || task->status == TaskStatus::kRunning) {
        ce_load[task->assigned_ce] += 1;
      }
    }
  }
  std::vector<ResourceAd> ads;
  for (const auto& id : node_order_) {
    const GridBox& box = *boxes_.at(id);
    ads.push_back(box.resource_ad(ce_load[id + "-ce"]));
  }
  for (const auto& [grid_id, state] : adapters_) {
    ResourceAd ad;
    ad.ce_id = state.adapter.presented_ce_id;
    ad.site = state.adapter.site;
    ad.vo = state.adapter.vo;
    ad.max_running = state.adapter.max_running;
    ad.queue_length = ce_load[ad.ce_id];
    ad.packages = state.adapter.packages;
    ad.local_se = state.adapter.presented_se_id;
    ads.push_back(ad);
  }
  return ads;
}

std::vector<std::string> Deployment::tick_broker() {
  auto ads = gather_ads();
  std::vector<std::string> assigned;
  for (const auto& id : node_order_) {
    for (auto& task_id : boxes_.at(id)->broker_tick(ads)) {
      assigned.push_back(task_id);
    }
  }
  return assigned;
}

std::vector<StagingDecision> Deployment::tick_optimizer() {
  auto ads = gather_ads();
  std::vector<StagingDecision> created;
  for (const auto& id : node_order_) {
    for (auto& d : boxes_.at(id)->optimizer_tick(ads)) created.push_back(d);
  }
  return created;
}

void Deployment::tick_ce() {
  for (const auto& id : node_order_) {
    GridBox& owner = *boxes_.at(id);
    std::vector<Task*> assigned;
    for (const Task* t : owner.tasks().all()) {
      if (t->status == TaskStatus::kAssigned) {
        assigned.push_back(&owner.tasks().get(t->task_id));
      }
    }
    for (Task* task : assigned) {
      const std::string& ce = task->assigned_ce;
      // Node CE or foreign adapter CE.
      std::string exec_node;
      for (const auto& [node_id, box] : boxes_) {
        if (node_id + "-ce" == ce) exec_node = node_id;
      }
      if (!exec_node.empty()) {
        boxes_.at(exec_node)->ce_execute(*task, owner.tasks(), id);
        continue;
      }
      for (auto& [grid_id, state] : adapters_) {
        if (state.adapter.presented_ce_id != ce) continue;
        // Stub foreign executor: same plugin contract behind the adapter.
        owner.tasks().transition(task->task_id, TaskStatus::kRunning, now_,
                                 "on foreign grid " + grid_id);
        std::vector<util::Bytes> inputs;
        bool missing = false;
        for (const auto& lfn : task->jdl.input_data) {
          auto info = boxes_.at(home_node_of(lfn))->resolve_input(lfn);
          const catalog::FileEntry* entry =
              boxes_.at(home_node_of(lfn))->catalogue().try_lookup(lfn);
          std::string key;
          if (entry) {
            auto hist = entry->history.find(entry->version);
            const auto& replicas =
                hist != entry->history.end() ? hist->second.replicas : entry->replicas;
            for (const auto& r : replicas) {
              if (r.se_id == state.adapter.presented_se_id) key = r.object_key;
            }
          }
          (void)info;
          if (key.empty() || !state.se->has(key)) {
            missing = true;
            break;
          }
          inputs.push_back(state.se->get(key));
        }
        if (missing) {
          owner.tasks().transition(task->task_id, TaskStatus::kError, now_,
                                   "InputMissing at foreign SE");
          break;
        }
        try {
          util::Bytes output = state.algorithms.run(task->jdl.executable, inputs);
          crypto::Rng keygen(config_.seed ^ fnv1a(grid_id + task->task_id));
          std::string key = keygen.hex(16) + ".v1";
          state.se->put(key, output);
          owner.catalogue().register_file(task->jdl.output_lfn,
                                          {state.adapter.presented_se_id, key},
                                          output.size(), crypto::sha256_hex(output),
                                          task->owner_vo);
          task->result_lfn = task->jdl.output_lfn;
          owner.tasks().transition(task->task_id, TaskStatus::kDone, now_,
                                   "output at " + task->jdl.output_lfn);
        } catch (const Error& e) {
          owner.tasks().transition(task->task_id, TaskStatus::kError, now_,
                                   std::string("AlgorithmFault: ") + e.what());
        }
        break;
      }
    }
  }
}

void Deployment::tick_ftd() {
  for (const auto& id : node_order_) {
    GridBox& owner = *boxes_.at(id);
    for (TransferRequest* req : owner.transfers().waiting()) {
      const std::string dest_host = directory_.node_of_se(req->dest_se);
      const std::string home = home_node_of(req->lfn);
      auto dest_box = boxes_.find(dest_host);
      if (dest_box != boxes_.end()) {
        try {
          dest_box->second->ftd_transfer(*req, home);
        } catch (const Error&) {
          // Failure already recorded on the request.
        }
        continue;
      }
      // Destination is a foreign-grid adapter: the stub executor pulls
      // in-process (foreign grid internals are outside the emulation).
      auto adapter = adapters_.find(dest_host);
      if (adapter == adapters_.end()) {
        req->status = TransferStatus::kFailed;
        req->note = "UnknownNode";
        continue;
      }
      try {
        GridBox& source_box = box(directory_.node_of_se(req->source_se));
        util::Bytes bytes = source_box.se().get(req->guid);
        if (crypto::sha256_hex(bytes) != req->checksum) {
          req->status = TransferStatus::kFailed;
          req->note = "ChecksumMismatch";
          continue;
        }
        adapter->second.se->put(req->guid, bytes);
        boxes_.at(home)->catalogue().add_replica(req->lfn,
                                                 {req->dest_se, req->guid});
        req->status = TransferStatus::kDone;
        req->credentialed = true;
      } catch (const Error& e) {
        req->status = TransferStatus::kFailed;
        req->note = e.code();
      }
    }
  }
}

void Deployment::run_job_cycles(int max_rounds) {
  for (int round = 0; round < max_rounds; ++round) {
    tick_broker();
    tick_optimizer();
    tick_ftd();
    tick_broker();
    tick_ce();
    bool anything_open = false;
    for (const auto& id : node_order_) {
      for (const Task* t : boxes_.at(id)->tasks().all()) {
        if (t->status == TaskStatus::kWaiting || t->status == TaskStatus::kAssigned) {
          anything_open = true;
        }
      }
    }
    if (!anything_open) return;
  }
}

std::string Deployment::home_node_of(const std::string& lfn) const {
  auto segments = util::split(lfn, '/');
  if (segments.size() > 2 && segments[1] == "mg") {
    for (const auto& [node_id, ident] : directory_.nodes) {
      if (ident.site == segments[2]) return node_id;
    }
  }
  return node_order_.front();
}

// --- governance ----------------------------------------------------------------

std::vector<fedvo::HostedRecord> Deployment::governance_records() const {
  std::vector<fedvo::HostedRecord> records;

  // Catalogue entries: metadata hosted per VO.
  for (const auto& id : node_order_) {
    const GridBox& box = *boxes_.at(id);
    for (const catalog::FileEntry* entry : box.catalogue().all_entries()) {
      fedvo::HostedRecord rec;
      rec.hosting_vo = box.identity().vo;
      rec.hosting_node = id;
      rec.owner_vo = entry->owner_vo;
      rec.lfn = entry->lfn;
      rec.guid = entry->guid;
      rec.is_central_mirror = !entry->mirrored_from.empty();
      records.push_back(std::move(rec));
    }
  }

  // SE objects: bytes hosted per VO. Ownership resolves through the
  // replica lists; copies created by logged transfers are exempt.
  auto transfer_logged = [&](const std::string& key, const std::string& se_id) {
    for (const auto& id : node_order_) {
      for (const auto& t : boxes_.at(id)->transfers().all()) {
        if (t.guid == key && t.dest_se == se_id &&
            t.status == TransferStatus::kDone && t.credentialed) {
          return true;
        }
      }
    }
    return false;
  };
  for (const auto& id : node_order_) {
    const GridBox& host_box = *boxes_.at(id);
    const std::string se_id = id + "-se";
    for (const auto& obj : host_box.se().objects()) {
      std::string owner_vo;
      std::string lfn;
      for (const auto& other_id : node_order_) {
        for (const catalog::FileEntry* entry : boxes_.at(other_id)->catalogue().all_entries()) {
          for (const auto& [version, rec] : entry->history) {
            for (const auto& replica : rec.replicas) {
              if (replica.se_id == se_id && replica.object_key == obj.guid) {
                owner_vo = entry->owner_vo;
                lfn = entry->lfn;
              }
            }
          }
        }
      }
      if (owner_vo.empty()) {
        // Cached temporaries resolve through the transfer log; anything
        // else (unregistered scratch) is attributed to the hosting VO.
        owner_vo = host_box.identity().vo;
        if (obj.cached) {
          for (const auto& other_id : node_order_) {
            for (const auto& t : boxes_.at(other_id)->transfers().all()) {
              if (t.guid == obj.guid && t.dest_se == se_id) {
                lfn = t.lfn;
                const std::string home = home_node_of(t.lfn);
                if (const catalog::FileEntry* entry =
                        boxes_.at(home)->catalogue().try_lookup(t.lfn)) {
                  owner_vo = entry->owner_vo;
                }
              }
            }
          }
        }
      }
      fedvo::HostedRecord rec;
      rec.hosting_vo = host_box.identity().vo;
      rec.hosting_node = id;
      rec.owner_vo = owner_vo;
      rec.lfn = lfn.empty() ? ("se:" + obj.guid) : lfn;
      rec.guid = obj.guid;
      rec.via_logged_transfer = transfer_logged(obj.guid, se_id);
      records.push_back(std::move(rec));
    }
  }
  return records;
}

fedvo::GovernanceReport Deployment::run_governance_audit() const {
  return fedvo::audit_governance(directory_.topology, governance_records());
}

resultset::ResultSet Deployment::supervo_route(const std::string& root,
                                               const std::string& querying_vo,
                                               const std::string& query_text, int query_year) {
  queryfed::QueryAst ast = queryfed::parse_query(query_text);
  catalog::CatalogQuery q = queryfed::translate(ast, query_year);
  fedvo::LegExecutor executor =
      [&](const std::string& vo) -> std::pair<resultset::LegStatus, std::vector<resultset::Row>> {
    const fedvo::VODescriptor* desc = directory_.registry.try_get(vo);
    if (!desc || desc->catalogue_node.empty()) {
      return {resultset::LegStatus::kUnreachable, {}};
    }
    auto it = boxes_.find(desc->catalogue_node);
    if (it == boxes_.end()) return {resultset::LegStatus::kUnreachable, {}};
    auto lfns = it->second->catalogue().find("/mg", q);
    std::vector<const catalog::FileEntry*> entries;
    for (const auto& lfn : lfns) entries.push_back(&it->second->catalogue().lookup(lfn));
    return {resultset::LegStatus::kOk, rows_for_entries(entries)};
  };
  return fedvo::supervo_route(directory_.topology, directory_.registry, root, querying_vo,
                              executor);
}

StorageElement* Deployment::adapter_se(const std::string& grid_id) {
  auto it = adapters_.find(grid_id);
  return it == adapters_.end() ? nullptr : it->second.se.get();
}

}  // namespace mg::gridcore
