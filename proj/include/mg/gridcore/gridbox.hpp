#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mg/catalog.hpp"
#include "mg/dicomlite.hpp"
#include "mg/fedvo.hpp"
#include "mg/gridcore/audit.hpp"
#include "mg/gridcore/auth.hpp"
#include "mg/gridcore/broker.hpp"
#include "mg/gridcore/config_tree.hpp"
#include "mg/gridcore/plugins.hpp"
#include "mg/gridcore/storage_element.hpp"
#include "mg/gridcore/tasks.hpp"
#include "mg/queryfed.hpp"
#include "mg/resultset.hpp"
#include "mg/wire.hpp"

// A grid-box: the per-hospital node running the full service stack. All
// remote interaction flows through a NodeBus carrying MGP payloads; the
// only externally reachable services are auth, portal, dbproxy, ftd and
// vos — the catalogue itself is never exposed.
namespace mg::gridcore {

struct NodeIdentity {
  std::string node_id;
  std::string site;
  std::string vo;
  std::string host_id;  // host-certificate identity (== node_id by default)
};

class NodeBus {
 public:
  virtual ~NodeBus() = default;
  // Sends a REQ payload to to_node and returns the RSP payload. ERR
  // payloads surface as Error(code, message); transport failures as
  // NoRoute / Timeout / UnknownNode.
  virtual wire::Payload request(const std::string& from_node, const std::string& to_node,
                                wire::Payload req) = 0;
};

// The replicated static configuration every box reads at run time: VO
// registry and trust table, topology, node identities, signing keys,
// storage-element placement.
struct FederationDirectory {
  fedvo::VoRegistry registry;
  fedvo::Topology topology;
  std::string central_node;
  std::map<std::string, NodeIdentity> nodes;             // node_id keyed
  std::map<std::string, util::Bytes> vo_keys;            // VO signing keys
  std::map<std::string, dicomlite::AnonymizationKey> site_keys;
  std::map<std::string, std::string> se_to_node;         // se_id -> node/adapter
  std::map<std::string, fedvo::ForeignGridAdapter> foreign_grids;
  wire::Keyring keyring;

  // Deployment-wide hooks: session quiesce count for mode switches and the
  // governance scan over every box's catalogue and SE index.
  std::function<std::size_t()> live_session_counter;
  std::function<std::vector<fedvo::HostedRecord>()> governance_scan;

  std::string node_of_se(const std::string& se_id) const;
  std::optional<std::string> vo_of_node(const std::string& node_id) const;
  bool is_node(const std::string& host_id) const { return nodes.count(host_id) > 0; }
};

struct MammoAttrs {
  std::int64_t birth_year = 0;
  std::string laterality;
  std::string view;
  std::string study_date;  // ISO
  std::string site;
  std::string modality;
  std::string pseudonym;

  std::map<std::string, catalog::AttrValue> to_attr_map() const;
};

// Extracts the queryable attribute set from an anonymized record; the
// `site` attribute comes from the ingesting grid-box.
MammoAttrs extract_attrs(const dicomlite::DataSet& anonymized, const std::string& site);

class GridBox {
 public:
  GridBox(NodeIdentity identity, FederationDirectory& directory, NodeBus& bus,
          std::uint64_t rng_seed, std::function<std::int64_t()> now_fn);

  const NodeIdentity& identity() const { return identity_; }
  const std::string& se_id() const { return se_.id(); }
  std::int64_t now() const { return now_fn_(); }

  // --- services (owned) ---
  ConfigTree& config() { return config_; }
  AuditLog& audit() { return audit_; }
  AuthService& auth() { return auth_; }
  catalog::CatalogStore& catalogue() { return catalogue_; }
  const catalog::CatalogStore& catalogue() const { return catalogue_; }
  StorageElement& se() { return se_; }
  const StorageElement& se() const { return se_; }
  TaskQueue& tasks() { return tasks_; }
  const TaskQueue& tasks() const { return tasks_; }
  TransferQueue& transfers() { return transfers_; }
  const TransferQueue& transfers() const { return transfers_; }
  AlgorithmRegistry& algorithms() { return algorithms_; }
  crypto::Rng& rng() { return rng_; }

  std::size_t live_sessions() const;

  // --- config-backed knobs ---
  std::int64_t session_ttl() const;
  int ce_max_running() const;
  ResourceAd resource_ad(int queue_length) const;

  // --- high-level MI operations (invoked via the portal) ---
  SessionToken authenticate(const Credentials& creds);
  std::string mi_add(const Session& session, const util::Bytes& file_bytes,
                     const std::string& lfn);
  util::Bytes mi_retrieve(const Session& session, const std::string& lfn,
                          std::optional<std::uint32_t> version = {});
  std::uint32_t mi_update(const Session& session, const std::string& lfn,
                          const util::Bytes& file_bytes);
  resultset::ResultSet mi_query(const Session& session, const std::string& query_text,
                                std::optional<int> query_year = {});
  void mi_add_algorithm(const Session& session, const std::string& name,
                        const util::Bytes& artifact, const std::string& checksum);
  std::string mi_execute_algorithm(const Session& session, const std::string& name,
                                   const std::vector<std::string>& input_lfns,
                                   const std::string& output_lfn);
  std::string jobmanager_submit(const Session& session, const std::string& jdl_text);
  const Task& jobmanager_status(const std::string& task_id) const;

  // Admin verbs (require the admin role).
  void admin_execute(const Session& session, const std::string& verb,
                     const std::map<std::string, std::string>& args,
                     std::string* out = nullptr);

  // --- database proxy: the only route to the catalogue ---
  struct AuthContext {
    enum class Kind { kLocalSession, kPeerNode, kCredential } kind;
    const Session* session = nullptr;
    std::string peer_node;                     // kPeerNode
    std::optional<fedvo::CrossVOCredential> credential;  // kCredential
  };
  wire::Payload dbproxy_execute(const AuthContext& ctx, const wire::Payload& req);

  // --- VOS service: target-side trust check + credential signing ---
  std::string vos_co_sign(const std::string& principal, const std::string& origin_vo,
                          fedvo::Permission permission, const std::string& scope);

  // Origin-side credential acquisition (role check local, co-sign remote).
  std::string obtain_credential(const Session& session, const std::string& target_vo,
                                fedvo::Permission permission, const std::string& scope);

  // --- wire server side: full request dispatch ---
  wire::Payload handle_request(const std::string& peer_host, const wire::Payload& req);

  // --- periodic service cycles (driven by simnet ticks or daemon timers) ---
  // Matches WAITING tasks in this box's queue against `ads`.
  std::vector<std::string> broker_tick(const std::vector<ResourceAd>& ads);
  std::vector<StagingDecision> optimizer_tick(const std::vector<ResourceAd>& ads);
  // Executes one ASSIGNED task belonging to this box's CE. `register_at`
  // is the box whose catalogue holds the task's output lfn (its submit
  // node); cross-node registration travels over the bus.
  void ce_execute(Task& task, TaskQueue& queue, const std::string& register_at_node);
  // Runs one WAITING transfer whose destination SE is this box's: pulls
  // from the source over an authenticated channel, verifies the digest,
  // stores, and registers the replica at `catalogue_node`.
  void ftd_transfer(TransferRequest& req, const std::string& catalogue_node);

  // Data-locality helpers shared with the broker/optimizer wiring.
  bool se_holds_lfn(const std::string& lfn, const std::string& se_id) const;
  std::optional<InputInfo> resolve_input(const std::string& lfn) const;

  // Role check against the VO registry.
  bool principal_holds(const std::string& principal, fedvo::Permission p) const;

 private:
  friend class Deployment;

  std::string draw_guid();
  std::string object_key(const std::string& guid, std::uint32_t version) const;
  const catalog::FileEntry* locate_entry(const std::string& lfn,
                                         std::string* home_node) const;
  catalog::FileEntry fetch_remote_entry(const std::string& node,
                                        const std::string& lfn,
                                        const std::string& credential) const;
  void mirror_to_central(const std::string& lfn, const MammoAttrs& attrs,
                         const catalog::PhysicalLocation& loc, std::uint64_t size,
                         const std::string& checksum, bool is_update,
                         const std::string& guid);
  wire::Payload portal_dispatch(const std::string& token, const wire::Payload& request);
  util::Bytes fetch_object_bytes(const std::string& se_id, const std::string& key,
                                 const std::string& expected_checksum);

  NodeIdentity identity_;
  FederationDirectory& directory_;
  NodeBus& bus_;
  crypto::Rng rng_;
  std::function<std::int64_t()> now_fn_;

  ConfigTree config_;
  AuditLog audit_;
  AuthService auth_;
  catalog::CatalogStore catalogue_;
  StorageElement se_;
  TaskQueue tasks_;
  TransferQueue transfers_;
  AlgorithmRegistry algorithms_;
  std::uint64_t credential_counter_ = 1;
};

// Entry rendering for dbproxy lookup responses.
std::string render_entry_wire(const catalog::FileEntry& entry);
catalog::FileEntry parse_entry_wire(const std::string& text);

// Rows for dbproxy find responses: origin_vo is the entry's owner VO.
std::vector<resultset::Row> rows_for_entries(const std::vector<const catalog::FileEntry*>& entries);

}  // namespace mg::gridcore
