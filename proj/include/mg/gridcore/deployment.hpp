#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mg/gridcore/gridbox.hpp"

// Assembles a grid: federation directory, one grid-box per node, keyring
// enrollment, foreign-grid adapters, and the periodic broker/optimizer/
// CE/FTD cycles. The transport is pluggable: the default bus dispatches
// in-process; simnet substitutes its framed, fault-injectable network.
namespace mg::gridcore {

struct NodeSpec {
  std::string node_id;
  std::string site;
  std::string vo;
};

struct DeploymentConfig {
  fedvo::Mode mode = fedvo::Mode::kP2;
  std::vector<NodeSpec> nodes;
  std::string central_node;  // P1: catalogue holder; P2: the central VO's node
  std::string central_vo = "mgcentral";
  std::uint64_t seed = 1;
  std::vector<std::string> client_hosts;  // extra host-certificate enrollments
};

inline constexpr std::int64_t kDeploymentEpoch = 1088640000;  // 2004-07-01T00:00:00Z

class Deployment {
 public:
  using BusFactory = std::function<std::unique_ptr<NodeBus>(Deployment&)>;

  explicit Deployment(DeploymentConfig config, BusFactory bus_factory = {});
  ~Deployment();

  GridBox& box(const std::string& node_id);
  const std::vector<std::string>& node_ids() const { return node_order_; }
  FederationDirectory& directory() { return directory_; }
  NodeBus& bus() { return proxy_; }

  // Virtual clock shared by every box (simnet drives it via set_now).
  std::int64_t now() const { return now_; }
  void set_now(std::int64_t t) { now_ = t; }
  void advance_time(std::int64_t seconds) { now_ += seconds; }

  // Fixture/administration helpers.
  void add_user(const std::string& vo, const std::string& user, const std::string& password,
                const std::vector<fedvo::Permission>& perms);
  void attach_foreign(const fedvo::ForeignGridAdapter& adapter);  // errors: Duplicate
  void detach_foreign(const std::string& grid_id);
  std::size_t live_sessions() const;
  void set_mode(fedvo::Mode mode);  // errors: InvalidTopology (requires quiesce)

  // Client-side calls, routed through the bus so they traverse the real
  // transport (frames in simnet, sockets under the daemon).
  std::string client_login(const std::string& client_host, const std::string& node,
                           const std::string& principal, const std::string& password);
  wire::Payload client_call(const std::string& client_host, const std::string& node,
                            std::map<std::string, std::string> headers,
                            util::Bytes body = {});

  // The request router the buses call on delivery.
  wire::Payload dispatch_request(const std::string& to_host, const std::string& from_host,
                                 const wire::Payload& req);

  // --- periodic cycles (explicitly ticked) ---
  std::vector<ResourceAd> gather_ads() const;
  std::vector<std::string> tick_broker();
  std::vector<StagingDecision> tick_optimizer();
  void tick_ce();
  void tick_ftd();
  // Broker -> optimizer -> FTD -> CE rounds until the queues settle.
  void run_job_cycles(int max_rounds = 8);

  // Governance scan consumed by fedvo::audit_governance.
  std::vector<fedvo::HostedRecord> governance_records() const;
  fedvo::GovernanceReport run_governance_audit() const;

  // Super-VO fan-out over the attached tree.
  resultset::ResultSet supervo_route(const std::string& root, const std::string& querying_vo,
                                     const std::string& query_text, int query_year);

  // Home catalogue of a logical name (site prefix or submit-node results).
  std::string home_node_of(const std::string& lfn) const;

  StorageElement* adapter_se(const std::string& grid_id);

 private:
  wire::Payload handle_adapter_request(const std::string& grid_id,
                                       const std::string& from_host,
                                       const wire::Payload& req);

  struct BusProxy : NodeBus {
    wire::Payload request(const std::string& from_node, const std::string& to_node,
                          wire::Payload req) override;
    NodeBus* target = nullptr;
  };

  struct AdapterState {
    fedvo::ForeignGridAdapter adapter;
    std::unique_ptr<StorageElement> se;
    AlgorithmRegistry algorithms;
  };

  DeploymentConfig config_;
  FederationDirectory directory_;
  BusProxy proxy_;
  std::unique_ptr<NodeBus> bus_;
  std::map<std::string, std::unique_ptr<GridBox>> boxes_;
  std::vector<std::string> node_order_;
  std::map<std::string, AdapterState> adapters_;
  std::int64_t now_ = kDeploymentEpoch;
};

// The default in-process bus: direct dispatch, no frames. Unit tests use
// it; simnet and the TCP daemon provide framed transports.
class DirectBus : public NodeBus {
 public:
  explicit DirectBus(Deployment& deployment) : deployment_(deployment) {}
  wire::Payload request(const std::string& from_node, const std::string& to_node,
                        wire::Payload req) override;

 private:
  Deployment& deployment_;
  std::uint64_t next_correlation_ = 1;
};

}  // namespace mg::gridcore
