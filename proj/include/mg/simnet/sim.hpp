#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mg/gridcore/deployment.hpp"
#include "mg/wire.hpp"

// Deterministic in-process multi-node harness: a virtual clock that only
// advances when the ready queue drains, a seeded scheduler whose jitter
// reorders concurrent deliveries across seeds, framed transport between
// boxes, and latency/partition/corruption injection per link.
namespace mg::simnet {

struct SimNodeSpec {
  std::string node_id;
  std::string site;
  std::string vo;
};

struct SimConfig {
  fedvo::Mode mode = fedvo::Mode::kP2;
  std::vector<SimNodeSpec> nodes;
  std::string central_node = "cern";
  std::string central_vo = "mgcentral";
  std::uint64_t seed = 1;
  std::uint64_t default_latency = 1;
  std::uint64_t request_timeout_ticks = 30;
  std::vector<std::string> client_hosts = {"workstation"};
};

// The Fig-4 layout: central node at cern plus local nodes at oxford,
// cambridge and udine. P1 keeps everything in one VO; P2 gives each
// hospital its own VO with cern as the central (routing-only) VO.
SimConfig default_p1_config(std::uint64_t seed = 1);
SimConfig default_p2_config(std::uint64_t seed = 1);

struct EventRecord {
  std::uint64_t tick = 0;
  std::uint64_t seq = 0;
  std::string node;
  std::string kind;
  std::string detail;

  std::string render() const;  // "tick|seq|node|kind|detail"
};

struct CapturedFrame {
  std::string from;
  std::string to;
  util::Bytes bytes;
};

class SimNet {
 public:
  explicit SimNet(SimConfig config);
  ~SimNet();

  gridcore::Deployment& deployment() { return *deployment_; }
  const SimConfig& config() const { return config_; }
  std::uint64_t tick() const { return tick_; }

  // --- fault injection (errors: UnknownLink) ---
  void partition(const std::string& a, const std::string& b);
  void heal(const std::string& a, const std::string& b);
  void set_delay(const std::string& a, const std::string& b, std::uint64_t ticks);
  void corrupt(const std::string& a, const std::string& b, std::uint64_t frame_no);

  // --- event engine ---
  using EventFn = std::function<void()>;
  void schedule(std::uint64_t delay_ticks, const std::string& node, const std::string& kind,
                const std::string& detail, EventFn fn, bool jittered);
  bool step();                 // executes one event; false when drained
  void run_all();
  // Pumps until pred() or the deadline tick passes or the queue drains.
  bool run_until(const std::function<bool()>& pred, std::uint64_t deadline_tick);

  void note(const std::string& node, const std::string& kind, const std::string& detail);

  const std::vector<EventRecord>& event_log() const { return log_; }
  std::string render_event_log() const;
  const std::vector<CapturedFrame>& frames() const { return frames_; }

  // Per-node keyrings (copies of the shared enrollment; tests prune them).
  wire::Keyring& node_keyring(const std::string& host);
  crypto::Rng& wire_rng(const std::string& host);

 private:
  friend class SimBus;

  struct Link {
    std::uint64_t latency = 1;
    std::uint64_t extra_delay = 0;
    bool partitioned = false;
    std::uint64_t frames_sent = 0;
    std::optional<std::uint64_t> corrupt_at;
  };

  struct PendingEvent {
    std::uint64_t tick;
    std::uint64_t jitter;
    std::uint64_t seq;
    std::string node;
    std::string kind;
    std::string detail;
    EventFn fn;
    bool operator>(const PendingEvent& other) const {
      return std::tie(tick, jitter, seq) > std::tie(other.tick, other.jitter, other.seq);
    }
  };

  Link& link(const std::string& from, const std::string& to);

  SimConfig config_;
  std::unique_ptr<gridcore::Deployment> deployment_;
  std::vector<PendingEvent> heap_;
  std::uint64_t tick_ = 0;
  std::uint64_t next_seq_ = 1;
  std::uint64_t exec_seq_ = 0;
  crypto::Rng jitter_rng_;
  std::map<std::pair<std::string, std::string>, Link> links_;
  std::vector<EventRecord> log_;
  std::vector<CapturedFrame> frames_;
  std::map<std::string, wire::Keyring> keyrings_;
  std::map<std::string, std::unique_ptr<crypto::Rng>> wire_rngs_;
};

// The framed transport: mutual handshake per (initiator, responder) pair,
// HMAC-sealed frames through the virtual links, correlation-id
// multiplexing, chunk reassembly, and per-request timeouts.
class SimBus : public gridcore::NodeBus {
 public:
  SimBus(SimNet& net, gridcore::Deployment& deployment);

  wire::Payload request(const std::string& from_node, const std::string& to_node,
                        wire::Payload req) override;

  // Drops the established channel (tests use it to force re-handshakes).
  void reset_channel(const std::string& from, const std::string& to);

  void set_max_body(std::size_t n) { max_body_ = n; }

 private:
  struct Channel {
    std::string initiator;
    std::string responder;
    enum class State { kHandshake, kEstablished, kFailed } state = State::kHandshake;
    std::string fail_code;
    std::unique_ptr<wire::ChannelCrypto> init_crypto;   // initiator endpoint
    std::unique_ptr<wire::ChannelCrypto> resp_crypto;   // responder endpoint
    std::unique_ptr<wire::HandshakeInitiator> hs_init;
    std::unique_ptr<wire::HandshakeResponder> hs_resp;
    wire::ChunkAssembler init_assembler;
    wire::ChunkAssembler resp_assembler;
    std::uint64_t next_correlation = 1;
    std::map<std::uint64_t, std::optional<wire::Payload>> pending;
    // In-flight frames per direction; delivery preserves order.
    std::deque<util::Bytes> to_responder;
    std::deque<util::Bytes> to_initiator;
  };
  using ChannelPtr = std::shared_ptr<Channel>;

  ChannelPtr ensure_channel(const std::string& from, const std::string& to);
  void send_frame(const ChannelPtr& ch, bool from_initiator, const std::string& payload_text);
  void deliver(const ChannelPtr& ch, bool to_responder);
  void on_payload_at_responder(const ChannelPtr& ch, const wire::Payload& payload);
  void on_payload_at_initiator(const ChannelPtr& ch, const wire::Payload& payload);
  void fail_channel(const ChannelPtr& ch, const std::string& code, const std::string& where);

  SimNet& net_;
  gridcore::Deployment& deployment_;
  std::map<std::pair<std::string, std::string>, ChannelPtr> channels_;
  std::size_t max_body_ = 4 * 1024 * 1024;
  std::uint64_t local_correlation_ = 1;
};

// Builds a SimNet whose deployment transports everything through a SimBus.
std::unique_ptr<SimNet> build_topology(const SimConfig& config);

}  // namespace mg::simnet
