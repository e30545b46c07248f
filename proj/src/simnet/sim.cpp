#include "mg/simnet/sim.hpp"

#include <algorithm>
#include <set>

namespace mg::simnet {

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

SimConfig default_p1_config(std::uint64_t seed) {
  SimConfig config;
  config.mode = fedvo::Mode::kP1;
  config.nodes = {
      {"cern", "cern", "mammogrid"},
      {"oxford", "oxford", "mammogrid"},
      {"cambridge", "cambridge", "mammogrid"},
      {"udine", "udine", "mammogrid"},
  };
  config.central_node = "cern";
  config.seed = seed;
  return config;
}

SimConfig default_p2_config(std::uint64_t seed) {
  SimConfig config;
  config.mode = fedvo::Mode::kP2;
  config.nodes = {
      {"cern", "cern", "mgcentral"},
      {"oxford", "oxford", "oxford-vo"},
      {"cambridge", "cambridge", "cambridge-vo"},
      {"udine", "udine", "udine-vo"},
  };
  config.central_node = "cern";
  config.central_vo = "mgcentral";
  config.seed = seed;
  return config;
}

std::string EventRecord::render() const {
  return std::to_string(tick) + "|" + std::to_string(seq) + "|" + node + "|" + kind + "|" +
         util::percent_encode(detail);
}

SimNet::SimNet(SimConfig config)
    : config_(std::move(config)), jitter_rng_(config_.seed ^ 0x5a5a5a5aULL) {
  if (config_.nodes.empty()) fail("BadConfig", "topology needs at least one node");
  {
    std::set<std::string> seen;
    for (const auto& n : config_.nodes) {
      if (!seen.insert(n.node_id).second) fail("BadConfig", "duplicate node " + n.node_id);
    }
  }
  gridcore::DeploymentConfig dc;
  dc.mode = config_.mode;
  for (const auto& n : config_.nodes) dc.nodes.push_back({n.node_id, n.site, n.vo});
  dc.central_node = config_.central_node;
  dc.central_vo = config_.central_vo;
  dc.seed = config_.seed;
  dc.client_hosts = config_.client_hosts;

  deployment_ = std::make_unique<gridcore::Deployment>(
      std::move(dc), [this](gridcore::Deployment& dep) -> std::unique_ptr<gridcore::NodeBus> {
        return std::make_unique<SimBus>(*this, dep);
      });

  // Symmetric full mesh with the default latency; per-node keyring copies.
  std::vector<std::string> hosts;
  for (const auto& n : config_.nodes) hosts.push_back(n.node_id);
  for (const auto& c : config_.client_hosts) hosts.push_back(c);
  for (const auto& a : hosts) {
    keyrings_[a] = deployment_->directory().keyring;
    wire_rngs_[a] = std::make_unique<crypto::Rng>(config_.seed ^ fnv1a("wire:" + a));
    for (const auto& b : hosts) {
      if (a == b) continue;
      links_[{a, b}].latency = config_.default_latency;
    }
  }
}

SimNet::~SimNet() = default;

SimNet::Link& SimNet::link(const std::string& from, const std::string& to) {
  auto it = links_.find({from, to});
  if (it == links_.end()) fail("UnknownLink", from + " -> " + to);
  return it->second;
}

void SimNet::partition(const std::string& a, const std::string& b) {
  link(a, b).partitioned = true;
  link(b, a).partitioned = true;
  note("net", "partition", a + " <-> " + b);
}

void SimNet::heal(const std::string& a, const std::string& b) {
  link(a, b).partitioned = false;
  link(b, a).partitioned = false;
  note("net", "heal", a + " <-> " + b);
}

void SimNet::set_delay(const std::string& a, const std::string& b, std::uint64_t ticks) {
  link(a, b).extra_delay = ticks;
  link(b, a).extra_delay = ticks;
  note("net", "delay", a + " <-> " + b + " +" + std::to_string(ticks));
}

void SimNet::corrupt(const std::string& a, const std::string& b, std::uint64_t frame_no) {
  Link& l = link(a, b);
  l.corrupt_at = l.frames_sent + frame_no;  // the frame_no-th frame from now
  note("net", "corrupt-armed", a + " -> " + b + " frame " + std::to_string(frame_no));
}

void SimNet::schedule(std::uint64_t delay_ticks, const std::string& node,
                      const std::string& kind, const std::string& detail, EventFn fn,
                      bool jittered) {
  PendingEvent ev;
  ev.tick = tick_ + delay_ticks;
  ev.jitter = jittered ? jitter_rng_.next_u64() : 0;
  ev.seq = next_seq_++;
  ev.node = node;
  ev.kind = kind;
  ev.detail = detail;
  ev.fn = std::move(fn);
  heap_.push_back(std::move(ev));
  std::push_heap(heap_.begin(), heap_.end(), std::greater<>{});
}

bool SimNet::step() {
  if (heap_.empty()) return false;
  std::pop_heap(heap_.begin(), heap_.end(), std::greater<>{});
  PendingEvent ev = std::move(heap_.back());
  heap_.pop_back();
  tick_ = std::max(tick_, ev.tick);
  deployment_->set_now(gridcore::kDeploymentEpoch + static_cast<std::int64_t>(tick_));
  log_.push_back({tick_, ++exec_seq_, ev.node, ev.kind, ev.detail});
  if (ev.fn) ev.fn();
  return true;
}

void SimNet::run_all() {
  while (step()) {
  }
}

bool SimNet::run_until(const std::function<bool()>& pred, std::uint64_t deadline_tick) {
  while (!pred()) {
    if (heap_.empty()) return false;
    // Peek: do not run past the deadline.
    const PendingEvent& next = heap_.front();
    if (next.tick > deadline_tick) return false;
    step();
  }
  return true;
}

void SimNet::note(const std::string& node, const std::string& kind,
                  const std::string& detail) {
  log_.push_back({tick_, ++exec_seq_, node, kind, detail});
}

std::string SimNet::render_event_log() const {
  std::string out;
  for (const auto& rec : log_) {
    out += rec.render();
    out += '\n';
  }
  return out;
}

wire::Keyring& SimNet::node_keyring(const std::string& host) {
  auto it = keyrings_.find(host);
  if (it == keyrings_.end()) fail("UnknownNode", host);
  return it->second;
}

crypto::Rng& SimNet::wire_rng(const std::string& host) {
  auto it = wire_rngs_.find(host);
  if (it == wire_rngs_.end()) fail("UnknownNode", host);
  return *it->second;
}

// --- SimBus -----------------------------------------------------------------

SimBus::SimBus(SimNet& net, gridcore::Deployment& deployment)
    : net_(net), deployment_(deployment) {}

void SimBus::reset_channel(const std::string& from, const std::string& to) {
  channels_.erase({from, to});
}

void SimBus::fail_channel(const ChannelPtr& ch, const std::string& code,
                          const std::string& where) {
  ch->state = Channel::State::kFailed;
  ch->fail_code = code;
  net_.note(where, "channel-failed", ch->initiator + " -> " + ch->responder + " " + code);
}

void SimBus::send_frame(const ChannelPtr& ch, bool from_initiator,
                        const std::string& payload_text) {
  const std::string& from = from_initiator ? ch->initiator : ch->responder;
  const std::string& to = from_initiator ? ch->responder : ch->initiator;
  SimNet::Link& l = net_.link(from, to);
  if (l.partitioned) fail("NoRoute", from + " -> " + to + " is partitioned");

  wire::ChannelCrypto& crypto = from_initiator ? *ch->init_crypto : *ch->resp_crypto;
  util::Bytes frame = crypto.encode(payload_text);

  l.frames_sent += 1;
  if (l.corrupt_at && l.frames_sent == *l.corrupt_at) {
    // Flip one payload byte in flight; authentication must catch it.
    std::size_t offset = 4 + (frame.size() - 4 - wire::kMacLen) / 2;
    frame[offset] ^= 0x01;
    l.corrupt_at.reset();
    net_.note("net", "corrupt-applied", from + " -> " + to);
  }
  net_.frames_.push_back({from, to, frame});
  (from_initiator ? ch->to_responder : ch->to_initiator).push_back(std::move(frame));

  net_.schedule(l.latency + l.extra_delay, to, "deliver-frame", from + " -> " + to,
                [this, ch, from_initiator] { deliver(ch, from_initiator); }, true);
}

void SimBus::deliver(const ChannelPtr& ch, bool to_responder) {
  const std::string& to = to_responder ? ch->responder : ch->initiator;
  auto& fifo = to_responder ? ch->to_responder : ch->to_initiator;
  if (fifo.empty()) return;
  util::Bytes frame = std::move(fifo.front());
  fifo.pop_front();
  if (ch->state == Channel::State::kFailed) return;

  wire::ChannelCrypto& crypto = to_responder ? *ch->resp_crypto : *ch->init_crypto;
  std::string payload_text;
  try {
    payload_text = crypto.decode(frame);
  } catch (const Error& e) {
    net_.note(to, "frame-error", e.code());
    fail_channel(ch, to_responder ? "ChannelClosed" : e.code(), to);
    return;
  }
  wire::Payload payload;
  try {
    payload = wire::Payload::parse(payload_text);
  } catch (const Error& e) {
    net_.note(to, "frame-error", e.code());
    fail_channel(ch, "MalformedPayload", to);
    return;
  }
  if (to_responder) {
    on_payload_at_responder(ch, payload);
  } else {
    on_payload_at_initiator(ch, payload);
  }
}

void SimBus::on_payload_at_responder(const ChannelPtr& ch, const wire::Payload& payload) {
  if (payload.type == "HELLO") {
    try {
      ch->hs_resp = std::make_unique<wire::HandshakeResponder>(
          net_.node_keyring(ch->responder), ch->responder, net_.wire_rng(ch->responder));
      wire::Payload ack = ch->hs_resp->on_hello(payload);
      send_frame(ch, false, ack.render());
    } catch (const Error& e) {
      net_.note(ch->responder, "handshake-rejected", e.code());
      send_frame(ch, false, wire::make_error(0, e.code(), e.what()).render());
    }
    return;
  }
  if (payload.type == "HELLO-ACK") {
    try {
      ch->hs_resp->on_confirm(payload);
      ch->resp_crypto = std::make_unique<wire::ChannelCrypto>(ch->hs_resp->channel_key());
      net_.note(ch->responder, "channel-up", ch->initiator + " -> " + ch->responder);
    } catch (const Error& e) {
      net_.note(ch->responder, "handshake-rejected", e.code());
      send_frame(ch, false, wire::make_error(0, e.code(), e.what()).render());
      fail_channel(ch, e.code(), ch->responder);
    }
    return;
  }
  if (payload.type == "ERR") {
    fail_channel(ch, payload.header("code"), ch->responder);
    return;
  }
  if (payload.type != "REQ") {
    net_.note(ch->responder, "frame-error", "unexpected " + payload.type);
    return;
  }
  auto assembled = ch->resp_assembler.feed(payload);
  if (!assembled) return;
  wire::Payload response =
      deployment_.dispatch_request(ch->responder, ch->initiator, *assembled);
  for (const auto& part : wire::split_for_send(response, max_body_)) {
    send_frame(ch, false, part.render());
  }
}

void SimBus::on_payload_at_initiator(const ChannelPtr& ch, const wire::Payload& payload) {
  if (payload.type == "HELLO-ACK") {
    try {
      wire::Payload confirm = ch->hs_init->on_hello_ack(payload);
      // The confirmation still travels under the null key; only after it
      // is sent do both ends switch to the channel key.
      send_frame(ch, true, confirm.render());
      ch->init_crypto = std::make_unique<wire::ChannelCrypto>(ch->hs_init->channel_key());
      ch->state = Channel::State::kEstablished;
    } catch (const Error& e) {
      fail_channel(ch, e.code(), ch->initiator);
    }
    return;
  }
  if (payload.type == "ERR" && ch->state == Channel::State::kHandshake) {
    fail_channel(ch, payload.header("code"), ch->initiator);
    return;
  }
  if (payload.type == "RSP" || payload.type == "ERR") {
    auto assembled = ch->init_assembler.feed(payload);
    if (!assembled) return;
    auto it = ch->pending.find(assembled->correlation_id);
    if (it == ch->pending.end()) {
      net_.note(ch->initiator, "stale-response",
                "correlation " + std::to_string(assembled->correlation_id));
      return;
    }
    it->second = std::move(*assembled);
    return;
  }
  net_.note(ch->initiator, "frame-error", "unexpected " + payload.type);
}

SimBus::ChannelPtr SimBus::ensure_channel(const std::string& from, const std::string& to) {
  auto key = std::make_pair(from, to);
  auto it = channels_.find(key);
  if (it != channels_.end() && it->second->state == Channel::State::kFailed) {
    channels_.erase(it);
    it = channels_.end();
  }
  if (it != channels_.end()) return it->second;

  auto ch = std::make_shared<Channel>();
  ch->initiator = from;
  ch->responder = to;
  ch->init_crypto = std::make_unique<wire::ChannelCrypto>(wire::null_key());
  ch->resp_crypto = std::make_unique<wire::ChannelCrypto>(wire::null_key());
  ch->hs_init = std::make_unique<wire::HandshakeInitiator>(net_.node_keyring(from), from, to,
                                                           net_.wire_rng(from));
  channels_[key] = ch;
  send_frame(ch, true, ch->hs_init->hello().render());
  bool ok = net_.run_until([&ch] { return ch->state != Channel::State::kHandshake; },
                           net_.tick() + net_.config().request_timeout_ticks);
  if (!ok && ch->state == Channel::State::kHandshake) {
    fail_channel(ch, "Timeout", from);
  }
  if (ch->state == Channel::State::kFailed) {
    std::string code = ch->fail_code;
    channels_.erase(key);
    fail(code, "handshake " + from + " -> " + to + " failed");
  }
  return ch;
}

wire::Payload SimBus::request(const std::string& from_node, const std::string& to_node,
                              wire::Payload req) {
  if (from_node == to_node) {
    // Local endpoints dispatch in-process; no network frames are emitted.
    req.correlation_id = local_correlation_++;
    wire::Payload rsp = deployment_.dispatch_request(to_node, from_node, req);
    if (rsp.type == "ERR") fail(rsp.header("code"), rsp.header("message"));
    return rsp;
  }
  if (!deployment_.directory().is_node(to_node) &&
      !deployment_.directory().foreign_grids.count(to_node)) {
    fail("UnknownNode", to_node);
  }
  {
    // Route check before any frame leaves.
    SimNet::Link& l = net_.link(from_node, to_node);
    if (l.partitioned) fail("NoRoute", from_node + " -> " + to_node);
  }
  ChannelPtr ch = ensure_channel(from_node, to_node);
  std::uint64_t corr = ch->next_correlation++;
  req.correlation_id = corr;
  ch->pending[corr] = std::nullopt;
  for (const auto& part : wire::split_for_send(req, max_body_)) {
    send_frame(ch, true, part.render());
  }
  std::uint64_t deadline = net_.tick() + net_.config().request_timeout_ticks;
  bool done = net_.run_until(
      [&ch, corr] {
        if (ch->state == Channel::State::kFailed) return true;
        auto it = ch->pending.find(corr);
        return it != ch->pending.end() && it->second.has_value();
      },
      deadline);
  if (ch->state == Channel::State::kFailed) {
    std::string code = ch->fail_code;
    ch->pending.erase(corr);
    fail(code, "channel " + from_node + " -> " + to_node + " failed");
  }
  if (!done) {
    ch->pending.erase(corr);
    fail("Timeout", "no response from " + to_node + " within deadline");
  }
  wire::Payload rsp = std::move(*ch->pending.at(corr));
  ch->pending.erase(corr);
  if (rsp.type == "ERR") fail(rsp.header("code"), rsp.header("message"));
  return rsp;
}

std::unique_ptr<SimNet> build_topology(const SimConfig& config) {
  return std::make_unique<SimNet>(config);
}

}  // namespace mg::simnet
