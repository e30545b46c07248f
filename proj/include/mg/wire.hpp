#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mg/crypto.hpp"
#include "mg/error.hpp"
#include "mg/util.hpp"

// Framed request/response protocol between grid-boxes: MGP payloads inside
// length-prefixed HMAC-authenticated frames, host-certificate mutual
// authentication (the VPN emulation), and replay rejection via per-channel
// sequence counters.
namespace mg::wire {

using util::Bytes;

inline constexpr std::size_t kMaxFrameLen = 16 * 1024 * 1024;  // payload+mac cap
inline constexpr std::size_t kMacLen = 32;

// --- Payload -----------------------------------------------------------------

// First line `MGP/1 <TYPE> <correlation-id>`, percent-encoded `key=value`
// header lines, a blank line, then an optional base64 body.
struct Payload {
  std::string type;  // REQ, RSP, ERR, HELLO, HELLO-ACK
  std::uint64_t correlation_id = 0;
  std::map<std::string, std::string> headers;
  Bytes body;

  bool operator==(const Payload&) const = default;

  std::string render() const;
  static Payload parse(const std::string& text);

  const std::string& header(const std::string& key) const;  // throws MalformedPayload
  std::optional<std::string> maybe_header(const std::string& key) const;
};

bool valid_payload_type(std::string_view type);

Payload make_request(std::uint64_t correlation_id,
                     std::map<std::string, std::string> headers, Bytes body = {});
Payload make_response(std::uint64_t correlation_id,
                      std::map<std::string, std::string> headers, Bytes body = {});
Payload make_error(std::uint64_t correlation_id, const std::string& code,
                   const std::string& message);

// --- Frames ------------------------------------------------------------------

// Frame layout: u32be length (= |payload| + 32) || payload bytes || mac.
// mac = HMAC-SHA256(channel key, be64(sequence) || payload); the sequence
// is the channel's per-direction counter, so replayed frames are
// distinguishable from tampered ones.
class ChannelCrypto {
 public:
  explicit ChannelCrypto(Bytes key32);

  Bytes encode(const std::string& payload_text);   // throws Oversize
  std::string decode(const Bytes& frame);          // throws MacMismatch, Oversize,
                                                   // ReplayDetected, MalformedFrame
  std::uint64_t send_seq() const { return send_seq_; }
  const Bytes& key() const { return key_; }

 private:
  Bytes key_;
  std::uint64_t send_seq_ = 1;
  std::uint64_t recv_seq_ = 1;
  std::set<std::string> seen_macs_;
};

// The all-zero key under which pre-handshake (HELLO) traffic is framed.
Bytes null_key();

// --- Keyring -------------------------------------------------------------------

struct HostCertificate {
  std::string host_id;
  Bytes shared_secret;  // 32 bytes, never transmitted
};

// File format: one `HOST <host_id> <base64 secret>` line per host.
class Keyring {
 public:
  void enroll(const std::string& host_id, const Bytes& secret);
  void remove(const std::string& host_id);
  const Bytes* secret_for(const std::string& host_id) const;

  std::string render() const;
  static Keyring parse(const std::string& text);
  static Keyring load_file(const std::string& path);
  void save_file(const std::string& path) const;

 private:
  std::map<std::string, Bytes> hosts_;
};

// --- Handshake ------------------------------------------------------------------

// Three messages: HELLO (initiator id + nonce), HELLO-ACK (responder id +
// nonce + responder proof), HELLO-ACK (initiator proof). Each proof is an
// HMAC over both nonces under the prover's own secret, verified by the
// peer against its keyring copy. Channel key = HMAC(proofs, nonces);
// neither secret crosses the wire.
class HandshakeInitiator {
 public:
  HandshakeInitiator(const Keyring& keyring, std::string self_id, std::string peer_id,
                     crypto::Rng& rng);

  Payload hello() const;
  // Verifies the responder proof and produces the confirmation message.
  Payload on_hello_ack(const Payload& ack);  // throws UnknownHost, BadProof
  const Bytes& channel_key() const;          // valid after on_hello_ack

 private:
  const Keyring& keyring_;
  std::string self_id_;
  std::string peer_id_;
  Bytes nonce_;
  Bytes channel_key_;
  bool done_ = false;
};

class HandshakeResponder {
 public:
  HandshakeResponder(const Keyring& keyring, std::string self_id, crypto::Rng& rng);

  Payload on_hello(const Payload& hello);    // throws UnknownHost
  void on_confirm(const Payload& confirm);   // throws BadProof
  const std::string& peer_id() const { return peer_id_; }
  const Bytes& channel_key() const;          // valid after on_confirm

 private:
  const Keyring& keyring_;
  std::string self_id_;
  std::string peer_id_;
  Bytes nonce_;
  Bytes peer_nonce_;
  Bytes channel_key_;
  bool done_ = false;
};

// --- Chunking --------------------------------------------------------------------

// Payloads whose body exceeds `max_body` split into numbered parts
// (`chunk=<i>/<n>` headers, shared correlation id). A single-part payload
// passes through untouched.
std::vector<Payload> split_for_send(const Payload& payload, std::size_t max_body);

class ChunkAssembler {
 public:
  // Returns the reassembled payload once all parts arrived.
  std::optional<Payload> feed(Payload part);

 private:
  std::map<std::uint64_t, std::pair<Payload, std::size_t>> pending_;
};

}  // namespace mg::wire
