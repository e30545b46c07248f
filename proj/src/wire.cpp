#include "mg/wire.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mg::wire {

// --- Payload ---------------------------------------------------------------

bool valid_payload_type(std::string_view type) {
  return type == "REQ" || type == "RSP" || type == "ERR" || type == "HELLO" ||
         type == "HELLO-ACK";
}

std::string Payload::render() const {
  std::string out = "MGP/1 " + type + " " + std::to_string(correlation_id) + "\n";
  for (const auto& [key, value] : headers) {
    out += util::percent_encode(key);
    out += '=';
    out += util::percent_encode(value);
    out += '\n';
  }
  out += '\n';
  if (!body.empty()) out += util::base64_encode(body);
  return out;
}

Payload Payload::parse(const std::string& text) {
  std::size_t line_end = text.find('\n');
  if (line_end == std::string::npos) fail("MalformedPayload", "missing first line terminator");
  std::string first = text.substr(0, line_end);
  auto parts = util::split(first, ' ');
  if (parts.size() != 3 || parts[0] != "MGP/1") {
    fail("MalformedPayload", "bad first line: " + first);
  }
  Payload p;
  p.type = parts[1];
  if (!valid_payload_type(p.type)) fail("MalformedPayload", "bad type " + p.type);
  try {
    p.correlation_id = std::stoull(parts[2]);
  } catch (const std::exception&) {
    fail("MalformedPayload", "bad correlation id " + parts[2]);
  }

  std::size_t pos = line_end + 1;
  while (true) {
    std::size_t next = text.find('\n', pos);
    if (next == std::string::npos) fail("MalformedPayload", "missing blank separator line");
    std::string line = text.substr(pos, next - pos);
    pos = next + 1;
    if (line.empty()) break;  // end of headers
    auto eq = line.find('=');
    if (eq == std::string::npos) fail("MalformedPayload", "header without '=': " + line);
    auto key = util::percent_decode(line.substr(0, eq));
    auto value = util::percent_decode(line.substr(eq + 1));
    if (!key || !value) fail("MalformedPayload", "bad header encoding: " + line);
    p.headers[*key] = *value;
  }
  if (pos < text.size()) {
    auto body = util::base64_decode(std::string_view(text).substr(pos));
    if (!body) fail("MalformedPayload", "bad body base64");
    p.body = std::move(*body);
  }
  return p;
}

const std::string& Payload::header(const std::string& key) const {
  auto it = headers.find(key);
  if (it == headers.end()) fail("MalformedPayload", "missing header " + key);
  return it->second;
}

std::optional<std::string> Payload::maybe_header(const std::string& key) const {
  auto it = headers.find(key);
  if (it == headers.end()) return std::nullopt;
  return it->second;
}

Payload make_request(std::uint64_t correlation_id,
                     std::map<std::string, std::string> headers, Bytes body) {
  return Payload{"REQ", correlation_id, std::move(headers), std::move(body)};
}

Payload make_response(std::uint64_t correlation_id,
                      std::map<std::string, std::string> headers, Bytes body) {
  return Payload{"RSP", correlation_id, std::move(headers), std::move(body)};
}

Payload make_error(std::uint64_t correlation_id, const std::string& code,
                   const std::string& message) {
  return Payload{"ERR", correlation_id, {{"code", code}, {"message", message}}, {}};
}

// --- Frames ------------------------------------------------------------------

Bytes null_key() {
  return Bytes(32, 0);
}

ChannelCrypto::ChannelCrypto(Bytes key32) : key_(std::move(key32)) {
  if (key_.size() != 32) fail("MalformedFrame", "channel key must be 32 bytes");
}

namespace {

Bytes mac_input(std::uint64_t seq, const std::string& payload) {
  Bytes input;
  util::put_u64be(input, seq);
  input.insert(input.end(), payload.begin(), payload.end());
  return input;
}

}  // namespace

Bytes ChannelCrypto::encode(const std::string& payload_text) {
  std::size_t total = payload_text.size() + kMacLen;
  if (total > kMaxFrameLen) {
    fail("Oversize", "frame of " + std::to_string(total) + " bytes exceeds 16 MiB cap");
  }
  auto mac = crypto::hmac_sha256(key_, mac_input(send_seq_, payload_text));
  ++send_seq_;
  Bytes out;
  out.reserve(4 + total);
  util::put_u32be(out, static_cast<std::uint32_t>(total));
  out.insert(out.end(), payload_text.begin(), payload_text.end());
  out.insert(out.end(), mac.begin(), mac.end());
  return out;
}

std::string ChannelCrypto::decode(const Bytes& frame) {
  if (frame.size() < 4 + kMacLen) fail("MalformedFrame", "frame shorter than header+mac");
  std::uint32_t declared = util::get_u32be(frame.data());
  if (declared > kMaxFrameLen) fail("Oversize", "declared frame length exceeds cap");
  if (declared != frame.size() - 4) {
    fail("MalformedFrame", "declared length does not match frame size");
  }
  std::string payload(reinterpret_cast<const char*>(frame.data() + 4),
                      frame.size() - 4 - kMacLen);
  Bytes mac(frame.end() - kMacLen, frame.end());

  auto expected = crypto::hmac_sha256(key_, mac_input(recv_seq_, payload));
  if (std::equal(expected.begin(), expected.end(), mac.begin(), mac.end())) {
    ++recv_seq_;
    seen_macs_.insert(util::hex_encode(mac));
    return payload;
  }
  if (seen_macs_.count(util::hex_encode(mac))) {
    fail("ReplayDetected", "stale sequence: frame was already delivered");
  }
  fail("MacMismatch", "frame authentication failed");
}

// --- Keyring --------------------------------------------------------------------

void Keyring::enroll(const std::string& host_id, const Bytes& secret) {
  hosts_[host_id] = secret;
}

void Keyring::remove(const std::string& host_id) {
  hosts_.erase(host_id);
}

const Bytes* Keyring::secret_for(const std::string& host_id) const {
  auto it = hosts_.find(host_id);
  return it == hosts_.end() ? nullptr : &it->second;
}

std::string Keyring::render() const {
  std::string out;
  for (const auto& [host, secret] : hosts_) {
    out += "HOST " + host + " " + util::base64_encode(secret) + "\n";
  }
  return out;
}

Keyring Keyring::parse(const std::string& text) {
  Keyring kr;
  for (const auto& line : util::split(text, '\n')) {
    if (line.empty() || line[0] == '#') continue;
    auto parts = util::split(line, ' ');
    if (parts.size() != 3 || parts[0] != "HOST") {
      fail("MalformedKeyring", "bad line: " + line);
    }
    auto secret = util::base64_decode(parts[2]);
    if (!secret) fail("MalformedKeyring", "bad secret base64 for " + parts[1]);
    kr.enroll(parts[1], *secret);
  }
  return kr;
}

Keyring Keyring::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("MalformedKeyring", "cannot open keyring file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Keyring::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail("MalformedKeyring", "cannot write keyring file " + path);
  out << render();
}

// --- Handshake -------------------------------------------------------------------

namespace {

Bytes proof_over(const Bytes& secret, const Bytes& nonce_a, const Bytes& nonce_b,
                 std::string_view role) {
  Bytes input;
  input.insert(input.end(), nonce_a.begin(), nonce_a.end());
  input.insert(input.end(), nonce_b.begin(), nonce_b.end());
  input.insert(input.end(), role.begin(), role.end());
  auto mac = crypto::hmac_sha256(secret, input);
  return Bytes(mac.begin(), mac.end());
}

Bytes derive_channel_key(const Bytes& initiator_proof, const Bytes& responder_proof,
                         const Bytes& nonce_a, const Bytes& nonce_b) {
  Bytes key_material;
  key_material.insert(key_material.end(), initiator_proof.begin(), initiator_proof.end());
  key_material.insert(key_material.end(), responder_proof.begin(), responder_proof.end());
  Bytes nonces;
  nonces.insert(nonces.end(), nonce_a.begin(), nonce_a.end());
  nonces.insert(nonces.end(), nonce_b.begin(), nonce_b.end());
  auto key = crypto::hmac_sha256(key_material, nonces);
  return Bytes(key.begin(), key.end());
}

Bytes decode_hex_header(const Payload& p, const std::string& key) {
  auto decoded = util::hex_decode(p.header(key));
  if (!decoded) fail("MalformedPayload", "bad hex in header " + key);
  return *decoded;
}

}  // namespace

HandshakeInitiator::HandshakeInitiator(const Keyring& keyring, std::string self_id,
                                       std::string peer_id, crypto::Rng& rng)
    : keyring_(keyring),
      self_id_(std::move(self_id)),
      peer_id_(std::move(peer_id)),
      nonce_(rng.bytes(16)) {}

Payload HandshakeInitiator::hello() const {
  return Payload{"HELLO", 0,
                 {{"host", self_id_}, {"nonce", util::hex_encode(nonce_)}},
                 {}};
}

Payload HandshakeInitiator::on_hello_ack(const Payload& ack) {
  const Bytes* peer_secret = keyring_.secret_for(ack.header("host"));
  if (!peer_secret || ack.header("host") != peer_id_) {
    fail("UnknownHost", "responder " + ack.header("host") + " not in keyring");
  }
  Bytes peer_nonce = decode_hex_header(ack, "nonce");
  Bytes peer_proof = decode_hex_header(ack, "proof");
  Bytes expected = proof_over(*peer_secret, nonce_, peer_nonce, "responder");
  if (peer_proof != expected) fail("BadProof", "responder proof rejected");

  const Bytes* own_secret = keyring_.secret_for(self_id_);
  if (!own_secret) fail("UnknownHost", "own host " + self_id_ + " not in keyring");
  Bytes own_proof = proof_over(*own_secret, nonce_, peer_nonce, "initiator");
  channel_key_ = derive_channel_key(own_proof, peer_proof, nonce_, peer_nonce);
  done_ = true;
  return Payload{"HELLO-ACK", 0,
                 {{"host", self_id_}, {"proof", util::hex_encode(own_proof)}},
                 {}};
}

const Bytes& HandshakeInitiator::channel_key() const {
  if (!done_) fail("BadProof", "handshake incomplete");
  return channel_key_;
}

HandshakeResponder::HandshakeResponder(const Keyring& keyring, std::string self_id,
                                       crypto::Rng& rng)
    : keyring_(keyring), self_id_(std::move(self_id)), nonce_(rng.bytes(16)) {}

Payload HandshakeResponder::on_hello(const Payload& hello) {
  peer_id_ = hello.header("host");
  if (!keyring_.secret_for(peer_id_)) {
    fail("UnknownHost", "initiator " + peer_id_ + " not in keyring");
  }
  peer_nonce_ = decode_hex_header(hello, "nonce");
  const Bytes* own_secret = keyring_.secret_for(self_id_);
  if (!own_secret) fail("UnknownHost", "own host " + self_id_ + " not in keyring");
  Bytes proof = proof_over(*own_secret, peer_nonce_, nonce_, "responder");
  return Payload{"HELLO-ACK", 0,
                 {{"host", self_id_},
                  {"nonce", util::hex_encode(nonce_)},
                  {"proof", util::hex_encode(proof)}},
                 {}};
}

void HandshakeResponder::on_confirm(const Payload& confirm) {
  const Bytes* peer_secret = keyring_.secret_for(peer_id_);
  if (!peer_secret) fail("UnknownHost", peer_id_);
  Bytes peer_proof = decode_hex_header(confirm, "proof");
  Bytes expected = proof_over(*peer_secret, peer_nonce_, nonce_, "initiator");
  if (peer_proof != expected) fail("BadProof", "initiator proof rejected");

  const Bytes* own_secret = keyring_.secret_for(self_id_);
  Bytes own_proof = proof_over(*own_secret, peer_nonce_, nonce_, "responder");
  channel_key_ = derive_channel_key(peer_proof, own_proof, peer_nonce_, nonce_);
  done_ = true;
}

const Bytes& HandshakeResponder::channel_key() const {
  if (!done_) fail("BadProof", "handshake incomplete");
  return channel_key_;
}

// --- Chunking ----------------------------------------------------------------------

std::vector<Payload> split_for_send(const Payload& payload, std::size_t max_body) {
  if (payload.body.size() <= max_body) return {payload};
  std::size_t n = (payload.body.size() + max_body - 1) / max_body;
  std::vector<Payload> parts;
  parts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Payload part;
    part.type = payload.type;
    part.correlation_id = payload.correlation_id;
    if (i == 0) part.headers = payload.headers;
    part.headers["chunk"] = std::to_string(i + 1) + "/" + std::to_string(n);
    auto begin = payload.body.begin() + static_cast<std::ptrdiff_t>(i * max_body);
    auto end = i + 1 == n ? payload.body.end()
                          : begin + static_cast<std::ptrdiff_t>(max_body);
    part.body.assign(begin, end);
    parts.push_back(std::move(part));
  }
  return parts;
}

std::optional<Payload> ChunkAssembler::feed(Payload part) {
  auto chunk = part.maybe_header("chunk");
  if (!chunk) return part;  // unchunked payload
  auto slash = chunk->find('/');
  if (slash == std::string::npos) fail("MalformedPayload", "bad chunk header");
  std::size_t index = std::stoull(chunk->substr(0, slash));
  std::size_t total = std::stoull(chunk->substr(slash + 1));
  if (index == 0 || index > total) fail("MalformedPayload", "chunk index out of range");

  auto it = pending_.find(part.correlation_id);
  if (it == pending_.end()) {
    if (index != 1) fail("MalformedPayload", "chunk arrived out of order");
    Payload head = part;
    head.headers.erase("chunk");
    if (total == 1) return head;
    pending_.emplace(part.correlation_id, std::make_pair(std::move(head), total));
    return std::nullopt;
  }
  auto& [assembled, expected_total] = it->second;
  if (total != expected_total) fail("MalformedPayload", "chunk count changed mid-stream");
  assembled.body.insert(assembled.body.end(), part.body.begin(), part.body.end());
  if (index == expected_total) {
    Payload done = std::move(assembled);
    pending_.erase(it);
    return done;
  }
  return std::nullopt;
}

}  // namespace mg::wire
