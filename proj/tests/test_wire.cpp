#include <doctest.h>

#include <fstream>
#include <random>

#include "mg/crypto.hpp"
#include "mg/wire.hpp"

using namespace mg;
using namespace mg::wire;

namespace {

#define CHECK_FAILS_WITH(expr, expected_code)          \
  do {                                                 \
    try {                                              \
      (void)(expr);                                    \
      FAIL("expected " expected_code ", none thrown"); \
    } catch (const Error& e) {                         \
      CHECK(e.code() == std::string(expected_code));   \
    }                                                  \
  } while (0)

Payload random_payload(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> type_dist(0, 2);
  std::uniform_int_distribution<int> header_count(0, 6);
  std::uniform_int_distribution<int> len_dist(0, 30);
  std::uniform_int_distribution<int> chr(0, 255);
  Payload p;
  p.type = type_dist(rng) == 0 ? "REQ" : (type_dist(rng) == 1 ? "RSP" : "ERR");
  p.correlation_id = rng();
  int n = header_count(rng);
  for (int i = 0; i < n; ++i) {
    std::string key = "k" + std::to_string(i);
    std::string value(static_cast<std::size_t>(len_dist(rng)), ' ');
    for (auto& c : value) c = static_cast<char>(chr(rng));
    p.headers[key] = value;  // arbitrary bytes; percent-encoding must cope
  }
  util::Bytes body(static_cast<std::size_t>(len_dist(rng)) * 7, 0);
  for (auto& b : body) b = static_cast<std::uint8_t>(chr(rng));
  p.body = std::move(body);
  return p;
}

}  // namespace

TEST_CASE("payload renders and parses the documented shape") {
  Payload p = make_request(42, {{"op", "mi.query"}});
  CHECK(p.render() == "MGP/1 REQ 42\nop=mi.query\n\n");
  Payload back = Payload::parse(p.render());
  CHECK(back == p);
}

TEST_CASE("payload round trip over randomized content") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 1200; ++i) {
    Payload p = random_payload(rng);
    CHECK(Payload::parse(p.render()) == p);
  }
}

TEST_CASE("payload parse rejects malformed text") {
  CHECK_FAILS_WITH(Payload::parse(""), "MalformedPayload");
  CHECK_FAILS_WITH(Payload::parse("HTTP/1.1 REQ 1\n\n"), "MalformedPayload");
  CHECK_FAILS_WITH(Payload::parse("MGP/1 PING 1\n\n"), "MalformedPayload");
  CHECK_FAILS_WITH(Payload::parse("MGP/1 REQ 1\nheaderline\n\n"), "MalformedPayload");
  CHECK_FAILS_WITH(Payload::parse("MGP/1 REQ 1\nk=v\n"), "MalformedPayload");
  CHECK_FAILS_WITH(Payload::parse("MGP/1 REQ 1\n\n!!!not-base64!!!"), "MalformedPayload");
}

TEST_CASE("frame round trip between paired channel endpoints") {
  util::Bytes key(32, 0xAB);
  ChannelCrypto sender(key);
  ChannelCrypto receiver(key);
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 1000; ++i) {
    Payload p = random_payload(rng);
    std::string text = p.render();
    util::Bytes frame = sender.encode(text);
    CHECK(receiver.decode(frame) == text);
  }
}

TEST_CASE("any flipped payload byte fails authentication") {
  util::Bytes key(32, 1);
  ChannelCrypto sender(key);
  std::string text = make_request(7, {{"op", "mi.add"}}).render();
  util::Bytes frame = sender.encode(text);
  for (std::size_t i = 4; i < frame.size(); ++i) {
    ChannelCrypto receiver(key);
    util::Bytes tampered = frame;
    tampered[i] ^= 0x40;
    CHECK_FAILS_WITH(receiver.decode(tampered), "MacMismatch");
  }
}

TEST_CASE("replayed frames are rejected as stale") {
  util::Bytes key(32, 2);
  ChannelCrypto sender(key);
  ChannelCrypto receiver(key);
  util::Bytes f1 = sender.encode(make_request(1, {{"op", "a"}}).render());
  util::Bytes f2 = sender.encode(make_request(2, {{"op", "b"}}).render());
  receiver.decode(f1);
  receiver.decode(f2);
  CHECK_FAILS_WITH(receiver.decode(f1), "ReplayDetected");
  CHECK_FAILS_WITH(receiver.decode(f2), "ReplayDetected");
}

TEST_CASE("oversize frames are refused before any MAC work") {
  util::Bytes key(32, 3);
  ChannelCrypto crypto(key);
  std::string huge(kMaxFrameLen + 1, 'x');
  CHECK_FAILS_WITH(crypto.encode(huge), "Oversize");
}

TEST_CASE("the pinned MGP test vector decodes to the specified payload") {
  // Recorded in tests/vectors/mgp_frame.vec: all-zero key, sequence 1.
  const std::string vector_hex =
      "0000003a4d47502f31205245512034320a6f703d6d692e71756572790a0a"
      "d206de9749feaaada4faea0c609378fdcaae2a6c6bfbaf5babc34efd4c6cbbb8";
  auto frame = util::hex_decode(vector_hex);
  REQUIRE(frame.has_value());

  ChannelCrypto receiver(null_key());
  std::string payload_text = receiver.decode(*frame);
  CHECK(payload_text == "MGP/1 REQ 42\nop=mi.query\n\n");
  Payload p = Payload::parse(payload_text);
  CHECK(p.type == "REQ");
  CHECK(p.correlation_id == 42);
  CHECK(p.header("op") == "mi.query");

  // And the encoder reproduces the pinned bytes exactly.
  ChannelCrypto sender(null_key());
  CHECK(util::hex_encode(sender.encode(payload_text)) == vector_hex);
}

TEST_CASE("vector file on disk matches the pinned constant") {
  std::ifstream in(std::string(TEST_VECTOR_DIR) + "/mgp_frame.vec");
  REQUIRE(in.good());
  std::string line;
  std::string from_file;
  while (std::getline(in, line)) {
    if (util::starts_with(line, "frame=")) from_file = line.substr(6);
  }
  CHECK(from_file ==
        "0000003a4d47502f31205245512034320a6f703d6d692e71756572790a0a"
        "d206de9749feaaada4faea0c609378fdcaae2a6c6bfbaf5babc34efd4c6cbbb8");
}

TEST_CASE("keyring parses and renders its file format") {
  Keyring kr;
  kr.enroll("udine", util::Bytes(32, 9));
  kr.enroll("cern", util::Bytes(32, 4));
  std::string text = kr.render();
  Keyring back = Keyring::parse(text);
  REQUIRE(back.secret_for("udine") != nullptr);
  CHECK(*back.secret_for("udine") == util::Bytes(32, 9));
  CHECK(back.secret_for("nowhere") == nullptr);
  CHECK_FAILS_WITH(Keyring::parse("HOST short"), "MalformedKeyring");
}

namespace {

struct HandshakePair {
  Keyring ring;
  crypto::Rng rng_a{101};
  crypto::Rng rng_b{202};

  HandshakePair() {
    ring.enroll("alpha", util::Bytes(32, 0x11));
    ring.enroll("beta", util::Bytes(32, 0x22));
  }
};

}  // namespace

TEST_CASE("handshake establishes one key on both ends") {
  HandshakePair hp;
  HandshakeInitiator init(hp.ring, "alpha", "beta", hp.rng_a);
  HandshakeResponder resp(hp.ring, "beta", hp.rng_b);

  Payload hello = init.hello();
  CHECK(hello.type == "HELLO");
  Payload ack = resp.on_hello(hello);
  CHECK(ack.type == "HELLO-ACK");
  Payload confirm = init.on_hello_ack(ack);
  resp.on_confirm(confirm);

  CHECK(init.channel_key() == resp.channel_key());
  CHECK(init.channel_key().size() == 32);

  // No secret bytes ever appear in the exchanged messages.
  for (const Payload* p : {&hello, &ack, &confirm}) {
    std::string rendered = p->render();
    CHECK(rendered.find(util::hex_encode(util::Bytes(32, 0x11))) == std::string::npos);
    CHECK(rendered.find(util::hex_encode(util::Bytes(32, 0x22))) == std::string::npos);
  }
}

TEST_CASE("responder rejects initiators missing from its keyring") {
  HandshakePair hp;
  Keyring only_beta;
  only_beta.enroll("beta", util::Bytes(32, 0x22));
  HandshakeInitiator init(hp.ring, "alpha", "beta", hp.rng_a);
  HandshakeResponder resp(only_beta, "beta", hp.rng_b);
  CHECK_FAILS_WITH(resp.on_hello(init.hello()), "UnknownHost");
}

TEST_CASE("a wrong secret yields BadProof on either side") {
  HandshakePair hp;
  Keyring wrong = hp.ring;
  wrong.enroll("beta", util::Bytes(32, 0x99));  // initiator's copy disagrees

  HandshakeInitiator init(wrong, "alpha", "beta", hp.rng_a);
  HandshakeResponder resp(hp.ring, "beta", hp.rng_b);
  Payload ack = resp.on_hello(init.hello());
  CHECK_FAILS_WITH(init.on_hello_ack(ack), "BadProof");
}

TEST_CASE("a replayed confirmation is rejected") {
  HandshakePair hp;
  HandshakeInitiator init(hp.ring, "alpha", "beta", hp.rng_a);
  HandshakeResponder resp(hp.ring, "beta", hp.rng_b);
  Payload confirm = init.on_hello_ack(resp.on_hello(init.hello()));
  resp.on_confirm(confirm);

  // Fresh responder run with a new nonce: the old proof no longer fits.
  HandshakeInitiator init2(hp.ring, "alpha", "beta", hp.rng_a);
  HandshakeResponder resp2(hp.ring, "beta", hp.rng_b);
  resp2.on_hello(init2.hello());
  CHECK_FAILS_WITH(resp2.on_confirm(confirm), "BadProof");
}

TEST_CASE("chunking splits large bodies and reassembles them") {
  Payload big = make_request(5, {{"op", "ftd.fetch"}});
  big.body.resize(1000);
  for (std::size_t i = 0; i < big.body.size(); ++i) {
    big.body[i] = static_cast<std::uint8_t>(i * 31);
  }
  auto parts = split_for_send(big, 100);
  CHECK(parts.size() == 10);
  CHECK(parts[0].header("chunk") == "1/10");
  CHECK(parts[9].header("chunk") == "10/10");

  ChunkAssembler assembler;
  std::optional<Payload> done;
  for (const auto& part : parts) {
    CHECK_FALSE(done.has_value());
    done = assembler.feed(part);
  }
  REQUIRE(done.has_value());
  CHECK(*done == big);

  // Small payloads pass through whole.
  auto single = split_for_send(make_request(6, {{"op", "x"}}), 100);
  CHECK(single.size() == 1);
  CHECK_FALSE(single[0].maybe_header("chunk").has_value());
}
