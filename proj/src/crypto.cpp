#include "mg/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <cstring>
#include <stdexcept>

namespace mg::crypto {

Digest sha256(const Bytes& data) {
  Digest out{};
  SHA256(data.data(), data.size(), out.data());
  return out;
}

Digest sha256(std::string_view data) {
  Digest out{};
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(),
         out.data());
  return out;
}

std::string sha256_hex(const Bytes& data) {
  auto d = sha256(data);
  return util::hex_encode(d.data(), d.size());
}

std::string sha256_hex(std::string_view data) {
  auto d = sha256(data);
  return util::hex_encode(d.data(), d.size());
}

Digest hmac_sha256(const Bytes& key, const Bytes& data) {
  Digest out{};
  unsigned int len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
       data.data(), data.size(), out.data(), &len);
  return out;
}

Digest hmac_sha256(const Bytes& key, std::string_view data) {
  return hmac_sha256(key, util::to_bytes(data));
}

namespace {

constexpr std::size_t kNonceLen = 12;
constexpr std::size_t kTagLen = 16;

Bytes derive_nonce(const Bytes& key32, const Bytes& plaintext) {
  Bytes input = util::to_bytes("mgd1-nonce");
  input.insert(input.end(), plaintext.begin(), plaintext.end());
  Digest d = hmac_sha256(key32, input);
  return Bytes(d.begin(), d.begin() + kNonceLen);
}

}  // namespace

Bytes aead_seal(const Bytes& key32, const Bytes& plaintext) {
  if (key32.size() != 32) throw std::invalid_argument("aead_seal: key must be 32 bytes");
  Bytes nonce = derive_nonce(key32, plaintext);

  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  if (!ctx) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
  Bytes out(nonce);
  out.resize(kNonceLen + plaintext.size() + kTagLen);

  int len = 0;
  int ok = EVP_EncryptInit_ex(ctx, EVP_aes_256_gcm(), nullptr, key32.data(), nonce.data());
  if (ok == 1 && !plaintext.empty()) {
    ok = EVP_EncryptUpdate(ctx, out.data() + kNonceLen, &len,
                           plaintext.data(), static_cast<int>(plaintext.size()));
  }
  int fin_len = 0;
  if (ok == 1) ok = EVP_EncryptFinal_ex(ctx, out.data() + kNonceLen + len, &fin_len);
  if (ok == 1) {
    ok = EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_GET_TAG, kTagLen,
                             out.data() + kNonceLen + plaintext.size());
  }
  EVP_CIPHER_CTX_free(ctx);
  if (ok != 1) throw std::runtime_error("aead_seal: encryption failed");
  return out;
}

std::optional<Bytes> aead_open(const Bytes& key32, const Bytes& sealed) {
  if (key32.size() != 32) throw std::invalid_argument("aead_open: key must be 32 bytes");
  if (sealed.size() < kNonceLen + kTagLen) return std::nullopt;
  const std::size_t ct_len = sealed.size() - kNonceLen - kTagLen;

  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  if (!ctx) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
  Bytes plain(ct_len);
  int len = 0;
  int ok = EVP_DecryptInit_ex(ctx, EVP_aes_256_gcm(), nullptr, key32.data(), sealed.data());
  if (ok == 1 && ct_len > 0) {
    ok = EVP_DecryptUpdate(ctx, plain.data(), &len,
                           sealed.data() + kNonceLen, static_cast<int>(ct_len));
  }
  if (ok == 1) {
    Bytes tag(sealed.end() - kTagLen, sealed.end());
    ok = EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_TAG, kTagLen, tag.data());
  }
  int fin_len = 0;
  if (ok == 1) ok = EVP_DecryptFinal_ex(ctx, plain.data() + len, &fin_len);
  EVP_CIPHER_CTX_free(ctx);
  if (ok != 1) return std::nullopt;
  return plain;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) return 0;
  // Rejection sampling keeps the draw unbiased.
  std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                        std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % bound;
}

Bytes Rng::bytes(std::size_t n) {
  Bytes out;
  out.reserve(n);
  while (out.size() < n) {
    std::uint64_t v = engine_();
    for (int i = 0; i < 8 && out.size() < n; ++i) {
      out.push_back(static_cast<std::uint8_t>(v & 0xFF));
      v >>= 8;
    }
  }
  return out;
}

}  // namespace mg::crypto
