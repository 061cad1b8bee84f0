#include "qkdrelay/cryptoseal.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <memory>

#include "qkdrelay/encoding.hpp"
#include "qkdrelay/error.hpp"

namespace qkdrelay::cryptoseal {

namespace {

constexpr std::size_t kSeedBytes = 32;
constexpr std::size_t kSharedKeyBytes = kKemInputKeyBits / 8;

void append(Bytes& out, std::string_view text) { out.insert(out.end(), text.begin(), text.end()); }
void append(Bytes& out, std::span<const std::uint8_t> data) { out.insert(out.end(), data.begin(), data.end()); }

// Counter-mode SHA-256 expansion of (label, key, data) into n bytes.
Bytes expand(std::string_view label, std::span<const std::uint8_t> key,
             std::span<const std::uint8_t> data, std::size_t n) {
  Bytes out;
  out.reserve(n + 32);
  Bytes msg;
  for (std::uint32_t ctr = 0; out.size() < n; ++ctr) {
    msg.clear();
    append(msg, label);
    append(msg, key);
    append(msg, data);
    for (int s = 24; s >= 0; s -= 8) msg.push_back(static_cast<std::uint8_t>(ctr >> s));
    const auto block = encoding::sha256(msg);
    out.insert(out.end(), block.begin(), block.end());
  }
  out.resize(n);
  return out;
}

encoding::Digest public_digest(const KemParamSet& params, std::span<const std::uint8_t> seed) {
  Bytes msg;
  append(msg, "qkdrelay/mock-kem/pk/");
  append(msg, params.name);
  append(msg, seed);
  return encoding::sha256(msg);
}

struct MockLayout {
  std::size_t total;      // bytes
  std::size_t rand_len;   // encapsulation randomness after the masked key
  std::size_t fill_len;   // keyed filler up to the ciphertext length
};

MockLayout mock_layout(const KemParamSet& params) {
  const std::size_t total = params.ciphertext_bits / 8;
  const std::size_t rand_len = std::min<std::size_t>(kSeedBytes, total - kSharedKeyBytes);
  return {total, rand_len, total - kSharedKeyBytes - rand_len};
}

Bytes mock_filler(std::span<const std::uint8_t> digest, std::span<const std::uint8_t> randomness,
                  std::span<const std::uint8_t> shared, std::size_t n) {
  Bytes data(randomness.begin(), randomness.end());
  append(data, shared);
  return expand("qkdrelay/mock-kem/fill", digest, data, n);
}

}  // namespace

KemParamSet KemParamSet::custom(std::string name, std::size_t ciphertext_bits) {
  KemParamSet p{std::move(name), kKemInputKeyBits, ciphertext_bits};
  validate(p);
  return p;
}

const std::vector<KemParamSet>& builtin_param_sets() {
  static const std::vector<KemParamSet> sets = {KemParamSet::kem512(), KemParamSet::kem768(),
                                                KemParamSet::kem1024()};
  return sets;
}

KemParamSet param_set_by_name(std::string_view name) {
  for (const auto& p : builtin_param_sets()) {
    if (p.name == name) return p;
  }
  throw Error(ErrorCode::UnsupportedParams, "unknown KEM parameter set '" + std::string(name) + "'");
}

void validate(const KemParamSet& params) {
  if (params.input_key_bits != kKemInputKeyBits) {
    throw Error(ErrorCode::UnsupportedParams, "KEM input key must be 256 bits");
  }
  if (params.ciphertext_bits < params.input_key_bits || params.ciphertext_bits % 8 != 0) {
    throw Error(ErrorCode::UnsupportedParams,
                "ciphertext length " + std::to_string(params.ciphertext_bits) +
                    " must be byte aligned and at least the input key size");
  }
  for (const auto& builtin : builtin_param_sets()) {
    if (builtin.name == params.name && builtin != params) {
      throw Error(ErrorCode::UnsupportedParams, params.name + " has a fixed ciphertext length of " +
                                                    std::to_string(builtin.ciphertext_bits) + " bits");
    }
  }
}

Nonce random_nonce(Rng& rng) {
  Nonce n{};
  const std::uint64_t hi = rng();
  const std::uint64_t lo = rng();
  for (std::size_t i = 0; i < 8; ++i) {
    n[i] = static_cast<std::uint8_t>(hi >> (56 - 8 * i));
    n[8 + i] = static_cast<std::uint8_t>(lo >> (56 - 8 * i));
  }
  return n;
}

// --- MockKem -----------------------------------------------------------------

KemKeyPair MockKem::keygen(const KemParamSet& params, Rng& rng) const {
  validate(params);
  const auto seed = keycore::random_register(kSeedBytes * 8, rng);
  const auto digest = public_digest(params, seed.bytes());
  KemKeyPair pair;
  pair.params = params;
  pair.secret_key = {Bytes(seed.bytes().begin(), seed.bytes().end()), params};
  pair.public_key = {Bytes(digest.begin(), digest.end()), params};
  return pair;
}

Encapsulation MockKem::encapsulate(const KemPublicKey& pk, Rng& rng) const {
  try {
    validate(pk.params);
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedPublicKey, e.what());
  }
  if (pk.bytes.size() != 32) {
    throw Error(ErrorCode::MalformedPublicKey, "mock public key must be 32 bytes");
  }
  const auto lay = mock_layout(pk.params);
  Encapsulation out;
  out.shared_key = keycore::random_register(kKemInputKeyBits, rng);
  const auto randomness = keycore::random_register(lay.rand_len * 8, rng);

  const auto mask = expand("qkdrelay/mock-kem/mask", pk.bytes, randomness.bytes(), kSharedKeyBytes);
  out.ciphertext.resize(lay.total);
  for (std::size_t i = 0; i < kSharedKeyBytes; ++i) {
    out.ciphertext[i] = out.shared_key.bytes()[i] ^ mask[i];
  }
  std::copy(randomness.bytes().begin(), randomness.bytes().end(), out.ciphertext.begin() + kSharedKeyBytes);
  const auto fill = mock_filler(pk.bytes, randomness.bytes(), out.shared_key.bytes(), lay.fill_len);
  std::copy(fill.begin(), fill.end(), out.ciphertext.begin() + kSharedKeyBytes + lay.rand_len);
  return out;
}

KeyRegister MockKem::decapsulate(const KemSecretKey& sk, std::span<const std::uint8_t> ciphertext) const {
  validate(sk.params);
  if (ciphertext.size() * 8 != sk.params.ciphertext_bits) {
    throw Error(ErrorCode::LengthMismatch,
                "ciphertext has " + std::to_string(ciphertext.size() * 8) + " bits, " + sk.params.name +
                    " expects " + std::to_string(sk.params.ciphertext_bits));
  }
  if (sk.bytes.size() != kSeedBytes) throw Error(ErrorCode::BadKeyLength, "mock secret key must be 32 bytes");
  const auto lay = mock_layout(sk.params);
  const auto digest = public_digest(sk.params, sk.bytes);
  const auto randomness = ciphertext.subspan(kSharedKeyBytes, lay.rand_len);
  const auto mask = expand("qkdrelay/mock-kem/mask", digest, randomness, kSharedKeyBytes);
  Bytes shared(kSharedKeyBytes);
  for (std::size_t i = 0; i < kSharedKeyBytes; ++i) shared[i] = ciphertext[i] ^ mask[i];
  if (verify_) {
    const auto fill = mock_filler(digest, randomness, shared, lay.fill_len);
    if (!std::equal(fill.begin(), fill.end(), ciphertext.begin() + kSharedKeyBytes + lay.rand_len)) {
      throw Error(ErrorCode::DecapsulationFailure, "ciphertext failed verification");
    }
  }
  return KeyRegister::from_bytes(shared);
}

// --- symmetric ---------------------------------------------------------------

KeyRegister SymmetricCipher::encrypt(const KeyRegister& key, const Nonce& nonce,
                                     const KeyRegister& plaintext) const {
  if (key.size() != spec_.key_bits) {
    throw Error(ErrorCode::BadKeyLength, "symmetric key must be 256 bits, got " + std::to_string(key.size()));
  }
  const auto padded = keycore::pad(plaintext, spec_.block_bits);
  const auto stream = keystream(key.bytes(), nonce, padded.bytes().size());
  Bytes out(padded.bytes().begin(), padded.bytes().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] ^= stream[i];
  return KeyRegister::from_bytes(out, padded.size());
}

KeyRegister SymmetricCipher::decrypt(const KeyRegister& key, const Nonce& nonce,
                                     const KeyRegister& ciphertext) const {
  if (ciphertext.size() % spec_.block_bits != 0) {
    throw Error(ErrorCode::LengthMismatch, "ciphertext is not aligned to the 128-bit block size");
  }
  return encrypt(key, nonce, ciphertext);
}

Bytes Aes256Ctr::keystream(std::span<const std::uint8_t> key, const Nonce& nonce, std::size_t n_bytes) const {
  Bytes out(n_bytes);
  if (n_bytes == 0) return out;
  const Bytes zeros(n_bytes, 0);
  std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx(EVP_CIPHER_CTX_new(),
                                                                       &EVP_CIPHER_CTX_free);
  int len = 0;
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_ctr(), nullptr, key.data(), nonce.data()) != 1 ||
      EVP_EncryptUpdate(ctx.get(), out.data(), &len, zeros.data(), static_cast<int>(n_bytes)) != 1) {
    throw std::runtime_error("OpenSSL AES-256-CTR failed");
  }
  return out;
}

Bytes HashStreamCipher::keystream(std::span<const std::uint8_t> key, const Nonce& nonce,
                                  std::size_t n_bytes) const {
  return expand("qkdrelay/sha256-ctr", key, nonce, n_bytes);
}

CryptoSuite make_suite(std::string_view name) {
  if (name == "mock") {
    return {"mock", std::make_shared<MockKem>(), std::make_shared<HashStreamCipher>()};
  }
  if (name == "openssl") {
    return {"openssl", std::make_shared<MockKem>(true), std::make_shared<Aes256Ctr>()};
  }
  throw Error(ErrorCode::UnsupportedParams, "unknown crypto suite '" + std::string(name) + "'");
}

std::vector<std::string> suite_names() { return {"mock", "openssl"}; }

}  // namespace qkdrelay::cryptoseal
