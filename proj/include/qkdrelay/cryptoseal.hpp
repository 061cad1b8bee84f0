#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qkdrelay/keycore.hpp"

namespace qkdrelay::cryptoseal {

using keycore::KeyRegister;
using Bytes = std::vector<std::uint8_t>;

inline constexpr std::size_t kKemInputKeyBits = 256;

// KEM parameter set. Only the ciphertext geometry matters to the relay: the
// one-time-pad cost of forwarding a ciphertext is exactly `ciphertext_bits`.
struct KemParamSet {
  std::string name;
  std::size_t input_key_bits = kKemInputKeyBits;
  std::size_t ciphertext_bits = 0;

  static KemParamSet kem512() { return {"KEM-512", kKemInputKeyBits, 6144}; }
  static KemParamSet kem768() { return {"KEM-768", kKemInputKeyBits, 8704}; }
  static KemParamSet kem1024() { return {"KEM-1024", kKemInputKeyBits, 12544}; }
  // Throws UnsupportedParams unless ciphertext_bits >= 256 and byte aligned.
  static KemParamSet custom(std::string name, std::size_t ciphertext_bits);

  friend bool operator==(const KemParamSet&, const KemParamSet&) = default;
};

const std::vector<KemParamSet>& builtin_param_sets();
// Accepts the stable names "KEM-512", "KEM-768", "KEM-1024".
KemParamSet param_set_by_name(std::string_view name);
void validate(const KemParamSet& params);

struct CipherSpec {
  std::size_t key_bits = 256;
  std::size_t block_bits = 128;
  std::string mode = "CTR";
  std::size_t nonce_bits = 128;
};

using Nonce = std::array<std::uint8_t, 16>;
Nonce random_nonce(Rng& rng);

struct KemPublicKey {
  Bytes bytes;
  KemParamSet params;
};

struct KemSecretKey {
  Bytes bytes;
  KemParamSet params;
};

struct KemKeyPair {
  KemPublicKey public_key;
  KemSecretKey secret_key;
  KemParamSet params;
};

struct Encapsulation {
  Bytes ciphertext;        // exactly params.ciphertext_bits / 8 bytes
  KeyRegister shared_key;  // 256 bits
};

class Kem {
 public:
  virtual ~Kem() = default;
  virtual std::string name() const = 0;
  virtual KemKeyPair keygen(const KemParamSet& params, Rng& rng) const = 0;
  virtual Encapsulation encapsulate(const KemPublicKey& pk, Rng& rng) const = 0;
  virtual KeyRegister decapsulate(const KemSecretKey& sk, std::span<const std::uint8_t> ciphertext) const = 0;
};

// Deterministic stand-in for a lattice KEM with the real ciphertext sizes.
// The secret key is a seed, the public key its digest, and the ciphertext a
// masked shared key followed by encapsulation randomness and keyed filler up
// to l_ct bits. With `verify` set, decapsulation recomputes the whole
// ciphertext and rejects any modification with DecapsulationFailure.
// Anyone holding the public key can open the ciphertext: this provides
// geometry and determinism, not security.
class MockKem final : public Kem {
 public:
  explicit MockKem(bool verify = false) : verify_(verify) {}

  std::string name() const override { return verify_ ? "mock-kem+tag" : "mock-kem"; }
  KemKeyPair keygen(const KemParamSet& params, Rng& rng) const override;
  Encapsulation encapsulate(const KemPublicKey& pk, Rng& rng) const override;
  KeyRegister decapsulate(const KemSecretKey& sk, std::span<const std::uint8_t> ciphertext) const override;

 private:
  bool verify_;
};

// Length-preserving symmetric encryption. Plaintext is zero-padded to the
// 128-bit block boundary and the ciphertext has exactly the padded length.
class SymmetricCipher {
 public:
  virtual ~SymmetricCipher() = default;
  virtual std::string name() const = 0;
  const CipherSpec& spec() const noexcept { return spec_; }

  KeyRegister encrypt(const KeyRegister& key, const Nonce& nonce, const KeyRegister& plaintext) const;
  // Ciphertext must be block aligned; returns the padded plaintext.
  KeyRegister decrypt(const KeyRegister& key, const Nonce& nonce, const KeyRegister& ciphertext) const;

 protected:
  virtual Bytes keystream(std::span<const std::uint8_t> key, const Nonce& nonce, std::size_t n_bytes) const = 0;

 private:
  CipherSpec spec_;
};

// AES-256 in counter mode through OpenSSL; the nonce is the initial counter block.
class Aes256Ctr final : public SymmetricCipher {
 public:
  std::string name() const override { return "aes-256-ctr"; }

 protected:
  Bytes keystream(std::span<const std::uint8_t> key, const Nonce& nonce, std::size_t n_bytes) const override;
};

// SHA-256(key || nonce || counter) keystream. Used by the mock suite.
class HashStreamCipher final : public SymmetricCipher {
 public:
  std::string name() const override { return "sha256-ctr"; }

 protected:
  Bytes keystream(std::span<const std::uint8_t> key, const Nonce& nonce, std::size_t n_bytes) const override;
};

// The pluggable provider seen by relay code. A standardized ML-KEM
// implementation plugs in by deriving from Kem.
struct CryptoSuite {
  std::string name;
  std::shared_ptr<const Kem> kem;
  std::shared_ptr<const SymmetricCipher> cipher;
};

// "mock" (MockKem + HashStreamCipher) or "openssl" (MockKem + Aes256Ctr).
CryptoSuite make_suite(std::string_view name);
std::vector<std::string> suite_names();

}  // namespace qkdrelay::cryptoseal
