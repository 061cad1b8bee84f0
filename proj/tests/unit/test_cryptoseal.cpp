#include <doctest.h>

#include "qkdrelay/cryptoseal.hpp"
#include "qkdrelay/error.hpp"

using namespace qkdrelay;
using namespace qkdrelay::cryptoseal;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("built-in parameter sets") {
  // Ciphertext lengths of the three Kyber security levels.
  CHECK(KemParamSet::kem512().ciphertext_bits == 6144);
  CHECK(KemParamSet::kem768().ciphertext_bits == 8704);
  CHECK(KemParamSet::kem1024().ciphertext_bits == 12544);
  for (const auto& p : builtin_param_sets()) {
    CHECK(p.input_key_bits == 256);
    CHECK(param_set_by_name(p.name) == p);
  }
  CHECK(code_of([] { (void)param_set_by_name("KEM-2048"); }) == ErrorCode::UnsupportedParams);
  CHECK(code_of([] { (void)KemParamSet::custom("tiny", 128); }) == ErrorCode::UnsupportedParams);
}

TEST_CASE("mock KEM keygen is deterministic") {
  MockKem kem;
  Rng a(1), b(1);
  const auto pa = kem.keygen(KemParamSet::kem512(), a);
  const auto pb = kem.keygen(KemParamSet::kem512(), b);
  CHECK(pa.public_key.bytes == pb.public_key.bytes);
  CHECK(pa.secret_key.bytes == pb.secret_key.bytes);
}

TEST_CASE("ciphertext length law across seeds") {
  MockKem kem;
  for (const auto& params : builtin_param_sets()) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      const auto pair = kem.keygen(params, rng);
      const auto enc = kem.encapsulate(pair.public_key, rng);
      REQUIRE(enc.ciphertext.size() * 8 == params.ciphertext_bits);
      REQUIRE(enc.shared_key.size() == 256);
      REQUIRE(kem.decapsulate(pair.secret_key, enc.ciphertext) == enc.shared_key);
    }
  }
}

TEST_CASE("custom parameter set geometry") {
  MockKem kem;
  Rng rng(7);
  const auto params = KemParamSet::custom("custom-4096", 4096);
  const auto pair = kem.keygen(params, rng);
  const auto enc = kem.encapsulate(pair.public_key, rng);
  CHECK(enc.ciphertext.size() * 8 == 4096);
  CHECK(kem.decapsulate(pair.secret_key, enc.ciphertext) == enc.shared_key);
}

TEST_CASE("decapsulation errors") {
  MockKem kem;
  Rng rng(8);
  const auto pair = kem.keygen(KemParamSet::kem768(), rng);
  const auto other = kem.keygen(KemParamSet::kem768(), rng);
  auto enc = kem.encapsulate(pair.public_key, rng);

  auto short_ct = enc.ciphertext;
  short_ct.pop_back();
  CHECK(code_of([&] { (void)kem.decapsulate(pair.secret_key, short_ct); }) == ErrorCode::LengthMismatch);
  CHECK(kem.decapsulate(other.secret_key, enc.ciphertext) != enc.shared_key);

  KemPublicKey broken = pair.public_key;
  broken.bytes.resize(3);
  CHECK(code_of([&] { (void)kem.encapsulate(broken, rng); }) == ErrorCode::MalformedPublicKey);

  MockKem strict(true);
  auto tampered = enc.ciphertext;
  tampered[tampered.size() - 1] ^= 0x01;
  CHECK(code_of([&] { (void)strict.decapsulate(pair.secret_key, tampered); }) == ErrorCode::DecapsulationFailure);
  CHECK(strict.decapsulate(pair.secret_key, enc.ciphertext) == enc.shared_key);
}

TEST_CASE_TEMPLATE("symmetric cipher contract", Cipher, Aes256Ctr, HashStreamCipher) {
  Cipher cipher;
  Rng rng(21);
  const auto key = keycore::random_register(256, rng);
  const auto nonce = random_nonce(rng);

  SUBCASE("round trip and length preservation") {
    for (std::size_t p = 1; p <= 8; ++p) {
      const auto m = keycore::random_register(256 * p, rng);
      const auto c = cipher.encrypt(key, nonce, m);
      CHECK(c.size() == 256 * p);
      CHECK(cipher.decrypt(key, nonce, c) == m);
    }
  }
  SUBCASE("unaligned plaintext is zero padded") {
    const auto m = keycore::random_register(300, rng);
    const auto c = cipher.encrypt(key, nonce, m);
    CHECK(c.size() == 384);
    CHECK(keycore::truncate(cipher.decrypt(key, nonce, c), 300) == m);
    CHECK(code_of([&] { (void)cipher.decrypt(key, nonce, keycore::truncate(c, 300)); }) == ErrorCode::LengthMismatch);
  }
  SUBCASE("ciphertext differs from plaintext") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng r(seed);
      const auto k = keycore::random_register(256, r);
      const auto m = keycore::random_register(256, r);
      CHECK(cipher.encrypt(k, random_nonce(r), m) != m);
    }
  }
  SUBCASE("nonce discipline") {
    const auto m = keycore::random_register(512, rng);
    CHECK(cipher.encrypt(key, nonce, m) == cipher.encrypt(key, nonce, m));
    auto other = nonce;
    other[15] ^= 0x80;
    CHECK(cipher.encrypt(key, nonce, m) != cipher.encrypt(key, other, m));
  }
  SUBCASE("bit flip stays local") {
    const auto m = keycore::random_register(512, rng);
    auto c = cipher.encrypt(key, nonce, m);
    c.set_bit(100, !c.bit(100));
    const auto diff = cipher.decrypt(key, nonce, c) ^ m;
    CHECK(diff.popcount() == 1);
    CHECK(diff.bit(100));
  }
  SUBCASE("key length") {
    const auto m = keycore::random_register(128, rng);
    CHECK(code_of([&] { (void)cipher.encrypt(keycore::random_register(128, rng), nonce, m); }) ==
          ErrorCode::BadKeyLength);
  }
}

TEST_CASE("AES-256-CTR known answer") {
  // NIST SP 800-38A F.5.5, first block.
  const std::uint8_t key_bytes[32] = {0x60, 0x3d, 0xeb, 0x10, 0x15, 0xca, 0x71, 0xbe, 0x2b, 0x73, 0xae,
                                      0xf0, 0x85, 0x7d, 0x77, 0x81, 0x1f, 0x35, 0x2c, 0x07, 0x3b, 0x61,
                                      0x08, 0xd7, 0x2d, 0x98, 0x10, 0xa3, 0x09, 0x14, 0xdf, 0xf4};
  const Nonce ctr = {0xf0, 0xf1, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7,
                     0xf8, 0xf9, 0xfa, 0xfb, 0xfc, 0xfd, 0xfe, 0xff};
  const std::uint8_t pt[16] = {0x6b, 0xc1, 0xbe, 0xe2, 0x2e, 0x40, 0x9f, 0x96,
                               0xe9, 0x3d, 0x7e, 0x11, 0x73, 0x93, 0x17, 0x2a};
  const std::uint8_t ct[16] = {0x60, 0x1e, 0xc3, 0x13, 0x77, 0x57, 0x89, 0xa5,
                               0xb7, 0xa7, 0xf5, 0x04, 0xbb, 0xf3, 0xd2, 0x28};
  Aes256Ctr aes;
  const auto out = aes.encrypt(keycore::KeyRegister::from_bytes(key_bytes), ctr, keycore::KeyRegister::from_bytes(pt));
  CHECK(out == keycore::KeyRegister::from_bytes(ct));
}

TEST_CASE("suites") {
  for (const auto& name : suite_names()) {
    const auto suite = make_suite(name);
    CHECK(suite.kem != nullptr);
    CHECK(suite.cipher != nullptr);
  }
  CHECK(code_of([] { (void)make_suite("nope"); }) == ErrorCode::UnsupportedParams);
}
