#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qkdrelay {

// All simulation randomness flows through explicitly passed engines.
using Rng = std::mt19937_64;

namespace keycore {

// Ordered bit string. Bits are stored MSB-first inside bytes and unused
// trailing bits of the last byte are always zero, so two registers compare
// equal iff they hold the same bits.
class KeyRegister {
 public:
  KeyRegister() = default;
  explicit KeyRegister(std::size_t n_bits);

  static KeyRegister from_bytes(std::span<const std::uint8_t> bytes);
  static KeyRegister from_bytes(std::span<const std::uint8_t> bytes, std::size_t n_bits);
  // "1011" -> 4-bit register; any character other than 0/1 is rejected.
  static KeyRegister from_bit_string(std::string_view text);
  static KeyRegister from_uint64(std::uint64_t value);

  std::size_t size() const noexcept { return bits_; }
  bool empty() const noexcept { return bits_ == 0; }

  bool bit(std::size_t i) const;
  void set_bit(std::size_t i, bool value);

  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }
  std::string to_bit_string() const;
  std::uint64_t to_uint64() const;
  std::size_t popcount() const noexcept;

  friend bool operator==(const KeyRegister&, const KeyRegister&) = default;

 private:
  void clear_tail() noexcept;

  std::vector<std::uint8_t> bytes_;
  std::size_t bits_ = 0;
};

struct BlockLayout {
  std::size_t block_bits = 0;
  std::size_t blocks = 0;
  std::size_t pad_bits = 0;

  std::size_t padded_bits() const noexcept { return blocks * block_bits; }
  friend bool operator==(const BlockLayout&, const BlockLayout&) = default;
};

inline constexpr std::size_t kKeyBlockBits = 256;
inline constexpr std::size_t kCipherBlockBits = 128;

// Bitwise modulo-2 addition. Throws LengthMismatch on unequal lengths.
KeyRegister xor_registers(const KeyRegister& a, const KeyRegister& b);
inline KeyRegister operator^(const KeyRegister& a, const KeyRegister& b) {
  return xor_registers(a, b);
}

// First `i` bits of `k`. Throws OutOfRange when i > |k|.
KeyRegister truncate(const KeyRegister& k, std::size_t i);

// Bits [offset, offset + count) of `k`.
KeyRegister slice(const KeyRegister& k, std::size_t offset, std::size_t count);

KeyRegister concat(const KeyRegister& a, const KeyRegister& b);

KeyRegister random_register(std::size_t n_bits, Rng& rng);

BlockLayout layout(std::size_t payload_bits, std::size_t block_bits);

// Zero-fill to the next multiple of `block_bits`; the original length travels
// out of band.
KeyRegister pad(const KeyRegister& k, std::size_t block_bits);
KeyRegister unpad(const KeyRegister& k, std::size_t original_bits, std::size_t block_bits);

// Canonical wire form: u64 big-endian bit count, then ceil(n/8) bytes.
std::vector<std::uint8_t> serialize(const KeyRegister& k);
KeyRegister deserialize(std::span<const std::uint8_t> wire);

}  // namespace keycore
}  // namespace qkdrelay
