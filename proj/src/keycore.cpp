#include "qkdrelay/keycore.hpp"

#include <algorithm>
#include <bit>

#include "qkdrelay/error.hpp"

namespace qkdrelay::keycore {

namespace {

std::size_t bytes_for(std::size_t bits) { return (bits + 7) / 8; }

}  // namespace

KeyRegister::KeyRegister(std::size_t n_bits) : bytes_(bytes_for(n_bits), 0), bits_(n_bits) {}

KeyRegister KeyRegister::from_bytes(std::span<const std::uint8_t> bytes) {
  return from_bytes(bytes, bytes.size() * 8);
}

KeyRegister KeyRegister::from_bytes(std::span<const std::uint8_t> bytes, std::size_t n_bits) {
  if (bytes.size() != bytes_for(n_bits)) {
    throw Error(ErrorCode::LengthMismatch,
                "byte buffer of " + std::to_string(bytes.size()) + " bytes cannot hold exactly " +
                    std::to_string(n_bits) + " bits");
  }
  KeyRegister k;
  k.bytes_.assign(bytes.begin(), bytes.end());
  k.bits_ = n_bits;
  k.clear_tail();
  return k;
}

KeyRegister KeyRegister::from_bit_string(std::string_view text) {
  KeyRegister k(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '0' && text[i] != '1') {
      throw Error(ErrorCode::InvalidArgument, "bit string may only contain '0' and '1'");
    }
    k.set_bit(i, text[i] == '1');
  }
  return k;
}

KeyRegister KeyRegister::from_uint64(std::uint64_t value) {
  KeyRegister k(64);
  for (std::size_t i = 0; i < 8; ++i) {
    k.bytes_[i] = static_cast<std::uint8_t>(value >> (56 - 8 * i));
  }
  return k;
}

bool KeyRegister::bit(std::size_t i) const {
  if (i >= bits_) throw Error(ErrorCode::OutOfRange, "bit index out of range");
  return (bytes_[i / 8] >> (7 - i % 8)) & 1U;
}

void KeyRegister::set_bit(std::size_t i, bool value) {
  if (i >= bits_) throw Error(ErrorCode::OutOfRange, "bit index out of range");
  const auto mask = static_cast<std::uint8_t>(0x80U >> (i % 8));
  if (value) {
    bytes_[i / 8] |= mask;
  } else {
    bytes_[i / 8] &= static_cast<std::uint8_t>(~mask);
  }
}

std::string KeyRegister::to_bit_string() const {
  std::string out(bits_, '0');
  for (std::size_t i = 0; i < bits_; ++i) {
    if (bit(i)) out[i] = '1';
  }
  return out;
}

std::uint64_t KeyRegister::to_uint64() const {
  if (bits_ != 64) throw Error(ErrorCode::LengthMismatch, "register is not 64 bits wide");
  std::uint64_t v = 0;
  for (auto b : bytes_) v = (v << 8) | b;
  return v;
}

std::size_t KeyRegister::popcount() const noexcept {
  std::size_t n = 0;
  for (auto b : bytes_) n += static_cast<std::size_t>(std::popcount(b));
  return n;
}

void KeyRegister::clear_tail() noexcept {
  if (bits_ % 8 != 0 && !bytes_.empty()) {
    bytes_.back() &= static_cast<std::uint8_t>(0xFFU << (8 - bits_ % 8));
  }
}

KeyRegister xor_registers(const KeyRegister& a, const KeyRegister& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch, "xor of registers with " + std::to_string(a.size()) +
                                               " and " + std::to_string(b.size()) + " bits");
  }
  std::vector<std::uint8_t> out(a.bytes().begin(), a.bytes().end());
  auto rhs = b.bytes();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] ^= rhs[i];
  return KeyRegister::from_bytes(out, a.size());
}

KeyRegister truncate(const KeyRegister& k, std::size_t i) {
  if (i > k.size()) {
    throw Error(ErrorCode::OutOfRange, "cannot truncate a " + std::to_string(k.size()) +
                                           "-bit register to " + std::to_string(i) + " bits");
  }
  return KeyRegister::from_bytes(k.bytes().first(bytes_for(i)), i);
}

KeyRegister slice(const KeyRegister& k, std::size_t offset, std::size_t count) {
  if (offset > k.size() || count > k.size() - offset) {
    throw Error(ErrorCode::OutOfRange, "slice exceeds register length");
  }
  if (offset % 8 == 0) {
    return KeyRegister::from_bytes(k.bytes().subspan(offset / 8, bytes_for(count)), count);
  }
  KeyRegister out(count);
  for (std::size_t i = 0; i < count; ++i) out.set_bit(i, k.bit(offset + i));
  return out;
}

KeyRegister concat(const KeyRegister& a, const KeyRegister& b) {
  if (a.size() % 8 == 0) {
    std::vector<std::uint8_t> bytes(a.bytes().begin(), a.bytes().end());
    bytes.insert(bytes.end(), b.bytes().begin(), b.bytes().end());
    return KeyRegister::from_bytes(bytes, a.size() + b.size());
  }
  KeyRegister joined(a.size() + b.size());
  for (std::size_t i = 0; i < a.size(); ++i) joined.set_bit(i, a.bit(i));
  for (std::size_t i = 0; i < b.size(); ++i) joined.set_bit(a.size() + i, b.bit(i));
  return joined;
}

KeyRegister random_register(std::size_t n_bits, Rng& rng) {
  std::vector<std::uint8_t> bytes(bytes_for(n_bits));
  for (std::size_t i = 0; i < bytes.size(); i += 8) {
    const std::uint64_t word = rng();
    for (std::size_t j = 0; j < 8 && i + j < bytes.size(); ++j) {
      bytes[i + j] = static_cast<std::uint8_t>(word >> (56 - 8 * j));
    }
  }
  return KeyRegister::from_bytes(bytes, n_bits);
}

BlockLayout layout(std::size_t payload_bits, std::size_t block_bits) {
  if (block_bits == 0) throw Error(ErrorCode::InvalidArgument, "block size must be positive");
  BlockLayout out;
  out.block_bits = block_bits;
  out.blocks = (payload_bits + block_bits - 1) / block_bits;
  out.pad_bits = out.blocks * block_bits - payload_bits;
  return out;
}

KeyRegister pad(const KeyRegister& k, std::size_t block_bits) {
  const auto target = layout(k.size(), block_bits).padded_bits();
  std::vector<std::uint8_t> bytes(k.bytes().begin(), k.bytes().end());
  bytes.resize(bytes_for(target), 0);
  return KeyRegister::from_bytes(bytes, target);
}

KeyRegister unpad(const KeyRegister& k, std::size_t original_bits, std::size_t block_bits) {
  if (original_bits > k.size() || k.size() - original_bits >= std::max<std::size_t>(block_bits, 1)) {
    throw Error(ErrorCode::OutOfRange, "padded length " + std::to_string(k.size()) +
                                           " is inconsistent with original length " +
                                           std::to_string(original_bits));
  }
  return truncate(k, original_bits);
}

std::vector<std::uint8_t> serialize(const KeyRegister& k) {
  std::vector<std::uint8_t> out(8 + k.bytes().size());
  const std::uint64_t n = k.size();
  for (std::size_t i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(n >> (56 - 8 * i));
  std::copy(k.bytes().begin(), k.bytes().end(), out.begin() + 8);
  return out;
}

KeyRegister deserialize(std::span<const std::uint8_t> wire) {
  if (wire.size() < 8) throw Error(ErrorCode::LengthMismatch, "serialized register lacks its length prefix");
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < 8; ++i) n = (n << 8) | wire[i];
  auto body = wire.subspan(8);
  if (n > body.size() * 8 || body.size() != bytes_for(static_cast<std::size_t>(n))) {
    throw Error(ErrorCode::LengthMismatch, "serialized register body does not match its bit count");
  }
  auto k = KeyRegister::from_bytes(body, static_cast<std::size_t>(n));
  if (!std::equal(body.begin(), body.end(), k.bytes().begin())) {
    throw Error(ErrorCode::InvalidArgument, "serialized register has non-zero trailing bits");
  }
  return k;
}

}  // namespace qkdrelay::keycore
