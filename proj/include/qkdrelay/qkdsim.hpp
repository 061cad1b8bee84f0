#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qkdrelay/encoding.hpp"
#include "qkdrelay/keycore.hpp"

namespace qkdrelay::qkdsim {

using keycore::KeyRegister;

inline constexpr std::size_t kBlockBits = keycore::kKeyBlockBits;
inline constexpr std::size_t kDefaultCapacityBlocks = std::size_t{1} << 21;

struct QkdLinkConfig {
  std::string link_id;
  std::string endpoint_a;
  std::string endpoint_b;
  double fiber_length_km = 0.0;
  double loss_db = 0.0;
  double mean_rate_bps = 0.0;
  double rate_std_bps = 0.0;
  double mean_qber = 0.0;
  double qber_std = 0.0;
  double mean_visibility = 1.0;
  double visibility_std = 0.0;
  std::uint64_t seed = 0;
  std::size_t capacity_blocks = kDefaultCapacityBlocks;
  // Test hook: every produced block is all zeros.
  bool zero_material = false;

  // Throws ValidationError naming the offending field.
  void validate() const;
};

struct KeyStoreEntry {
  encoding::Uuid key_id{};
  KeyRegister block;  // always kBlockBits wide
  bool consumed = false;
};

struct LinkTelemetrySample {
  double timestamp_s = 0.0;
  std::string link_id;
  double secret_key_rate_bps = 0.0;
  double qber = 0.0;
  double visibility = 0.0;
};

struct Reservation {
  std::vector<std::string> key_ids;  // ids of every block touched, oldest first
  KeyRegister material;              // exactly the requested number of bits
  std::size_t residue_bits = 0;      // tail of the last block, discarded
};

struct StoreStatus {
  std::size_t stored_key_count = 0;
  std::size_t key_size_bits = kBlockBits;
  std::size_t capacity = 0;
};

struct DeliveredKey {
  std::string key_id;
  KeyRegister key;
};

// Per-endpoint bit accounting. At all times
//   produced = served + stored + residue_discarded + overflow_discarded.
struct PoolAccounting {
  std::uint64_t produced_bits = 0;
  std::uint64_t served_bits = 0;
  std::uint64_t stored_bits = 0;
  std::uint64_t residue_discarded_bits = 0;
  std::uint64_t overflow_discarded_bits = 0;

  bool conserved() const noexcept {
    return produced_bits == served_bits + stored_bits + residue_discarded_bits + overflow_discarded_bits;
  }
};

// The key stores of the two endpoints of one link. Both endpoints receive
// identical 256-bit blocks; each endpoint tracks its own consumption.
// Material is always served from the oldest blocks that neither endpoint has
// consumed, and a block is never served twice on the same side.
class KeyPool {
 public:
  KeyPool(std::string endpoint_a, std::string endpoint_b, std::size_t capacity_blocks = kDefaultCapacityBlocks);

  const std::string& endpoint_a() const noexcept { return endpoint_a_; }
  const std::string& endpoint_b() const noexcept { return endpoint_b_; }
  bool has_endpoint(std::string_view node) const noexcept;
  const std::string& peer_of(std::string_view node) const;

  // Appends one block to both stores, or drops it when the pool is full.
  // Returns false when dropped.
  bool deposit(const KeyRegister& block, const encoding::Uuid& id);
  // Splits `material` into whole blocks with ids from `rng`; a partial tail is
  // not stored. Returns the number of blocks kept.
  std::size_t deposit_material(const KeyRegister& material, Rng& rng);

  // Blocks unconsumed on both sides.
  std::size_t available_blocks() const noexcept { return blocks_.size() - head_; }
  std::size_t available_bits() const noexcept { return available_blocks() * kBlockBits; }

  // Paired consumption of the oldest blocks. Throws InsufficientKey.
  Reservation reserve(std::size_t l_bits);

  StoreStatus status(std::string_view node) const;
  // Serves fresh keys to `node` (master side) and marks them consumed there.
  std::vector<DeliveredKey> get_enc_keys(std::string_view node, std::size_t number, std::size_t size_bits);
  // Serves keys previously issued to the peer, by id.
  std::vector<DeliveredKey> get_dec_keys(std::string_view node, std::span<const std::string> key_ids);

  std::vector<KeyStoreEntry> entries(std::string_view node) const;
  PoolAccounting accounting(std::string_view node) const;
  // True iff no block has ever been served more than once on either side.
  bool single_use_holds() const noexcept;

 private:
  struct Block {
    encoding::Uuid id{};
    std::array<std::uint8_t, kBlockBits / 8> bits{};
    std::array<std::uint32_t, 2> served{};  // per side
  };
  struct IssuedKey {
    std::size_t first = 0;
    std::size_t count = 0;
    std::size_t size_bits = 0;
  };

  int side(std::string_view node) const;
  KeyRegister material(std::size_t first, std::size_t count, std::size_t bits) const;
  void consume(int side, std::size_t first, std::size_t count, std::size_t used_bits);

  std::string endpoint_a_;
  std::string endpoint_b_;
  std::size_t capacity_blocks_;
  std::vector<Block> blocks_;
  std::size_t head_ = 0;
  std::map<std::string, IssuedKey, std::less<>> issued_;
  std::array<PoolAccounting, 2> acct_{};
};

struct AdvanceResult {
  std::vector<KeyStoreEntry> new_blocks;
  LinkTelemetrySample telemetry;
};

// One QKD link: a stochastic secret-key source feeding a KeyPool.
// Each tick draws a rate from a normal law clipped at 0, accumulates
// fractional bits across ticks and emits the whole blocks. QBER and
// visibility are drawn the same way and reported only.
class QkdLink {
 public:
  // `run_seed` is mixed with the configured link seed.
  explicit QkdLink(QkdLinkConfig config, std::uint64_t run_seed = 0);

  const QkdLinkConfig& config() const noexcept { return config_; }
  KeyPool& pool() noexcept { return pool_; }
  const KeyPool& pool() const noexcept { return pool_; }
  double elapsed_s() const noexcept { return elapsed_s_; }

  AdvanceResult advance(double dt_s);

 private:
  QkdLinkConfig config_;
  Rng rng_;
  double pending_bits_ = 0.0;
  double elapsed_s_ = 0.0;
  KeyPool pool_;
};

}  // namespace qkdrelay::qkdsim
