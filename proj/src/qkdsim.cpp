#include "qkdrelay/qkdsim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qkdrelay/error.hpp"

namespace qkdrelay::qkdsim {

namespace {

void require(bool ok, const std::string& link_id, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ValidationError, "link '" + link_id + "': " + what);
}

double sample_clipped(Rng& rng, double mean, double stddev, double lo, double hi) {
  double v = mean;
  if (stddev > 0.0) v = std::normal_distribution<double>(mean, stddev)(rng);
  return std::clamp(v, lo, hi);
}

Rng seeded(std::uint64_t link_seed, std::uint64_t run_seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(link_seed), static_cast<std::uint32_t>(link_seed >> 32),
                    static_cast<std::uint32_t>(run_seed), static_cast<std::uint32_t>(run_seed >> 32)};
  return Rng(seq);
}

}  // namespace

void QkdLinkConfig::validate() const {
  require(!link_id.empty(), link_id, "link_id must not be empty");
  require(!endpoint_a.empty() && !endpoint_b.empty(), link_id, "both endpoints are required");
  require(endpoint_a != endpoint_b, link_id, "endpoints must differ");
  require(fiber_length_km >= 0.0, link_id, "fiber_length_km must be non-negative");
  require(loss_db >= 0.0, link_id, "loss_db must be non-negative");
  require(mean_rate_bps >= 0.0, link_id, "mean_rate_bps must be non-negative");
  require(rate_std_bps >= 0.0, link_id, "rate_std_bps must be non-negative");
  require(mean_qber >= 0.0 && mean_qber <= 1.0, link_id, "mean_qber must lie in [0, 1]");
  require(qber_std >= 0.0, link_id, "qber_std must be non-negative");
  require(mean_visibility >= 0.0 && mean_visibility <= 1.0, link_id, "mean_visibility must lie in [0, 1]");
  require(visibility_std >= 0.0, link_id, "visibility_std must be non-negative");
  require(capacity_blocks > 0, link_id, "capacity_blocks must be positive");
}

// --- KeyPool -----------------------------------------------------------------

KeyPool::KeyPool(std::string endpoint_a, std::string endpoint_b, std::size_t capacity_blocks)
    : endpoint_a_(std::move(endpoint_a)), endpoint_b_(std::move(endpoint_b)), capacity_blocks_(capacity_blocks) {}

bool KeyPool::has_endpoint(std::string_view node) const noexcept {
  return node == endpoint_a_ || node == endpoint_b_;
}

const std::string& KeyPool::peer_of(std::string_view node) const { return side(node) == 0 ? endpoint_b_ : endpoint_a_; }

int KeyPool::side(std::string_view node) const {
  if (node == endpoint_a_) return 0;
  if (node == endpoint_b_) return 1;
  throw Error(ErrorCode::InvalidArgument, "node '" + std::string(node) + "' is not an endpoint of this key pool");
}

bool KeyPool::deposit(const KeyRegister& block, const encoding::Uuid& id) {
  if (block.size() != kBlockBits) {
    throw Error(ErrorCode::LengthMismatch, "key blocks are exactly 256 bits");
  }
  for (auto& a : acct_) a.produced_bits += kBlockBits;
  if (available_blocks() >= capacity_blocks_) {
    for (auto& a : acct_) a.overflow_discarded_bits += kBlockBits;
    return false;
  }
  Block b;
  b.id = id;
  std::copy(block.bytes().begin(), block.bytes().end(), b.bits.begin());
  blocks_.push_back(b);
  return true;
}

std::size_t KeyPool::deposit_material(const KeyRegister& material, Rng& rng) {
  std::size_t kept = 0;
  for (std::size_t off = 0; off + kBlockBits <= material.size(); off += kBlockBits) {
    if (deposit(keycore::slice(material, off, kBlockBits), encoding::random_uuid(rng))) ++kept;
  }
  return kept;
}

KeyRegister KeyPool::material(std::size_t first, std::size_t count, std::size_t bits) const {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(count * kBlockBits / 8);
  for (std::size_t i = first; i < first + count; ++i) {
    bytes.insert(bytes.end(), blocks_[i].bits.begin(), blocks_[i].bits.end());
  }
  return keycore::truncate(KeyRegister::from_bytes(bytes), bits);
}

void KeyPool::consume(int s, std::size_t first, std::size_t count, std::size_t used_bits) {
  for (std::size_t i = first; i < first + count; ++i) ++blocks_[i].served[static_cast<std::size_t>(s)];
  auto& a = acct_[static_cast<std::size_t>(s)];
  a.served_bits += used_bits;
  a.residue_discarded_bits += count * kBlockBits - used_bits;
}

Reservation KeyPool::reserve(std::size_t l_bits) {
  const auto need = keycore::layout(l_bits, kBlockBits).blocks;
  if (need > available_blocks()) {
    throw Error(ErrorCode::InsufficientKey, "requested " + std::to_string(l_bits) + " bits, only " +
                                                std::to_string(available_bits()) + " available");
  }
  Reservation r;
  r.material = material(head_, need, l_bits);
  r.residue_bits = need * kBlockBits - l_bits;
  for (std::size_t i = head_; i < head_ + need; ++i) r.key_ids.push_back(encoding::uuid_to_string(blocks_[i].id));
  consume(0, head_, need, l_bits);
  consume(1, head_, need, l_bits);
  head_ += need;
  return r;
}

StoreStatus KeyPool::status(std::string_view node) const {
  side(node);
  return {available_blocks(), kBlockBits, capacity_blocks_};
}

std::vector<DeliveredKey> KeyPool::get_enc_keys(std::string_view node, std::size_t number, std::size_t size_bits) {
  const int s = side(node);
  if (size_bits == 0) throw Error(ErrorCode::InvalidArgument, "key size must be positive");
  const auto per_key = keycore::layout(size_bits, kBlockBits).blocks;
  if (number * per_key > available_blocks()) {
    throw Error(ErrorCode::InsufficientKey, std::to_string(number) + " keys of " + std::to_string(size_bits) +
                                                " bits need " + std::to_string(number * per_key) +
                                                " blocks, " + std::to_string(available_blocks()) + " available");
  }
  std::vector<DeliveredKey> out;
  for (std::size_t k = 0; k < number; ++k) {
    auto id = encoding::uuid_to_string(blocks_[head_].id);
    out.push_back({id, material(head_, per_key, size_bits)});
    consume(s, head_, per_key, size_bits);
    issued_.emplace(std::move(id), IssuedKey{head_, per_key, size_bits});
    head_ += per_key;
  }
  return out;
}

std::vector<DeliveredKey> KeyPool::get_dec_keys(std::string_view node, std::span<const std::string> key_ids) {
  const int s = side(node);
  std::vector<const IssuedKey*> found;
  for (const auto& id : key_ids) {
    auto it = issued_.find(id);
    if (it == issued_.end()) throw Error(ErrorCode::UnknownKeyId, "unknown key id " + id);
    const auto& k = it->second;
    for (std::size_t i = k.first; i < k.first + k.count; ++i) {
      if (blocks_[i].served[static_cast<std::size_t>(s)] > 0) {
        throw Error(ErrorCode::AlreadyConsumed, "key " + id + " was already served to " + std::string(node));
      }
    }
    found.push_back(&k);
  }
  std::vector<DeliveredKey> out;
  for (std::size_t i = 0; i < found.size(); ++i) {
    const auto& k = *found[i];
    out.push_back({key_ids[i], material(k.first, k.count, k.size_bits)});
    consume(s, k.first, k.count, k.size_bits);
  }
  return out;
}

std::vector<KeyStoreEntry> KeyPool::entries(std::string_view node) const {
  const auto s = static_cast<std::size_t>(side(node));
  std::vector<KeyStoreEntry> out;
  out.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    out.push_back({b.id, KeyRegister::from_bytes(b.bits), b.served[s] > 0});
  }
  return out;
}

PoolAccounting KeyPool::accounting(std::string_view node) const {
  const auto s = static_cast<std::size_t>(side(node));
  auto a = acct_[s];
  a.stored_bits = 0;
  for (const auto& b : blocks_) {
    if (b.served[s] == 0) a.stored_bits += kBlockBits;
  }
  return a;
}

bool KeyPool::single_use_holds() const noexcept {
  return std::all_of(blocks_.begin(), blocks_.end(),
                     [](const Block& b) { return b.served[0] <= 1 && b.served[1] <= 1; });
}

// --- QkdLink -----------------------------------------------------------------

QkdLink::QkdLink(QkdLinkConfig config, std::uint64_t run_seed)
    : config_(std::move(config)),
      rng_(seeded(config_.seed, run_seed)),
      pool_(config_.endpoint_a, config_.endpoint_b, config_.capacity_blocks) {
  config_.validate();
}

AdvanceResult QkdLink::advance(double dt_s) {
  if (!(dt_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "tick length must be positive");
  AdvanceResult out;
  const double rate = sample_clipped(rng_, config_.mean_rate_bps, config_.rate_std_bps, 0.0, HUGE_VAL);
  const double qber = sample_clipped(rng_, config_.mean_qber, config_.qber_std, 0.0, 1.0);
  const double vis = sample_clipped(rng_, config_.mean_visibility, config_.visibility_std, 0.0, 1.0);

  pending_bits_ += rate * dt_s;
  const auto n_blocks = static_cast<std::size_t>(std::floor(pending_bits_ / kBlockBits));
  pending_bits_ -= static_cast<double>(n_blocks * kBlockBits);

  for (std::size_t i = 0; i < n_blocks; ++i) {
    KeyStoreEntry e;
    e.key_id = encoding::random_uuid(rng_);
    e.block = config_.zero_material ? KeyRegister(kBlockBits) : keycore::random_register(kBlockBits, rng_);
    pool_.deposit(e.block, e.key_id);
    out.new_blocks.push_back(std::move(e));
  }
  elapsed_s_ += dt_s;
  out.telemetry = {elapsed_s_, config_.link_id, rate, qber, vis};
  return out;
}

}  // namespace qkdrelay::qkdsim
