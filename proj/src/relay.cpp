#include "qkdrelay/relay.hpp"

#include <algorithm>
#include <set>

#include "qkdrelay/error.hpp"

namespace qkdrelay::relay {

namespace {

using cryptoseal::KemParamSet;
using keycore::KeyRegister;

KeyRegister bytes_register(std::span<const std::uint8_t> bytes) { return KeyRegister::from_bytes(bytes); }

AbortReason zero_reason(std::size_t hop, std::size_t n_hops) {
  if (hop == 0) return AbortReason::ZeroKeyAC;
  if (hop + 1 == n_hops) return AbortReason::ZeroKeyBC;
  return AbortReason::ZeroKeyHop;
}

class ChainRun {
 public:
  ChainRun(RelayNetwork& net, SessionRequest req, const RelayContext& ctx)
      : net_(net), req_(std::move(req)), ctx_(ctx) {}

  RelayResult run();

 private:
  const std::string& alice() const { return req_.path.front(); }
  const std::string& bob() const { return req_.path.back(); }
  std::size_t n_hops() const { return req_.path.size() - 1; }

  void validate_request();
  bool exchange_kem();
  void abort(AbortReason reason, std::string detail);
  KeyRegister build_payload();
  KeyRegister recover_at_bob(const KeyRegister& received);
  void record_snapshots();

  RelayNetwork& net_;
  SessionRequest req_;
  const RelayContext& ctx_;
  RelayResult out_;
  std::vector<qkdsim::QkdLink*> links_;
  std::vector<KeyRegister> otp_;

  std::optional<cryptoseal::KemKeyPair> bob_pair_;
  KeyRegister alice_aes_;
  KeyRegister bob_aes_;
};

void ChainRun::validate_request() {
  const auto& path = req_.path;
  if (path.size() < 3) {
    throw Error(ErrorCode::ValidationError, "a relay path needs at least Alice, one trusted node and Bob");
  }
  std::set<std::string> seen;
  for (const auto& node : path) {
    if (!net_.has_node(node)) throw Error(ErrorCode::ValidationError, "unknown node '" + node + "' in path");
    if (!seen.insert(node).second) throw Error(ErrorCode::ValidationError, "node '" + node + "' repeats in path");
  }
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    auto* link = net_.find_link(path[i], path[i + 1]);
    if (link == nullptr) {
      throw Error(ErrorCode::ValidationError, "no QKD link between '" + path[i] + "' and '" + path[i + 1] + "'");
    }
    links_.push_back(link);
  }
  if (req_.variant != Variant::Standard) cryptoseal::validate(req_.kem);
}

void ChainRun::abort(AbortReason reason, std::string detail) {
  auto& s = out_.session;
  s.status = SessionStatus::Aborted;
  s.abort_reason = reason;
  s.abort_detail = std::move(detail);
  s.alice_key = {};
  s.bob_key = {};
  for (std::size_t i = 1; i < req_.path.size(); ++i) {
    out_.transcript.send(alice(), req_.path[i], MessageKind::Abort,
                         KeyRegister::from_uint64(static_cast<std::uint64_t>(reason)));
  }
  out_.transcript.status = SessionStatus::Aborted;
}

// Step 1 of the PQC-secured protocol, or Bob's public key for the direct
// KEM relay. Returns false after aborting.
bool ChainRun::exchange_kem() {
  auto& s = out_.session;
  auto& t = out_.transcript;
  const auto& kem = *ctx_.crypto.kem;
  try {
    if (req_.variant == Variant::DirectKem) {
      bob_pair_ = kem.keygen(req_.kem, ctx_.rng);
      t.send(bob(), alice(), MessageKind::KemPublicKey, bytes_register(bob_pair_->public_key.bytes));
      return true;
    }
    auto* cache = ctx_.aes_cache;
    if (cache != nullptr && cache->k_aes && cache->uses < cache->reuse_limit) {
      alice_aes_ = *cache->k_aes;
      bob_aes_ = *cache->k_aes;
    } else {
      bob_pair_ = kem.keygen(req_.kem, ctx_.rng);
      t.send(bob(), alice(), MessageKind::KemPublicKey, bytes_register(bob_pair_->public_key.bytes));
      auto enc = kem.encapsulate(bob_pair_->public_key, ctx_.rng);
      t.send(alice(), bob(), MessageKind::KemCiphertext, bytes_register(enc.ciphertext));
      bob_aes_ = kem.decapsulate(bob_pair_->secret_key, enc.ciphertext);
      alice_aes_ = enc.shared_key;
      s.kem_ct = std::move(enc.ciphertext);
      if (cache != nullptr) {
        cache->k_aes = alice_aes_;
        cache->uses = 0;
      }
    }
    const auto nonce = cryptoseal::random_nonce(ctx_.rng);
    t.send(alice(), bob(), MessageKind::NonceAnnounce, bytes_register(nonce));
    s.nonce = nonce;
    s.k_aes = alice_aes_;
  } catch (const Error& e) {
    abort(AbortReason::ProviderFailure, e.what());
    return false;
  }
  return true;
}

KeyRegister ChainRun::build_payload() {
  auto& s = out_.session;
  switch (req_.variant) {
    case Variant::Standard:
      s.alice_key = keycore::random_register(s.l, ctx_.rng);
      return s.alice_key;
    case Variant::PqcSecured:
      s.alice_key = keycore::random_register(s.l, ctx_.rng);
      s.k_enc_ab = ctx_.crypto.cipher->encrypt(alice_aes_, *s.nonce, s.alice_key);
      return *s.k_enc_ab;
    case Variant::DirectKem: {
      // Each 256-bit segment of k_AB is its own encapsulation.
      const auto p = keycore::layout(s.l, cryptoseal::kKemInputKeyBits).blocks;
      KeyRegister shared;
      cryptoseal::Bytes cts;
      for (std::size_t j = 0; j < p; ++j) {
        auto enc = ctx_.crypto.kem->encapsulate(bob_pair_->public_key, ctx_.rng);
        shared = keycore::concat(shared, enc.shared_key);
        cts.insert(cts.end(), enc.ciphertext.begin(), enc.ciphertext.end());
      }
      s.alice_key = keycore::truncate(shared, s.l);
      s.kem_ct = cts;
      return bytes_register(cts);
    }
  }
  return {};
}

KeyRegister ChainRun::recover_at_bob(const KeyRegister& received) {
  const auto& s = out_.session;
  switch (req_.variant) {
    case Variant::Standard:
      return received;
    case Variant::PqcSecured:
      return keycore::truncate(ctx_.crypto.cipher->decrypt(bob_aes_, *s.nonce, received), s.l);
    case Variant::DirectKem: {
      const auto l_ct = req_.kem.ciphertext_bits;
      KeyRegister shared;
      for (std::size_t off = 0; off < received.size(); off += l_ct) {
        const auto ct = keycore::slice(received, off, l_ct);
        shared = keycore::concat(shared, ctx_.crypto.kem->decapsulate(bob_pair_->secret_key, ct.bytes()));
      }
      return keycore::truncate(shared, s.l);
    }
  }
  return {};
}

void ChainRun::record_snapshots() {
  auto& s = out_.session;
  auto& t = out_.transcript;
  const bool done = s.completed();
  for (std::size_t i = 0; i < req_.path.size(); ++i) {
    NodeSnapshot snap{req_.path[i], net_.honesty(req_.path[i]), {}};
    if (done) {
      if (i > 0) snap.keys["otp_in"] = otp_[i - 1];
      if (i + 1 < req_.path.size()) snap.keys["otp_out"] = otp_[i];
      const bool endpoint = (i == 0 || i + 1 == req_.path.size());
      if (endpoint) {
        snap.keys["k_AB"] = i == 0 ? s.alice_key : s.bob_key;
        if (s.k_aes) {
          snap.keys["k_AES"] = i == 0 ? alice_aes_ : bob_aes_;
          snap.keys["nonce"] = bytes_register(*s.nonce);
        }
      }
    }
    t.snapshots.push_back(std::move(snap));
  }
}

RelayResult ChainRun::run() {
  validate_request();
  auto& s = out_.session;
  auto& t = out_.transcript;
  s.session_id = req_.session_id;
  s.variant = req_.variant;
  s.path = req_.path;
  s.requested_bits = req_.requested_bits;
  t.session_id = req_.session_id;
  t.variant = req_.variant;
  t.path = req_.path;
  if (req_.variant != Variant::Standard) {
    s.kem_params = req_.kem;
    t.kem_params = req_.kem.name;
  }

  for (std::size_t i = 0; i < links_.size(); ++i) {
    HopRecord hop;
    hop.link_id = links_[i]->config().link_id;
    hop.from = req_.path[i];
    hop.to = req_.path[i + 1];
    hop.available_bits = links_[i]->pool().available_bits();
    hop.length_bits = hop_capacity(req_.variant, req_.requested_bits, hop.available_bits, req_.kem);
    s.hops.push_back(std::move(hop));
  }

  if (req_.variant != Variant::Standard && !exchange_kem()) {
    record_snapshots();
    return std::move(out_);
  }

  // Every node past Alice's first hop reports its upstream hop length.
  std::vector<std::size_t> lengths;
  for (std::size_t i = 0; i < s.hops.size(); ++i) {
    lengths.push_back(s.hops[i].length_bits);
    if (i > 0) {
      t.send(req_.path[i + 1], alice(), MessageKind::LengthAnnounce,
             KeyRegister::from_uint64(s.hops[i].length_bits), static_cast<int>(i));
    }
  }
  s.l_AC = lengths.front();
  s.l_BC = lengths.back();
  const auto decision = negotiate_length(lengths);
  if (decision.aborted()) {
    abort(decision.reason, "a hop holds no usable key");
    record_snapshots();
    return std::move(out_);
  }
  s.l = decision.l;
  t.l = decision.l;
  for (std::size_t i = 1; i < req_.path.size(); ++i) {
    t.send(alice(), req_.path[i], MessageKind::LengthDecision, KeyRegister::from_uint64(s.l));
  }

  s.payload_bits = otp_bits_required(req_.variant, s.l, req_.kem);
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (links_[i]->pool().available_bits() < s.payload_bits) {
      abort(AbortReason::InsufficientKey, "link " + s.hops[i].link_id + " cannot serve " +
                                              std::to_string(s.payload_bits) + " bits");
      record_snapshots();
      return std::move(out_);
    }
  }
  for (std::size_t i = 0; i < links_.size(); ++i) {
    auto r = links_[i]->pool().reserve(s.payload_bits);
    s.hops[i].key_ids = std::move(r.key_ids);
    s.hops[i].otp_bits = s.payload_bits;
    s.hops[i].residue_bits = r.residue_bits;
    otp_.push_back(std::move(r.material));
  }

  try {
    const auto payload = build_payload();
    auto m = payload ^ otp_[0];
    t.send(alice(), req_.path[1], MessageKind::Payload_m1, m, 0);
    s.hop_messages.push_back(m);
    // Intermediaries strip the inbound pad and apply the outbound one; they
    // only ever hold the relayed payload.
    for (std::size_t i = 1; i < n_hops(); ++i) {
      const auto relayed = m ^ otp_[i - 1];
      m = relayed ^ otp_[i];
      t.send(req_.path[i], req_.path[i + 1], MessageKind::Payload_m2, m, static_cast<int>(i));
      s.hop_messages.push_back(m);
    }
    s.bob_key = recover_at_bob(m ^ otp_.back());
  } catch (const Error& e) {
    abort(AbortReason::ProviderFailure, e.what());
    record_snapshots();
    return std::move(out_);
  }

  if (req_.variant == Variant::PqcSecured && ctx_.aes_cache != nullptr) ++ctx_.aes_cache->uses;
  s.status = SessionStatus::Completed;
  t.status = SessionStatus::Completed;
  record_snapshots();
  return std::move(out_);
}

RelayResult run_three_node(RelayNetwork& net, SessionRequest request, const RelayContext& ctx, Variant v) {
  if (request.path.size() != 3) {
    throw Error(ErrorCode::ValidationError, "the trusted-node protocols take exactly three nodes");
  }
  request.variant = v;
  return ChainRun(net, std::move(request), ctx).run();
}

}  // namespace

std::string_view to_string(AbortReason r) {
  switch (r) {
    case AbortReason::None: return "None";
    case AbortReason::ZeroKeyAC: return "ZeroKeyAC";
    case AbortReason::ZeroKeyBC: return "ZeroKeyBC";
    case AbortReason::ZeroKeyHop: return "ZeroKeyHop";
    case AbortReason::InsufficientKey: return "InsufficientKey";
    case AbortReason::ProviderFailure: return "ProviderFailure";
  }
  return "?";
}

void RelayNetwork::add_node(std::string id, HonestyLevel honesty) {
  if (!nodes_.emplace(id, honesty).second) {
    throw Error(ErrorCode::ValidationError, "duplicate node '" + id + "'");
  }
}

qkdsim::QkdLink& RelayNetwork::add_link(qkdsim::QkdLinkConfig config, std::uint64_t run_seed) {
  config.validate();
  for (const auto* end : {&config.endpoint_a, &config.endpoint_b}) {
    if (!has_node(*end)) {
      throw Error(ErrorCode::ValidationError, "link '" + config.link_id + "' references unknown node '" + *end + "'");
    }
  }
  if (find_link(config.endpoint_a, config.endpoint_b) != nullptr) {
    throw Error(ErrorCode::ValidationError,
                "nodes '" + config.endpoint_a + "' and '" + config.endpoint_b + "' already share a link");
  }
  links_.push_back(std::make_unique<qkdsim::QkdLink>(std::move(config), run_seed));
  return *links_.back();
}

bool RelayNetwork::has_node(std::string_view id) const { return nodes_.find(id) != nodes_.end(); }

HonestyLevel RelayNetwork::honesty(std::string_view id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorCode::ValidationError, "unknown node '" + std::string(id) + "'");
  return it->second;
}

qkdsim::QkdLink* RelayNetwork::find_link(std::string_view a, std::string_view b) {
  for (auto& link : links_) {
    const auto& c = link->config();
    if ((c.endpoint_a == a && c.endpoint_b == b) || (c.endpoint_a == b && c.endpoint_b == a)) return link.get();
  }
  return nullptr;
}

const qkdsim::QkdLink* RelayNetwork::find_link(std::string_view a, std::string_view b) const {
  return const_cast<RelayNetwork*>(this)->find_link(a, b);
}

std::map<std::string, std::size_t> RelaySession::bits_consumed_per_link() const {
  std::map<std::string, std::size_t> out;
  for (const auto& hop : hops) out[hop.link_id] += hop.otp_bits;
  return out;
}

LengthDecision negotiate_length(std::size_t l_ac, std::size_t l_bc) {
  const std::size_t lengths[] = {l_ac, l_bc};
  return negotiate_length(lengths);
}

LengthDecision negotiate_length(std::span<const std::size_t> hop_lengths) {
  if (hop_lengths.empty()) throw Error(ErrorCode::InvalidArgument, "no hop lengths to negotiate");
  for (std::size_t i = 0; i < hop_lengths.size(); ++i) {
    if (hop_lengths[i] == 0) return {0, zero_reason(i, hop_lengths.size())};
  }
  return {*std::min_element(hop_lengths.begin(), hop_lengths.end()), AbortReason::None};
}

std::size_t otp_bits_required(Variant variant, std::size_t l, const cryptoseal::KemParamSet& kem) {
  switch (variant) {
    case Variant::Standard:
      return l;
    case Variant::PqcSecured:
      return keycore::layout(l, keycore::kCipherBlockBits).padded_bits();
    case Variant::DirectKem:
      return keycore::layout(l, cryptoseal::kKemInputKeyBits).blocks * kem.ciphertext_bits;
  }
  return l;
}

std::size_t hop_capacity(Variant variant, std::size_t requested_bits, std::size_t available_bits,
                         const cryptoseal::KemParamSet& kem) {
  switch (variant) {
    case Variant::Standard:
      return std::min(requested_bits, available_bits);
    case Variant::PqcSecured:
      return std::min(requested_bits, available_bits / keycore::kCipherBlockBits * keycore::kCipherBlockBits);
    case Variant::DirectKem:
      return std::min(requested_bits, available_bits / kem.ciphertext_bits * cryptoseal::kKemInputKeyBits);
  }
  return 0;
}

RelayResult run_standard(RelayNetwork& net, SessionRequest request, const RelayContext& ctx) {
  return run_three_node(net, std::move(request), ctx, Variant::Standard);
}

RelayResult run_pqc_secured(RelayNetwork& net, SessionRequest request, const RelayContext& ctx) {
  return run_three_node(net, std::move(request), ctx, Variant::PqcSecured);
}

RelayResult run_direct_kem(RelayNetwork& net, SessionRequest request, const RelayContext& ctx) {
  return run_three_node(net, std::move(request), ctx, Variant::DirectKem);
}

RelayResult run_multi_hop(RelayNetwork& net, SessionRequest request, const RelayContext& ctx) {
  return ChainRun(net, std::move(request), ctx).run();
}

}  // namespace qkdrelay::relay
