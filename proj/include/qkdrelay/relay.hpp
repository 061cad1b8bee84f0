#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qkdrelay/cryptoseal.hpp"
#include "qkdrelay/qkdsim.hpp"
#include "qkdrelay/transcript.hpp"

namespace qkdrelay::relay {

enum class AbortReason {
  None,
  ZeroKeyAC,        // first hop has no key
  ZeroKeyBC,        // last hop has no key
  ZeroKeyHop,       // an inner hop of a longer chain has no key
  InsufficientKey,  // a store could not serve the negotiated payload
  ProviderFailure,
};

std::string_view to_string(AbortReason r);

// Nodes with their honesty level plus the QKD links between them.
class RelayNetwork {
 public:
  void add_node(std::string id, HonestyLevel honesty = HonestyLevel::Honest);
  qkdsim::QkdLink& add_link(qkdsim::QkdLinkConfig config, std::uint64_t run_seed = 0);

  bool has_node(std::string_view id) const;
  HonestyLevel honesty(std::string_view id) const;
  qkdsim::QkdLink* find_link(std::string_view a, std::string_view b);
  const qkdsim::QkdLink* find_link(std::string_view a, std::string_view b) const;
  std::vector<std::unique_ptr<qkdsim::QkdLink>>& links() noexcept { return links_; }
  const std::vector<std::unique_ptr<qkdsim::QkdLink>>& links() const noexcept { return links_; }

 private:
  std::map<std::string, HonestyLevel, std::less<>> nodes_;
  std::vector<std::unique_ptr<qkdsim::QkdLink>> links_;
};

struct SessionRequest {
  std::string session_id;
  Variant variant = Variant::PqcSecured;
  std::vector<std::string> path;  // Alice, intermediaries..., Bob
  std::size_t requested_bits = 0;
  cryptoseal::KemParamSet kem = cryptoseal::KemParamSet::kem512();
};

// k_AES shared between sessions when `reuse_limit` > 1. Each session still
// draws a fresh nonce.
struct AesKeyCache {
  std::size_t reuse_limit = 1;
  std::optional<KeyRegister> k_aes;
  std::size_t uses = 0;
};

struct RelayContext {
  const cryptoseal::CryptoSuite& crypto;
  Rng& rng;
  AesKeyCache* aes_cache = nullptr;
};

struct HopRecord {
  std::string link_id;
  std::string from;
  std::string to;
  std::size_t available_bits = 0;  // store content before the session
  std::size_t length_bits = 0;     // l_i: final-key bits this hop can carry
  std::vector<std::string> key_ids;
  std::size_t otp_bits = 0;        // one-time-pad bits consumed
  std::size_t residue_bits = 0;    // block tail discarded by the store
};

struct RelaySession {
  std::string session_id;
  Variant variant = Variant::Standard;
  std::vector<std::string> path;
  std::size_t requested_bits = 0;
  std::size_t l_AC = 0;
  std::size_t l_BC = 0;
  std::size_t l = 0;
  std::size_t payload_bits = 0;  // length of the relayed payload on every hop
  std::vector<HopRecord> hops;

  KeyRegister alice_key;  // k_AB as held by Alice
  KeyRegister bob_key;    // k_AB as recovered by Bob
  std::optional<KeyRegister> k_aes;
  std::optional<KeyRegister> k_enc_ab;
  std::vector<KeyRegister> hop_messages;  // m_1 ... m_{N-1}
  std::optional<cryptoseal::Bytes> kem_ct;
  std::optional<cryptoseal::Nonce> nonce;
  std::optional<cryptoseal::KemParamSet> kem_params;

  SessionStatus status = SessionStatus::Running;
  AbortReason abort_reason = AbortReason::None;
  std::string abort_detail;

  const KeyRegister& m_1() const { return hop_messages.front(); }
  const KeyRegister& m_2() const { return hop_messages.back(); }
  bool completed() const noexcept { return status == SessionStatus::Completed; }
  bool keys_match() const { return completed() && alice_key == bob_key && alice_key.size() == l; }
  std::map<std::string, std::size_t> bits_consumed_per_link() const;
};

struct RelayResult {
  RelaySession session;
  SessionTranscript transcript;
};

struct LengthDecision {
  std::size_t l = 0;
  AbortReason reason = AbortReason::None;
  bool aborted() const noexcept { return reason != AbortReason::None; }
};

// Abort when either length is 0, otherwise l = min(l_AC, l_BC).
LengthDecision negotiate_length(std::size_t l_ac, std::size_t l_bc);
// Chain form: one length per hop, Alice's hop first.
LengthDecision negotiate_length(std::span<const std::size_t> hop_lengths);

// One-time-pad bits each hop spends to relay a final key of `l` bits.
std::size_t otp_bits_required(Variant variant, std::size_t l, const cryptoseal::KemParamSet& kem);
// Largest final-key length (<= requested) a hop holding `available_bits` can carry.
std::size_t hop_capacity(Variant variant, std::size_t requested_bits, std::size_t available_bits,
                         const cryptoseal::KemParamSet& kem);

// Three-node protocols; the path must be {Alice, Charlie, Bob}.
RelayResult run_standard(RelayNetwork& net, SessionRequest request, const RelayContext& ctx);
RelayResult run_pqc_secured(RelayNetwork& net, SessionRequest request, const RelayContext& ctx);
RelayResult run_direct_kem(RelayNetwork& net, SessionRequest request, const RelayContext& ctx);

// Any chain of N >= 3 nodes and any variant. Precondition violations (bad
// path, missing link) throw ValidationError; key shortage and provider
// errors end the session as Aborted.
RelayResult run_multi_hop(RelayNetwork& net, SessionRequest request, const RelayContext& ctx);

}  // namespace qkdrelay::relay
