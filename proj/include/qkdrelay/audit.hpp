#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qkdrelay/cryptoseal.hpp"
#include "qkdrelay/relay.hpp"
#include "qkdrelay/transcript.hpp"

namespace qkdrelay::audit {

// Everything one observer saw: the messages on the channels it can read plus
// the private keys it holds.
struct AdversaryView {
  std::string observer;
  std::string key_holder;  // node whose private keys are included, if any
  Variant variant = Variant::Standard;
  std::vector<std::string> path;
  std::size_t l = 0;
  std::vector<ChannelMessage> messages;
  std::map<std::string, KeyRegister> private_keys;

  bool empty() const noexcept { return messages.empty() && private_keys.empty(); }
};

// View of a trusted node: messages on its incident channels and its own
// one-time-pad keys. `node` defaults to the first intermediary.
AdversaryView charlie_view(const SessionTranscript& transcript, std::optional<std::string> node = std::nullopt);

// View of an outside eavesdropper: every classical message, no private state.
// Compromising a location adds that node's keys.
AdversaryView eve_view(const SessionTranscript& transcript,
                       std::optional<std::string> compromised_location = std::nullopt);

struct Reconstruction {
  KeyRegister derived;
  bool is_final_key = false;
};

// Strips the inbound one-time pad from the payload the observer received.
// Only the standard relay yields the final key this way. Throws
// IncompleteView when the payload or the pad is missing.
Reconstruction reconstruct_as_charlie(const AdversaryView& view);

// True if `k_ab` appears in the view without any cryptographic key: as a
// message body, as the XOR of two equal-length bodies, or (when the view
// carries pads) as a body with a pad stripped.
bool exposes_key(const AdversaryView& view, const KeyRegister& k_ab);

double eta_direct_kem(const cryptoseal::KemParamSet& params);
// 1 for block-aligned l (and l = 0), l / (128 * ceil(l / 128)) otherwise.
double eta_kem_then_aes(std::size_t l = 0);
double final_rate(double r_ac, double r_bc, double eta);
double final_rate(std::span<const double> hop_rates, double eta);

struct EfficiencyReport {
  Variant variant = Variant::Standard;
  std::optional<std::string> kem_params;
  std::optional<std::size_t> l_ct;
  std::size_t sessions = 0;
  std::uint64_t l = 0;  // final-key bits over all completed sessions
  std::uint64_t p = 0;  // 256-bit key blocks over all completed sessions
  double eta = 0.0;            // measured
  double eta_analytic = 0.0;   // from the per-session formulas
  std::map<std::string, std::uint64_t> bits_consumed_per_link;
  std::vector<double> hop_rates_bps;
  double r_final_bps = 0.0;

  double r_ac() const { return hop_rates_bps.empty() ? 0.0 : hop_rates_bps.front(); }
  double r_bc() const { return hop_rates_bps.empty() ? 0.0 : hop_rates_bps.back(); }
};

// Empirical eta = sum(l) / max over links of sum(OTP bits consumed), over
// completed sessions of one variant. Throws InvalidArgument on a mixed batch.
EfficiencyReport measured_eta(std::span<const relay::RelaySession> sessions,
                              std::span<const double> hop_rates_bps = {});

// Two decimals, rounded half up, trailing zeros dropped: 4.17%, 100%.
std::string format_percent(double eta);

struct EtaTableRow {
  std::string protocol;
  cryptoseal::KemParamSet params;
  double eta = 0.0;
};
std::vector<EtaTableRow> eta_table(std::span<const cryptoseal::KemParamSet> params);

// JSON-lines transcript files: one "session" header line, one line per
// ChannelMessage (base64 body), one line per node snapshot.
void write_transcript(std::ostream& out, const SessionTranscript& transcript);
std::vector<SessionTranscript> read_transcripts(std::istream& in);

nlohmann::json to_json(const AdversaryView& view);
nlohmann::json to_json(const Reconstruction& r);
nlohmann::json to_json(const EfficiencyReport& report);
nlohmann::json session_json(const relay::RelaySession& session);

}  // namespace qkdrelay::audit
