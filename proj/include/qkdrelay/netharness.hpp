#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qkdrelay/audit.hpp"
#include "qkdrelay/cryptoseal.hpp"
#include "qkdrelay/delivery.hpp"
#include "qkdrelay/qkdsim.hpp"
#include "qkdrelay/relay.hpp"
#include "qkdrelay/transcript.hpp"

namespace qkdrelay::netharness {

struct NodeSpec {
  std::string id;
  std::string display_name;
  HonestyLevel honesty = HonestyLevel::Honest;
};

// Nodes plus QKD links. Classical channels form an implicit authenticated
// full mesh and are not listed.
struct Topology {
  std::string name;
  std::vector<NodeSpec> nodes;
  std::vector<qkdsim::QkdLinkConfig> links;

  // Throws ValidationError naming the offending node or link.
  void validate() const;
  const NodeSpec* node(std::string_view id) const;
  const qkdsim::QkdLinkConfig* link_between(std::string_view a, std::string_view b) const;
};

// YAML document with `nodes` and `links` tables. Unknown fields are rejected.
// Throws ParseError (with line and field) or ValidationError.
Topology load_topology(std::string_view config_text);
Topology load_topology_file(const std::string& path);

// The metropolitan three-node deployment: LIP6 (A) - OG (C) - TP (B).
extern const char* const kParisTopology;
Topology paris_topology();

struct OnKeyAvailable {
  std::size_t l_target = 2560;
};
struct Periodic {
  std::size_t interval_ticks = 10;
};
using SessionTrigger = std::variant<OnKeyAvailable, Periodic>;

struct RunPlan {
  Variant variant = Variant::PqcSecured;
  std::vector<std::string> path;  // empty: the topology's nodes in declared order
  double duration_s = 3600.0;
  double tick_s = 1.0;
  SessionTrigger trigger = OnKeyAvailable{};
  // Final-key length requested per session. For OnKeyAvailable the trigger's
  // l_target is used.
  std::size_t l_request = 2560;
  cryptoseal::KemParamSet kem = cryptoseal::KemParamSet::kem512();
  std::uint64_t seed = 1;
  std::string crypto_suite = "mock";
  std::size_t aes_key_reuse = 1;
  // Upper bound on sessions started within one tick.
  std::size_t max_sessions_per_tick = 64;

  std::size_t requested_bits() const;
  // Throws ValidationError.
  void validate(const Topology& topology) const;
  std::vector<std::string> resolved_path(const Topology& topology) const;
};

// Live state of one run: the relay network, the crypto provider and the
// final-key stores filled by completed sessions.
class Simulation {
 public:
  Simulation(const Topology& topology, std::uint64_t seed, const std::string& crypto_suite = "mock",
             std::size_t aes_key_reuse = 1);

  relay::RelayNetwork& network() noexcept { return network_; }
  const Topology& topology() const noexcept { return topology_; }
  Rng& rng() noexcept { return rng_; }
  std::uint64_t ticks() const noexcept { return ticks_; }
  double now_s() const noexcept { return now_s_; }

  // Advances every link by dt; telemetry samples are appended in link order.
  void tick(double dt_s, std::vector<qkdsim::LinkTelemetrySample>* telemetry = nullptr);

  // True when every hop of `path` holds enough one-time pad for `l` bits.
  bool can_serve(Variant variant, const std::vector<std::string>& path, std::size_t l,
                 const cryptoseal::KemParamSet& kem) const;

  // Runs one relay session; a completed session's key is deposited into the
  // final-key store shared by the two ends of the path.
  relay::RelayResult run_session(Variant variant, const std::vector<std::string>& path, std::size_t l,
                                 const cryptoseal::KemParamSet& kem);

  qkdsim::KeyPool& final_pool(const std::string& a, const std::string& b);
  std::vector<qkdsim::KeyPool*> final_pools_of(std::string_view node);

 private:
  Topology topology_;
  relay::RelayNetwork network_;
  cryptoseal::CryptoSuite suite_;
  Rng rng_;
  relay::AesKeyCache aes_cache_;
  std::uint64_t ticks_ = 0;
  double now_s_ = 0.0;
  std::uint64_t session_counter_ = 0;
  std::vector<std::unique_ptr<qkdsim::KeyPool>> final_pools_;
};

struct SessionReport {
  std::string session_id;
  std::uint64_t tick = 0;
  double timestamp_s = 0.0;
  SessionStatus status = SessionStatus::Completed;
  relay::AbortReason abort_reason = relay::AbortReason::None;
  std::size_t l = 0;
  std::uint64_t duration_ticks = 0;  // ticks since the previous session on the path
  std::map<std::string, std::size_t> bits_consumed_per_link;
};

struct LinkSummary {
  std::string link_id;
  double mean_skr_bps = 0.0;
  double mean_qber = 0.0;
  double std_qber = 0.0;
  double mean_visibility = 0.0;
  double std_visibility = 0.0;
  std::uint64_t produced_bits = 0;
  std::uint64_t served_bits = 0;
};

struct RunResult {
  std::vector<qkdsim::LinkTelemetrySample> telemetry;
  std::vector<SessionReport> sessions;
  std::vector<LinkSummary> links;
  audit::EfficiencyReport efficiency;
  double duration_s = 0.0;
  std::uint64_t final_key_bits = 0;
  double end_to_end_rate_bps = 0.0;  // final_key_bits / duration
  std::size_t completed = 0;
  std::size_t aborted = 0;
  bool single_use_holds = true;
};

// Optional per-session callback, e.g. to stream transcripts to a file.
using TranscriptSink = std::function<void(const SessionTranscript&)>;

RunResult run_continuous(Simulation& sim, const RunPlan& plan, const TranscriptSink& sink = {});
RunResult run_continuous(const Topology& topology, const RunPlan& plan, const TranscriptSink& sink = {});

struct SingleShot {
  relay::RelayResult result;
  std::uint64_t ticks_waited = 0;
};

// Advances the links until the path can carry plan.requested_bits() (at most
// plan.duration_s), then runs one session. The session may abort.
SingleShot run_session(Simulation& sim, const RunPlan& plan);
SingleShot run_session(const Topology& topology, const RunPlan& plan);

// `timestamp_s,link_id,skr_bps,qber,visibility` with fixed precision.
std::string telemetry_csv(const std::vector<qkdsim::LinkTelemetrySample>& samples);

// Key-delivery front end over the final-key stores `node_id` belongs to.
// Throws ValidationError for an unknown node.
std::unique_ptr<delivery::KeyDeliveryService> key_service(Simulation& sim, const std::string& node_id);

// Blocks serving `node_id`'s final keys on HOST:PORT. `on_ready` receives the
// bound port. Throws AddressInUse.
void serve_keys(Simulation& sim, const std::string& node_id, const std::string& address,
                const std::function<void(std::uint16_t)>& on_ready = {});

nlohmann::json to_json(const RunResult& result);
nlohmann::json to_json(const SessionReport& report);

}  // namespace qkdrelay::netharness
