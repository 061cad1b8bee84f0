// qkdrelay command-line front end.
//
// Exit status: 0 success, 1 runtime failure, 2 configuration error,
// 3 single-shot session aborted.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qkdrelay/audit.hpp"
#include "qkdrelay/error.hpp"
#include "qkdrelay/netharness.hpp"

using namespace qkdrelay;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAbort = 3;

bool is_config_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::ParseError:
    case ErrorCode::ValidationError:
    case ErrorCode::UnsupportedParams:
    case ErrorCode::InvalidArgument:
      return true;
    default:
      return false;
  }
}

std::vector<std::string> split_path(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

netharness::Topology topology_from(const std::string& file) {
  return file.empty() ? netharness::paris_topology() : netharness::load_topology_file(file);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
  return out;
}

struct Common {
  std::string topology;
  std::string variant = "pqc-secured";
  std::string kem = "KEM-512";
  std::string path;
  std::uint64_t seed = 1;
  std::string suite = "mock";

  void add(CLI::App* app) {
    app->add_option("--topology", topology, "Topology file (default: bundled Paris network)");
    app->add_option("--variant", variant, "standard | pqc-secured | direct-kem")->capture_default_str();
    app->add_option("--kem-params", kem, "KEM-512 | KEM-768 | KEM-1024")->capture_default_str();
    app->add_option("--path", path, "Comma-separated node chain (default: declared node order)");
    app->add_option("--seed", seed, "Run seed")->capture_default_str();
    app->add_option("--suite", suite, "Crypto provider: mock | openssl")->capture_default_str();
  }

  netharness::RunPlan plan() const {
    netharness::RunPlan p;
    p.variant = parse_variant(variant);
    p.kem = cryptoseal::param_set_by_name(kem);
    p.path = split_path(path);
    p.seed = seed;
    p.crypto_suite = suite;
    return p;
  }
};

int cmd_eta_table(const std::vector<std::string>& names, bool as_json) {
  std::vector<cryptoseal::KemParamSet> params;
  if (names.empty()) {
    params = cryptoseal::builtin_param_sets();
  } else {
    for (const auto& n : names) params.push_back(cryptoseal::param_set_by_name(n));
  }
  const auto rows = audit::eta_table(params);
  if (as_json) {
    json arr = json::array();
    for (const auto& r : rows) {
      arr.push_back({{"protocol", r.protocol},
                     {"params", r.params.name},
                     {"ciphertext_bits", r.params.ciphertext_bits},
                     {"eta", r.eta},
                     {"eta_percent", audit::format_percent(r.eta)}});
    }
    std::cout << arr.dump(2) << "\n";
    return 0;
  }
  std::printf("%-12s %-9s %8s %8s\n", "protocol", "params", "l_ct", "eta");
  for (const auto& r : rows) {
    std::printf("%-12s %-9s %8zu %8s\n", r.protocol.c_str(), r.params.name.c_str(), r.params.ciphertext_bits,
                audit::format_percent(r.eta).c_str());
  }
  return 0;
}

struct SimulateArgs {
  Common common;
  double duration = 3600.0;
  double tick = 1.0;
  std::size_t l_target = 2560;
  std::size_t periodic = 0;
  std::size_t aes_reuse = 1;
  std::string telemetry_file;
  std::string transcript_file;
  std::string report_file;
};

int cmd_simulate(const SimulateArgs& a) {
  const auto topo = topology_from(a.common.topology);
  auto plan = a.common.plan();
  plan.duration_s = a.duration;
  plan.tick_s = a.tick;
  plan.aes_key_reuse = a.aes_reuse;
  plan.l_request = a.l_target;
  if (a.periodic > 0) {
    plan.trigger = netharness::Periodic{a.periodic};
  } else {
    plan.trigger = netharness::OnKeyAvailable{a.l_target};
  }
  plan.validate(topo);

  std::ofstream transcripts;
  netharness::TranscriptSink sink;
  if (!a.transcript_file.empty()) {
    transcripts = open_out(a.transcript_file);
    sink = [&transcripts](const SessionTranscript& t) { audit::write_transcript(transcripts, t); };
  }
  const auto result = netharness::run_continuous(topo, plan, sink);

  if (!a.telemetry_file.empty()) open_out(a.telemetry_file) << netharness::telemetry_csv(result.telemetry);
  auto report = netharness::to_json(result);
  if (!a.report_file.empty()) open_out(a.report_file) << report.dump(2) << "\n";
  report.erase("sessions");
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_session(const Common& common, std::size_t l, double max_wait, const std::string& transcript_file) {
  const auto topo = topology_from(common.topology);
  auto plan = common.plan();
  plan.trigger = netharness::OnKeyAvailable{l};
  plan.duration_s = max_wait;
  const auto shot = netharness::run_session(topo, plan);
  if (!transcript_file.empty()) {
    auto out = open_out(transcript_file);
    audit::write_transcript(out, shot.result.transcript);
  }
  auto j = audit::session_json(shot.result.session);
  j["ticks_waited"] = shot.ticks_waited;
  j["keys_match"] = shot.result.session.keys_match();
  std::cout << j.dump(2) << "\n";
  return shot.result.session.completed() ? 0 : kExitAbort;
}

int cmd_serve(const Common& common, const std::string& node, const std::string& addr, double warmup,
              std::size_t l_target) {
  const auto topo = topology_from(common.topology);
  auto plan = common.plan();
  plan.duration_s = warmup;
  plan.trigger = netharness::OnKeyAvailable{l_target};
  plan.validate(topo);
  if (topo.node(node) == nullptr) throw Error(ErrorCode::ValidationError, "unknown node '" + node + "'");
  delivery::parse_address(addr);

  netharness::Simulation sim(topo, plan.seed, plan.crypto_suite, plan.aes_key_reuse);
  const auto warm = netharness::run_continuous(sim, plan);
  netharness::serve_keys(sim, node, addr, [&](std::uint16_t port) {
    std::fprintf(stderr, "serving final keys of %s on port %u (%zu sessions, %llu bits)\n", node.c_str(),
                 static_cast<unsigned>(port), warm.completed, static_cast<unsigned long long>(warm.final_key_bits));
  });
  return 0;
}

int cmd_audit(const std::string& file, const std::string& as, const std::string& node,
              const std::string& compromised) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read '" + file + "'");
  const auto transcripts = audit::read_transcripts(in);
  for (const auto& t : transcripts) {
    audit::AdversaryView view;
    if (as == "charlie") {
      view = audit::charlie_view(t, node.empty() ? std::nullopt : std::optional<std::string>(node));
    } else {
      view = audit::eve_view(t, compromised.empty() ? std::nullopt : std::optional<std::string>(compromised));
    }
    json j{{"session_id", t.session_id},
           {"variant", std::string(to_string(t.variant))},
           {"status", std::string(to_string(t.status))},
           {"observer", view.observer},
           {"messages_seen", view.messages.size()},
           {"private_keys", json::array()}};
    for (const auto& [name, _] : view.private_keys) j["private_keys"].push_back(name);

    const auto* alice = t.path.empty() ? nullptr : t.snapshot(t.path.front());
    const KeyRegister* k_ab = nullptr;
    if (alice != nullptr) {
      if (auto it = alice->keys.find("k_AB"); it != alice->keys.end()) k_ab = &it->second;
    }
    if (k_ab != nullptr) j["exposes_key"] = audit::exposes_key(view, *k_ab);
    try {
      const auto r = audit::reconstruct_as_charlie(view);
      j["reconstruction"] = audit::to_json(r);
      if (k_ab != nullptr) j["reconstruction_equals_key"] = (r.derived == *k_ab);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::IncompleteView) throw;
      j["reconstruction"] = nullptr;
    }
    std::cout << j.dump() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trusted-node QKD key relay with post-quantum protection"};
  app.require_subcommand(1);

  auto* eta = app.add_subcommand("eta-table", "Key-relay efficiency per protocol and KEM parameter set");
  std::vector<std::string> eta_params;
  bool eta_json = false;
  eta->add_option("--params", eta_params, "Parameter sets (default: all built-in)");
  eta->add_flag("--json", eta_json, "Emit JSON");

  auto* sim = app.add_subcommand("simulate", "Continuous operation over a topology");
  SimulateArgs sa;
  sa.common.add(sim);
  sim->add_option("--duration", sa.duration, "Simulated seconds")->capture_default_str();
  sim->add_option("--tick", sa.tick, "Tick length in seconds")->capture_default_str();
  sim->add_option("--l-target", sa.l_target, "Final-key bits per session")->capture_default_str();
  sim->add_option("--periodic", sa.periodic, "Start a session every N ticks instead of when key is available");
  sim->add_option("--aes-reuse", sa.aes_reuse, "Sessions sharing one k_AES")->capture_default_str();
  sim->add_option("--telemetry", sa.telemetry_file, "Write telemetry CSV");
  sim->add_option("--transcripts", sa.transcript_file, "Write session transcripts (JSON lines)");
  sim->add_option("--report", sa.report_file, "Write the full JSON report");

  auto* ses = app.add_subcommand("session", "Run one relay session");
  Common sc;
  std::size_t ses_l = 256;
  double ses_wait = 3600.0;
  std::string ses_transcript;
  sc.add(ses);
  ses->add_option("-l,--length", ses_l, "Requested final-key bits")->capture_default_str();
  ses->add_option("--max-wait", ses_wait, "Seconds of key generation to wait for before running")->capture_default_str();
  ses->add_option("--transcript", ses_transcript, "Write the transcript (JSON lines)");

  auto* srv = app.add_subcommand("serve", "Serve final keys over the line-JSON key-delivery protocol");
  Common vc;
  std::string srv_node, srv_addr;
  double srv_warmup = 600.0;
  std::size_t srv_l = 2560;
  vc.add(srv);
  srv->add_option("--node", srv_node, "Node whose keys are served")->required();
  srv->add_option("--addr", srv_addr, "HOST:PORT")->required();
  srv->add_option("--warmup", srv_warmup, "Simulated seconds of relay sessions before serving")->capture_default_str();
  srv->add_option("--l-target", srv_l, "Final-key bits per session")->capture_default_str();

  auto* aud = app.add_subcommand("audit", "Adversary views of recorded transcripts");
  std::string aud_file, aud_as = "charlie", aud_node, aud_comp;
  aud->add_option("--transcript", aud_file, "Transcript file")->required();
  aud->add_option("--as", aud_as, "charlie | eve")->check(CLI::IsMember({"charlie", "eve"}))->capture_default_str();
  aud->add_option("--node", aud_node, "Trusted node to impersonate (charlie)");
  aud->add_option("--compromised", aud_comp, "Node whose keys leak to eve");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*eta) return cmd_eta_table(eta_params, eta_json);
    if (*sim) return cmd_simulate(sa);
    if (*ses) return cmd_session(sc, ses_l, ses_wait, ses_transcript);
    if (*srv) return cmd_serve(vc, srv_node, srv_addr, srv_warmup, srv_l);
    if (*aud) return cmd_audit(aud_file, aud_as, aud_node, aud_comp);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(e.code())).c_str(), e.what());
    return is_config_error(e.code()) ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
