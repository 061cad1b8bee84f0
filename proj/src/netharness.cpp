#include "qkdrelay/netharness.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "qkdrelay/error.hpp"

namespace qkdrelay::netharness {

using nlohmann::json;

const char* const kParisTopology = R"(# Paris metropolitan QKD network, one relay hop through OG.
name: paris
nodes:
  - id: A
    display_name: LIP6
    honesty: honest
  - id: C
    display_name: OG
    honesty: honest-but-curious
  - id: B
    display_name: TP
    honesty: honest
links:
  - id: LIP6-OG
    endpoints: [A, C]
    fiber_length_km: 14
    loss_db: 3.8
    mean_rate_bps: 2493
    rate_std_bps: 28
    mean_qber: 0.0193
    qber_std: 0.0057
    mean_visibility: 0.998
    visibility_std: 0.012
    seed: 101
  - id: OG-TP
    endpoints: [C, B]
    fiber_length_km: 43
    loss_db: 10.4
    mean_rate_bps: 612
    rate_std_bps: 139
    mean_qber: 0.0172
    qber_std: 0.0068
    mean_visibility: 0.959
    visibility_std: 0.024
    seed: 202
)";

namespace {

[[noreturn]] void parse_fail(const YAML::Mark& mark, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(mark.line + 1) + ": " + what);
}

void reject_unknown(const YAML::Node& map, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!map.IsMap()) parse_fail(map.Mark(), std::string(where) + " must be a mapping");
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      parse_fail(kv.first.Mark(), "unknown field '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
T field(const YAML::Node& map, const char* key, std::string_view where, std::optional<T> fallback = std::nullopt) {
  const auto node = map[key];
  if (!node) {
    if (fallback) return *fallback;
    parse_fail(map.Mark(), "missing field '" + std::string(key) + "' in " + std::string(where));
  }
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    parse_fail(node.Mark(), "field '" + std::string(key) + "' in " + std::string(where) + " has the wrong type");
  }
}

NodeSpec parse_node(const YAML::Node& n, std::size_t index) {
  const auto where = "nodes[" + std::to_string(index) + "]";
  reject_unknown(n, {"id", "display_name", "honesty"}, where);
  NodeSpec spec;
  spec.id = field<std::string>(n, "id", where);
  spec.display_name = field<std::string>(n, "display_name", where, spec.id);
  const auto honesty = field<std::string>(n, "honesty", where, std::string("honest"));
  try {
    spec.honesty = parse_honesty(honesty);
  } catch (const Error&) {
    parse_fail(n["honesty"].Mark(), "field 'honesty' in " + where + " has unknown value '" + honesty + "'");
  }
  return spec;
}

qkdsim::QkdLinkConfig parse_link(const YAML::Node& n, std::size_t index) {
  const auto where = "links[" + std::to_string(index) + "]";
  reject_unknown(n,
                 {"id", "endpoints", "fiber_length_km", "loss_db", "mean_rate_bps", "rate_std_bps", "mean_qber",
                  "qber_std", "mean_visibility", "visibility_std", "seed", "capacity_blocks"},
                 where);
  qkdsim::QkdLinkConfig c;
  c.link_id = field<std::string>(n, "id", where);
  const auto ends = field<std::vector<std::string>>(n, "endpoints", where);
  if (ends.size() != 2) parse_fail(n["endpoints"].Mark(), "field 'endpoints' in " + where + " needs two node ids");
  c.endpoint_a = ends[0];
  c.endpoint_b = ends[1];
  c.fiber_length_km = field<double>(n, "fiber_length_km", where, 0.0);
  c.loss_db = field<double>(n, "loss_db", where, 0.0);
  c.mean_rate_bps = field<double>(n, "mean_rate_bps", where);
  c.rate_std_bps = field<double>(n, "rate_std_bps", where, 0.0);
  c.mean_qber = field<double>(n, "mean_qber", where, 0.0);
  c.qber_std = field<double>(n, "qber_std", where, 0.0);
  c.mean_visibility = field<double>(n, "mean_visibility", where, 1.0);
  c.visibility_std = field<double>(n, "visibility_std", where, 0.0);
  c.seed = field<std::uint64_t>(n, "seed", where, std::uint64_t{index + 1});
  c.capacity_blocks = field<std::size_t>(n, "capacity_blocks", where, qkdsim::kDefaultCapacityBlocks);
  return c;
}

std::vector<std::string> path_links(const Topology& topo, const std::vector<std::string>& path) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) ids.push_back(topo.link_between(path[i], path[i + 1])->link_id);
  return ids;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v, double mean) {
  if (v.empty()) return 0.0;
  double sum = 0.0;
  for (double x : v) sum += (x - mean) * (x - mean);
  return std::sqrt(sum / static_cast<double>(v.size()));
}

}  // namespace

// --- topology ----------------------------------------------------------------

void Topology::validate() const {
  if (nodes.empty()) throw Error(ErrorCode::ValidationError, "topology has no nodes");
  std::set<std::string, std::less<>> ids;
  for (const auto& n : nodes) {
    if (n.id.empty()) throw Error(ErrorCode::ValidationError, "node with an empty id");
    if (!ids.insert(n.id).second) throw Error(ErrorCode::ValidationError, "duplicate node '" + n.id + "'");
  }
  std::set<std::string> link_ids;
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& l : links) {
    for (const auto* end : {&l.endpoint_a, &l.endpoint_b}) {
      if (!ids.contains(*end)) {
        throw Error(ErrorCode::ValidationError, "link '" + l.link_id + "' references unknown node '" + *end + "'");
      }
    }
    if (l.endpoint_a == l.endpoint_b) {
      throw Error(ErrorCode::ValidationError, "link '" + l.link_id + "' is a self-loop on '" + l.endpoint_a + "'");
    }
    if (!link_ids.insert(l.link_id).second) throw Error(ErrorCode::ValidationError, "duplicate link '" + l.link_id + "'");
    auto key = std::minmax(l.endpoint_a, l.endpoint_b);
    if (!pairs.insert({key.first, key.second}).second) {
      throw Error(ErrorCode::ValidationError, "link '" + l.link_id + "' duplicates the pair " + key.first + "-" + key.second);
    }
    l.validate();
  }
}

const NodeSpec* Topology::node(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const qkdsim::QkdLinkConfig* Topology::link_between(std::string_view a, std::string_view b) const {
  for (const auto& l : links) {
    if ((l.endpoint_a == a && l.endpoint_b == b) || (l.endpoint_a == b && l.endpoint_b == a)) return &l;
  }
  return nullptr;
}

Topology load_topology(std::string_view config_text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(config_text));
  } catch (const YAML::ParserException& e) {
    parse_fail(e.mark, e.msg);
  }
  if (!root || root.IsNull()) throw Error(ErrorCode::ParseError, "line 1: empty topology document");
  reject_unknown(root, {"name", "nodes", "links"}, "topology");

  Topology topo;
  topo.name = field<std::string>(root, "name", "topology", std::string());
  const auto nodes = root["nodes"];
  if (!nodes) parse_fail(root.Mark(), "missing field 'nodes' in topology");
  if (!nodes.IsNull()) {
    if (!nodes.IsSequence()) parse_fail(nodes.Mark(), "field 'nodes' must be a list");
    for (std::size_t i = 0; i < nodes.size(); ++i) topo.nodes.push_back(parse_node(nodes[i], i));
  }
  const auto links = root["links"];
  if (links && !links.IsNull()) {
    if (!links.IsSequence()) parse_fail(links.Mark(), "field 'links' must be a list");
    for (std::size_t i = 0; i < links.size(); ++i) topo.links.push_back(parse_link(links[i], i));
  }
  topo.validate();
  return topo;
}

Topology load_topology_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open topology file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_topology(buf.str());
}

Topology paris_topology() { return load_topology(kParisTopology); }

// --- plan ----------------------------------------------------------------------

std::size_t RunPlan::requested_bits() const {
  if (const auto* t = std::get_if<OnKeyAvailable>(&trigger)) return t->l_target;
  return l_request;
}

std::vector<std::string> RunPlan::resolved_path(const Topology& topology) const {
  if (!path.empty()) return path;
  std::vector<std::string> out;
  for (const auto& n : topology.nodes) out.push_back(n.id);
  return out;
}

void RunPlan::validate(const Topology& topology) const {
  if (!(duration_s > 0.0)) throw Error(ErrorCode::ValidationError, "duration must be positive");
  if (!(tick_s > 0.0)) throw Error(ErrorCode::ValidationError, "tick must be positive");
  if (requested_bits() == 0) throw Error(ErrorCode::ValidationError, "requested key length must be positive");
  if (const auto* p = std::get_if<Periodic>(&trigger); p != nullptr && p->interval_ticks == 0) {
    throw Error(ErrorCode::ValidationError, "periodic interval must be positive");
  }
  cryptoseal::validate(kem);
  const auto p = resolved_path(topology);
  if (p.size() < 3) throw Error(ErrorCode::ValidationError, "path needs at least three nodes");
  std::set<std::string> seen;
  for (const auto& id : p) {
    if (topology.node(id) == nullptr) throw Error(ErrorCode::ValidationError, "path references unknown node '" + id + "'");
    if (!seen.insert(id).second) throw Error(ErrorCode::ValidationError, "path visits '" + id + "' twice");
  }
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    if (topology.link_between(p[i], p[i + 1]) == nullptr) {
      throw Error(ErrorCode::ValidationError, "no QKD link between '" + p[i] + "' and '" + p[i + 1] + "'");
    }
  }
}

// --- simulation --------------------------------------------------------------

Simulation::Simulation(const Topology& topology, std::uint64_t seed, const std::string& crypto_suite,
                       std::size_t aes_key_reuse)
    : topology_(topology), suite_(cryptoseal::make_suite(crypto_suite)) {
  topology_.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x51u};
  rng_.seed(seq);
  aes_cache_.reuse_limit = std::max<std::size_t>(1, aes_key_reuse);
  for (const auto& n : topology_.nodes) network_.add_node(n.id, n.honesty);
  for (const auto& l : topology_.links) network_.add_link(l, seed);
}

void Simulation::tick(double dt_s, std::vector<qkdsim::LinkTelemetrySample>* telemetry) {
  for (auto& link : network_.links()) {
    auto r = link->advance(dt_s);
    if (telemetry != nullptr) telemetry->push_back(std::move(r.telemetry));
  }
  ++ticks_;
  now_s_ += dt_s;
}

bool Simulation::can_serve(Variant variant, const std::vector<std::string>& path, std::size_t l,
                           const cryptoseal::KemParamSet& kem) const {
  const auto need = relay::otp_bits_required(variant, l, kem);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto* link = network_.find_link(path[i], path[i + 1]);
    if (link == nullptr || link->pool().available_bits() < need) return false;
  }
  return true;
}

relay::RelayResult Simulation::run_session(Variant variant, const std::vector<std::string>& path, std::size_t l,
                                           const cryptoseal::KemParamSet& kem) {
  char id[32];
  std::snprintf(id, sizeof id, "S%06llu", static_cast<unsigned long long>(++session_counter_));
  relay::SessionRequest req{id, variant, path, l, kem};
  relay::RelayContext ctx{suite_, rng_, &aes_cache_};
  auto result = relay::run_multi_hop(network_, std::move(req), ctx);
  if (result.session.completed()) {
    final_pool(path.front(), path.back()).deposit_material(result.session.alice_key, rng_);
  }
  return result;
}

qkdsim::KeyPool& Simulation::final_pool(const std::string& a, const std::string& b) {
  for (auto& p : final_pools_) {
    if ((p->endpoint_a() == a && p->endpoint_b() == b) || (p->endpoint_a() == b && p->endpoint_b() == a)) return *p;
  }
  final_pools_.push_back(std::make_unique<qkdsim::KeyPool>(a, b));
  return *final_pools_.back();
}

std::vector<qkdsim::KeyPool*> Simulation::final_pools_of(std::string_view node) {
  std::vector<qkdsim::KeyPool*> out;
  for (auto& p : final_pools_) {
    if (p->has_endpoint(node)) out.push_back(p.get());
  }
  return out;
}

// --- runs ----------------------------------------------------------------------

RunResult run_continuous(Simulation& sim, const RunPlan& plan, const TranscriptSink& sink) {
  plan.validate(sim.topology());
  const auto path = plan.resolved_path(sim.topology());
  const auto l = plan.requested_bits();
  const auto n_ticks = static_cast<std::uint64_t>(std::llround(plan.duration_s / plan.tick_s));

  RunResult out;
  out.duration_s = static_cast<double>(n_ticks) * plan.tick_s;
  out.telemetry.reserve(n_ticks * sim.network().links().size());
  std::vector<relay::RelaySession> completed;
  std::uint64_t last_session_tick = sim.ticks();

  auto start_session = [&]() -> bool {
    auto r = sim.run_session(plan.variant, path, l, plan.kem);
    if (sink) sink(r.transcript);
    SessionReport rep;
    rep.session_id = r.session.session_id;
    rep.tick = sim.ticks();
    rep.timestamp_s = sim.now_s();
    rep.status = r.session.status;
    rep.abort_reason = r.session.abort_reason;
    rep.l = r.session.completed() ? r.session.l : 0;
    rep.duration_ticks = sim.ticks() - last_session_tick;
    rep.bits_consumed_per_link = r.session.bits_consumed_per_link();
    last_session_tick = sim.ticks();
    out.sessions.push_back(std::move(rep));
    const bool ok = r.session.completed();
    if (ok) {
      ++out.completed;
      out.final_key_bits += r.session.l;
      completed.push_back(std::move(r.session));
    } else {
      ++out.aborted;
    }
    return ok;
  };

  for (std::uint64_t t = 0; t < n_ticks; ++t) {
    sim.tick(plan.tick_s, &out.telemetry);
    if (const auto* p = std::get_if<Periodic>(&plan.trigger)) {
      if ((t + 1) % p->interval_ticks == 0) start_session();
    } else {
      for (std::size_t k = 0; k < plan.max_sessions_per_tick && sim.can_serve(plan.variant, path, l, plan.kem); ++k) {
        if (!start_session()) break;
      }
    }
  }

  std::map<std::string, std::vector<double>> skr, qber, vis;
  for (const auto& s : out.telemetry) {
    skr[s.link_id].push_back(s.secret_key_rate_bps);
    qber[s.link_id].push_back(s.qber);
    vis[s.link_id].push_back(s.visibility);
  }
  for (const auto& link : sim.network().links()) {
    const auto& id = link->config().link_id;
    LinkSummary ls;
    ls.link_id = id;
    ls.mean_skr_bps = mean_of(skr[id]);
    ls.mean_qber = mean_of(qber[id]);
    ls.std_qber = std_of(qber[id], ls.mean_qber);
    ls.mean_visibility = mean_of(vis[id]);
    ls.std_visibility = std_of(vis[id], ls.mean_visibility);
    const auto acct = link->pool().accounting(link->config().endpoint_a);
    ls.produced_bits = acct.produced_bits;
    ls.served_bits = acct.served_bits;
    out.links.push_back(ls);
    out.single_use_holds = out.single_use_holds && link->pool().single_use_holds();
  }
  for (auto* pool : sim.final_pools_of(path.front())) out.single_use_holds = out.single_use_holds && pool->single_use_holds();

  std::vector<double> hop_rates;
  for (const auto& id : path_links(sim.topology(), path)) {
    for (const auto& ls : out.links) {
      if (ls.link_id == id) hop_rates.push_back(ls.mean_skr_bps);
    }
  }
  out.efficiency = audit::measured_eta(completed, hop_rates);
  if (out.efficiency.sessions == 0) {
    out.efficiency.variant = plan.variant;
    out.efficiency.kem_params = plan.kem.name;
  }
  out.end_to_end_rate_bps = out.duration_s > 0.0 ? static_cast<double>(out.final_key_bits) / out.duration_s : 0.0;
  return out;
}

RunResult run_continuous(const Topology& topology, const RunPlan& plan, const TranscriptSink& sink) {
  plan.validate(topology);
  Simulation sim(topology, plan.seed, plan.crypto_suite, plan.aes_key_reuse);
  return run_continuous(sim, plan, sink);
}

SingleShot run_session(Simulation& sim, const RunPlan& plan) {
  plan.validate(sim.topology());
  const auto path = plan.resolved_path(sim.topology());
  const auto l = plan.requested_bits();
  const auto max_ticks = static_cast<std::uint64_t>(std::llround(plan.duration_s / plan.tick_s));
  SingleShot out;
  while (out.ticks_waited < max_ticks && !sim.can_serve(plan.variant, path, l, plan.kem)) {
    sim.tick(plan.tick_s);
    ++out.ticks_waited;
  }
  out.result = sim.run_session(plan.variant, path, l, plan.kem);
  return out;
}

SingleShot run_session(const Topology& topology, const RunPlan& plan) {
  plan.validate(topology);
  Simulation sim(topology, plan.seed, plan.crypto_suite, plan.aes_key_reuse);
  return run_session(sim, plan);
}

std::string telemetry_csv(const std::vector<qkdsim::LinkTelemetrySample>& samples) {
  std::string out = "timestamp_s,link_id,skr_bps,qber,visibility\n";
  char line[256];
  for (const auto& s : samples) {
    std::snprintf(line, sizeof line, "%.3f,%s,%.3f,%.6f,%.6f\n", s.timestamp_s, s.link_id.c_str(),
                  s.secret_key_rate_bps, s.qber, s.visibility);
    out += line;
  }
  return out;
}

// --- key delivery --------------------------------------------------------------

std::unique_ptr<delivery::KeyDeliveryService> key_service(Simulation& sim, const std::string& node_id) {
  if (sim.topology().node(node_id) == nullptr) {
    throw Error(ErrorCode::ValidationError, "unknown node '" + node_id + "'");
  }
  auto service = std::make_unique<delivery::KeyDeliveryService>(node_id);
  for (auto* pool : sim.final_pools_of(node_id)) service->add_pool(*pool);
  return service;
}

void serve_keys(Simulation& sim, const std::string& node_id, const std::string& address,
                const std::function<void(std::uint16_t)>& on_ready) {
  auto service = key_service(sim, node_id);
  const auto [host, port] = delivery::parse_address(address);
  delivery::KeyDeliveryServer server(*service, host, port);
  if (on_ready) on_ready(server.port());
  server.run();
}

// --- json ----------------------------------------------------------------------

json to_json(const SessionReport& r) {
  json j{{"session_id", r.session_id},
         {"tick", r.tick},
         {"timestamp_s", r.timestamp_s},
         {"status", std::string(to_string(r.status))},
         {"l", r.l},
         {"duration_ticks", r.duration_ticks},
         {"bits_consumed_per_link", r.bits_consumed_per_link}};
  if (r.abort_reason != relay::AbortReason::None) j["abort_reason"] = std::string(relay::to_string(r.abort_reason));
  return j;
}

json to_json(const RunResult& r) {
  json links = json::array();
  for (const auto& l : r.links) {
    links.push_back({{"link_id", l.link_id},
                     {"mean_skr_bps", l.mean_skr_bps},
                     {"mean_qber", l.mean_qber},
                     {"std_qber", l.std_qber},
                     {"mean_visibility", l.mean_visibility},
                     {"std_visibility", l.std_visibility},
                     {"produced_bits", l.produced_bits},
                     {"served_bits", l.served_bits}});
  }
  json sessions = json::array();
  for (const auto& s : r.sessions) sessions.push_back(to_json(s));
  return {{"duration_s", r.duration_s},
          {"final_key_bits", r.final_key_bits},
          {"end_to_end_rate_bps", r.end_to_end_rate_bps},
          {"completed", r.completed},
          {"aborted", r.aborted},
          {"single_use_holds", r.single_use_holds},
          {"links", links},
          {"efficiency", audit::to_json(r.efficiency)},
          {"sessions", sessions}};
}

}  // namespace qkdrelay::netharness
