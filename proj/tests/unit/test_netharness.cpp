#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "qkdrelay/error.hpp"
#include "qkdrelay/netharness.hpp"

using namespace qkdrelay;
using namespace qkdrelay::netharness;

namespace {

Error error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an Error");
  return Error(ErrorCode::InvalidArgument, "");
}

const char* const kSmall = R"(name: small
nodes:
  - {id: A}
  - {id: C, honesty: honest-but-curious}
  - {id: B}
links:
  - {id: AC, endpoints: [A, C], mean_rate_bps: 1000, seed: 1}
  - {id: CB, endpoints: [C, B], mean_rate_bps: 500, seed: 2}
)";

}  // namespace

TEST_CASE("bundled topology") {
  const auto topo = paris_topology();
  REQUIRE(topo.nodes.size() == 3);
  REQUIRE(topo.links.size() == 2);
  CHECK(topo.node("A")->display_name == "LIP6");
  CHECK(topo.node("C")->honesty == HonestyLevel::HonestButCurious);
  const auto* ac = topo.link_between("C", "A");
  const auto* cb = topo.link_between("B", "C");
  REQUIRE(ac != nullptr);
  REQUIRE(cb != nullptr);
  CHECK(ac->mean_rate_bps == 2493);
  CHECK(ac->rate_std_bps == 28);
  CHECK(ac->fiber_length_km == 14);
  CHECK(ac->loss_db == doctest::Approx(3.8));
  CHECK(cb->mean_rate_bps == 612);
  CHECK(cb->rate_std_bps == 139);
  CHECK(cb->fiber_length_km == 43);
  CHECK(cb->loss_db == doctest::Approx(10.4));
}

TEST_CASE("shipped config file matches the bundled copy") {
  const auto from_file = load_topology_file(QKDRELAY_CONFIG_DIR "/paris.toposim");
  const auto bundled = paris_topology();
  REQUIRE(from_file.links.size() == bundled.links.size());
  for (std::size_t i = 0; i < bundled.links.size(); ++i) {
    CHECK(from_file.links[i].mean_rate_bps == bundled.links[i].mean_rate_bps);
    CHECK(from_file.links[i].seed == bundled.links[i].seed);
  }
  CHECK(load_topology_file(QKDRELAY_CONFIG_DIR "/chain5.toposim").nodes.size() == 5);
}

TEST_CASE("topology errors") {
  CHECK(error_of([] { (void)load_topology("nodes: []\n"); }).code() == ErrorCode::ValidationError);

  const auto dangling = error_of([] {
    (void)load_topology("nodes:\n  - {id: A}\n  - {id: B}\nlinks:\n  - {id: L, endpoints: [A, Z], mean_rate_bps: 1}\n");
  });
  CHECK(dangling.code() == ErrorCode::ValidationError);
  CHECK(std::string(dangling.what()).find("'Z'") != std::string::npos);

  const auto unknown = error_of([] { (void)load_topology("nodes:\n  - {id: A, colour: red}\n"); });
  CHECK(unknown.code() == ErrorCode::ParseError);
  CHECK(std::string(unknown.what()).find("line 2") != std::string::npos);
  CHECK(std::string(unknown.what()).find("colour") != std::string::npos);

  const auto syntax = error_of([] { (void)load_topology("nodes: [\n  {id: A\n"); });
  CHECK(syntax.code() == ErrorCode::ParseError);

  const auto type = error_of([] {
    (void)load_topology("nodes:\n  - {id: A}\n  - {id: B}\nlinks:\n  - {id: L, endpoints: [A, B], mean_rate_bps: fast}\n");
  });
  CHECK(type.code() == ErrorCode::ParseError);
  CHECK(std::string(type.what()).find("mean_rate_bps") != std::string::npos);

  CHECK(error_of([] {
          (void)load_topology("nodes:\n  - {id: A}\nlinks:\n  - {id: L, endpoints: [A, A], mean_rate_bps: 1}\n");
        }).code() == ErrorCode::ValidationError);
  CHECK(error_of([] { (void)load_topology_file("/nonexistent/x.toposim"); }).code() == ErrorCode::ParseError);
}

TEST_CASE("plan validation") {
  const auto topo = load_topology(kSmall);
  RunPlan plan;
  CHECK_NOTHROW(plan.validate(topo));
  CHECK(plan.resolved_path(topo) == std::vector<std::string>{"A", "C", "B"});
  plan.duration_s = 0;
  CHECK(error_of([&] { plan.validate(topo); }).code() == ErrorCode::ValidationError);
  plan = RunPlan{};
  plan.path = {"A", "B", "C"};
  CHECK(error_of([&] { plan.validate(topo); }).code() == ErrorCode::ValidationError);
  plan.path = {"A", "C", "Q"};
  CHECK(error_of([&] { plan.validate(topo); }).code() == ErrorCode::ValidationError);
}

TEST_CASE("continuous run on a small network") {
  const auto topo = load_topology(kSmall);
  RunPlan plan;
  plan.variant = Variant::Standard;
  plan.duration_s = 600;
  plan.trigger = OnKeyAvailable{1024};
  const auto r = run_continuous(topo, plan);
  CHECK(r.telemetry.size() == 1200);
  CHECK(r.completed > 0);
  CHECK(r.aborted == 0);
  CHECK(r.single_use_holds);
  CHECK(r.efficiency.eta == 1.0);
  // The slower link bounds the rate, up to what is still buffered.
  CHECK(r.end_to_end_rate_bps <= 500.0);
  CHECK(r.end_to_end_rate_bps >= 500.0 - 1024.0 / 600.0 - 1.0);
  std::uint64_t ticks = 0;
  for (const auto& s : r.sessions) ticks += s.duration_ticks;
  CHECK(ticks <= 600);
  for (const auto& l : r.links) CHECK(l.produced_bits >= l.served_bits);
}

TEST_CASE("zero-rate links never trigger") {
  auto topo = load_topology(kSmall);
  for (auto& l : topo.links) l.mean_rate_bps = 0;
  RunPlan plan;
  plan.duration_s = 300;
  const auto r = run_continuous(topo, plan);
  CHECK(r.completed == 0);
  CHECK(r.sessions.empty());
  CHECK(r.end_to_end_rate_bps == 0.0);

  plan.trigger = Periodic{30};
  const auto p = run_continuous(topo, plan);
  CHECK(p.completed == 0);
  CHECK(p.aborted == 10);
  for (const auto& s : p.sessions) CHECK(s.abort_reason == relay::AbortReason::ZeroKeyAC);
}

TEST_CASE("determinism") {
  const auto topo = paris_topology();
  RunPlan plan;
  plan.duration_s = 200;
  plan.seed = 42;
  auto run = [&] {
    std::stringstream transcripts;
    const auto r = run_continuous(topo, plan, [&](const SessionTranscript& t) { audit::write_transcript(transcripts, t); });
    return std::make_pair(transcripts.str(), telemetry_csv(r.telemetry));
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.second.rfind("timestamp_s,link_id,skr_bps,qber,visibility\n", 0) == 0);
  plan.seed = 43;
  CHECK(run().second != a.second);
}

TEST_CASE("single-shot session") {
  const auto topo = paris_topology();
  RunPlan plan;
  plan.variant = Variant::DirectKem;
  plan.trigger = OnKeyAvailable{256};
  const auto shot = run_session(topo, plan);
  REQUIRE(shot.result.session.keys_match());
  CHECK(shot.ticks_waited >= 6144 / 612);
  for (const auto& [link, bits] : shot.result.session.bits_consumed_per_link()) CHECK(bits == 6144);

  auto dead = topo;
  dead.links[1].mean_rate_bps = 0;
  dead.links[1].rate_std_bps = 0;
  plan.duration_s = 20;
  const auto aborted = run_session(dead, plan);
  CHECK(aborted.ticks_waited == 20);
  CHECK(aborted.result.session.abort_reason == relay::AbortReason::ZeroKeyBC);
}

TEST_CASE("disjoint paths share no pad material") {
  const auto topo = load_topology_file(QKDRELAY_CONFIG_DIR "/chain5.toposim");
  Simulation sim(topo, 3);
  for (int t = 0; t < 60; ++t) sim.tick(1.0);
  const auto left = sim.run_session(Variant::Standard, {"N0", "N1", "N2"}, 4096, cryptoseal::KemParamSet::kem512());
  const auto right = sim.run_session(Variant::Standard, {"N2", "N3", "N4"}, 4096, cryptoseal::KemParamSet::kem512());
  REQUIRE(left.session.keys_match());
  REQUIRE(right.session.keys_match());
  std::set<std::string> ids;
  for (const auto* s : {&left.session, &right.session}) {
    for (const auto& hop : s->hops) {
      for (const auto& id : hop.key_ids) CHECK(ids.insert(id).second);
    }
  }
}

TEST_CASE("final keys land in the end-to-end store") {
  Simulation sim(paris_topology(), 5);
  for (int t = 0; t < 20; ++t) sim.tick(1.0);
  const auto r = sim.run_session(Variant::PqcSecured, {"A", "C", "B"}, 2560, cryptoseal::KemParamSet::kem512());
  REQUIRE(r.session.completed());
  auto& pool = sim.final_pool("B", "A");
  CHECK(pool.available_bits() == 2560);
  const auto keys = pool.get_enc_keys("A", 10, 256);
  KeyRegister joined;
  for (const auto& k : keys) joined = keycore::concat(joined, k.key);
  CHECK(joined == r.session.alice_key);
  CHECK(sim.final_pools_of("C").empty());
}
