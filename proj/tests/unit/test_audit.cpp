#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "qkdrelay/audit.hpp"
#include "qkdrelay/error.hpp"

using namespace qkdrelay;
using namespace qkdrelay::audit;
using fixtures::Chain;

namespace {

const cryptoseal::CryptoSuite& mock() {
  static const auto suite = cryptoseal::make_suite("mock");
  return suite;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("charlie view contents") {
  Chain c({4096, 4096}, 1);
  const auto r = c.run(Variant::PqcSecured, 1024, mock());
  const auto view = charlie_view(r.transcript);
  CHECK(view.observer == "charlie");
  for (const auto& m : view.messages) CHECK((m.from == "C" || m.to == "C"));
  CHECK(view.private_keys.contains("otp_in"));
  CHECK(view.private_keys.contains("otp_out"));
  CHECK_FALSE(view.private_keys.contains("k_AB"));
  CHECK_FALSE(view.private_keys.contains("k_AES"));
  CHECK(charlie_view(SessionTranscript{}).empty());
}

TEST_CASE("relay-node reconstruction per variant") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    SUBCASE("standard") {
      Chain c({4096, 4096}, seed);
      const auto r = c.run(Variant::Standard, 2048, mock());
      const auto rec = reconstruct_as_charlie(charlie_view(r.transcript));
      CHECK(rec.is_final_key);
      CHECK(rec.derived == r.session.alice_key);
    }
    SUBCASE("pqc-secured") {
      Chain c({4096, 4096}, seed);
      const auto r = c.run(Variant::PqcSecured, 2048, mock());
      const auto rec = reconstruct_as_charlie(charlie_view(r.transcript));
      CHECK_FALSE(rec.is_final_key);
      CHECK(rec.derived != r.session.alice_key);
      CHECK(mock().cipher->decrypt(*r.session.k_aes, *r.session.nonce, rec.derived) == r.session.alice_key);
    }
    SUBCASE("direct-kem") {
      Chain c({13000, 13000}, seed);
      const auto r = c.run(Variant::DirectKem, 512, mock());
      const auto rec = reconstruct_as_charlie(charlie_view(r.transcript));
      CHECK_FALSE(rec.is_final_key);
      CHECK(rec.derived.size() == 2 * 6144);
      CHECK(keycore::truncate(rec.derived, 512) != r.session.alice_key);
    }
  }
}

TEST_CASE("incomplete views") {
  Chain c({0, 4096}, 2);
  const auto r = c.run(Variant::Standard, 256, mock());
  CHECK(code_of([&] { (void)reconstruct_as_charlie(charlie_view(r.transcript)); }) == ErrorCode::IncompleteView);
  Chain d({4096, 4096}, 3);
  const auto ok = d.run(Variant::Standard, 256, mock());
  CHECK(code_of([&] { (void)reconstruct_as_charlie(eve_view(ok.transcript)); }) == ErrorCode::IncompleteView);
}

TEST_CASE("eve and key exposure") {
  Chain c({4096, 4096}, 4);
  const auto r = c.run(Variant::Standard, 1024, mock());
  const auto eve = eve_view(r.transcript);
  CHECK(eve.private_keys.empty());
  CHECK(eve.messages.size() == r.transcript.messages.size());
  CHECK_FALSE(exposes_key(eve, r.session.alice_key));
  CHECK(exposes_key(charlie_view(r.transcript), r.session.alice_key));
  CHECK(exposes_key(eve_view(r.transcript, std::string("C")), r.session.alice_key));

  Chain z({1024, 1024}, 5, true);
  const auto leaked = z.run(Variant::Standard, 1024, mock());
  CHECK(exposes_key(eve_view(leaked.transcript), leaked.session.alice_key));

  Chain p({4096, 4096}, 6);
  const auto pq = p.run(Variant::PqcSecured, 1024, mock());
  CHECK_FALSE(exposes_key(charlie_view(pq.transcript), pq.session.alice_key));
  CHECK_FALSE(exposes_key(eve_view(pq.transcript, std::string("C")), pq.session.alice_key));
}

TEST_CASE("efficiency formulas") {
  CHECK(format_percent(eta_direct_kem(cryptoseal::KemParamSet::kem512())) == "4.17%");
  CHECK(format_percent(eta_direct_kem(cryptoseal::KemParamSet::kem768())) == "2.94%");
  CHECK(format_percent(eta_direct_kem(cryptoseal::KemParamSet::kem1024())) == "2.04%");
  CHECK(eta_direct_kem(cryptoseal::KemParamSet::kem512()) == 256.0 / 6144.0);
  CHECK(eta_kem_then_aes(2560) == 1.0);
  CHECK(eta_kem_then_aes(0) == 1.0);
  CHECK(eta_kem_then_aes(300) == 300.0 / 384.0);
  CHECK(format_percent(1.0) == "100%");
  CHECK(format_percent(0.5) == "50%");
  CHECK(format_percent(0.0412) == "4.12%");
  CHECK(format_percent(0.041) == "4.1%");

  CHECK(final_rate(2493, 612, 1.0) == 612.0);
  CHECK(final_rate(700, 700, 1.0) == 700.0);
  CHECK(final_rate(2493, 612, 0.0417) == doctest::Approx(25.52).epsilon(1e-3));
  CHECK(code_of([] { (void)final_rate(1, 1, 0.0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { (void)final_rate(-1, 1, 1.0); }) == ErrorCode::InvalidArgument);
  // Monotone in both rates and in eta.
  CHECK(final_rate(800, 612, 0.5) <= final_rate(900, 612, 0.5));
  CHECK(final_rate(800, 612, 0.5) <= final_rate(800, 700, 0.5));
  CHECK(final_rate(800, 612, 0.5) <= final_rate(800, 612, 0.6));
}

TEST_CASE("measured eta") {
  SUBCASE("pqc-secured aligned") {
    Chain c({100 * 2560, 100 * 2560}, 7);
    std::vector<relay::RelaySession> sessions;
    for (int i = 0; i < 100; ++i) sessions.push_back(c.run(Variant::PqcSecured, 2560, mock()).session);
    const std::vector<double> rates{2493, 612};
    const auto rep = measured_eta(sessions, rates);
    CHECK(rep.eta == 1.0);
    CHECK(rep.eta_analytic == 1.0);
    CHECK(rep.r_final_bps == 612.0);
    CHECK(rep.r_final_bps <= std::min(rep.r_ac(), rep.r_bc()));
  }
  SUBCASE("direct-kem") {
    Chain c({100 * 6144, 100 * 6144}, 8);
    std::vector<relay::RelaySession> sessions;
    for (int i = 0; i < 100; ++i) sessions.push_back(c.run(Variant::DirectKem, 256, mock()).session);
    const auto rep = measured_eta(sessions);
    CHECK(rep.eta == 256.0 / 6144.0);
    CHECK(rep.p == 100);
    CHECK(rep.l_ct == 6144);
  }
  SUBCASE("unaligned lengths") {
    Chain c({200000, 200000}, 9);
    std::vector<relay::RelaySession> sessions;
    std::mt19937 gen(1);
    std::uint64_t l_sum = 0, pad_sum = 0;
    for (int i = 0; i < 50; ++i) {
      const std::size_t l = 1 + gen() % 2000;
      sessions.push_back(c.run(Variant::PqcSecured, l, mock()).session);
      l_sum += l;
      pad_sum += (l + 127) / 128 * 128;
    }
    const auto rep = measured_eta(sessions);
    CHECK(rep.eta == static_cast<double>(l_sum) / static_cast<double>(pad_sum));
    CHECK(rep.eta <= 1.0);
    CHECK(rep.eta >= 1.0 / 128.0);
  }
  SUBCASE("mixed batch") {
    Chain c({40000, 40000}, 10);
    std::vector<relay::RelaySession> sessions{c.run(Variant::PqcSecured, 256, mock()).session,
                                              c.run(Variant::Standard, 256, mock()).session};
    CHECK(code_of([&] { (void)measured_eta(sessions); }) == ErrorCode::InvalidArgument);
  }
  SUBCASE("pqc beats direct-kem for every parameter set") {
    for (const auto& params : cryptoseal::builtin_param_sets()) {
      Chain a({20 * 256, 20 * 256}, 11), b({20 * 12544, 20 * 12544}, 11);
      std::vector<relay::RelaySession> pq, dk;
      for (int i = 0; i < 10; ++i) {
        pq.push_back(a.run(Variant::PqcSecured, 256, mock(), params).session);
        dk.push_back(b.run(Variant::DirectKem, 256, mock(), params).session);
      }
      CHECK(measured_eta(pq).eta >= measured_eta(dk).eta);
    }
  }
}

TEST_CASE("eta table rows") {
  const auto rows = eta_table(cryptoseal::builtin_param_sets());
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].protocol == "direct-kem");
  CHECK(rows[3].protocol == "pqc-secured");
  CHECK(rows[3].eta == 1.0);
}

TEST_CASE("transcript file round trip") {
  Chain c({20000, 20000}, 12);
  std::stringstream buf;
  std::vector<SessionTranscript> written;
  for (auto v : {Variant::Standard, Variant::PqcSecured, Variant::DirectKem}) {
    written.push_back(c.run(v, 512, mock()).transcript);
    write_transcript(buf, written.back());
  }
  Chain z({0, 100}, 13);
  written.push_back(z.run(Variant::Standard, 512, mock()).transcript);
  write_transcript(buf, written.back());

  const auto read = read_transcripts(buf);
  REQUIRE(read.size() == written.size());
  for (std::size_t i = 0; i < read.size(); ++i) CHECK(read[i] == written[i]);

  std::stringstream bad("{\"type\":\"session\"}\nnot json\n");
  CHECK(code_of([&] { (void)read_transcripts(bad); }) == ErrorCode::ParseError);
}

TEST_CASE("replay of standard transcripts") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Chain c({4096, 4096}, seed);
    const auto r = c.run(Variant::Standard, 256 + seed * 13, mock());
    const auto& t = r.transcript;
    const auto& k_ac = t.snapshot("C")->keys.at("otp_in");
    const auto& k_bc = t.snapshot("C")->keys.at("otp_out");
    const ChannelMessage* m1 = nullptr;
    const ChannelMessage* m2 = nullptr;
    for (const auto& m : t.messages) {
      if (m.kind == MessageKind::Payload_m1) m1 = &m;
      if (m.kind == MessageKind::Payload_m2) m2 = &m;
    }
    REQUIRE(m1 != nullptr);
    REQUIRE(m2 != nullptr);
    CHECK((m1->body ^ k_ac) == t.snapshot("A")->keys.at("k_AB"));
    CHECK((m1->body ^ m2->body) == (k_ac ^ k_bc));
  }
}
