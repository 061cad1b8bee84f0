#include <doctest.h>

#include <cmath>

#include "qkdrelay/encoding.hpp"
#include "qkdrelay/error.hpp"
#include "qkdrelay/qkdsim.hpp"

using namespace qkdrelay;
using namespace qkdrelay::qkdsim;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

QkdLinkConfig link_cfg(double rate, double std = 0.0) {
  QkdLinkConfig c;
  c.link_id = "L";
  c.endpoint_a = "A";
  c.endpoint_b = "C";
  c.mean_rate_bps = rate;
  c.rate_std_bps = std;
  c.mean_qber = 0.02;
  c.qber_std = 0.005;
  c.mean_visibility = 0.98;
  c.visibility_std = 0.01;
  c.seed = 5;
  return c;
}

KeyPool filled_pool(std::size_t blocks, std::uint64_t seed = 1) {
  KeyPool pool("A", "C");
  Rng rng(seed);
  pool.deposit_material(keycore::random_register(blocks * kBlockBits, rng), rng);
  return pool;
}

void check_conserved(const KeyPool& pool) {
  CHECK(pool.accounting("A").conserved());
  CHECK(pool.accounting("C").conserved());
}

}  // namespace

TEST_CASE("config validation") {
  auto c = link_cfg(100);
  CHECK_NOTHROW(c.validate());
  c.mean_qber = 1.5;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::ValidationError);
  c = link_cfg(-1);
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::ValidationError);
}

TEST_CASE("accumulator emits whole blocks") {
  QkdLink link(link_cfg(2493));
  std::size_t blocks = 0;
  for (int t = 1; t <= 256; ++t) {
    blocks += link.advance(1.0).new_blocks.size();
    // Oracle: floor of accumulated bits over the block size.
    CHECK(blocks == static_cast<std::size_t>(2493 * t / 256));
  }
  CHECK(blocks == 2493);
  CHECK(link.pool().available_bits() == 638208);
}

TEST_CASE("zero rate never produces") {
  QkdLink link(link_cfg(0));
  for (int t = 0; t < 1000; ++t) CHECK(link.advance(1.0).new_blocks.empty());
  CHECK(link.pool().available_blocks() == 0);
}

TEST_CASE("telemetry statistics over eleven hours") {
  QkdLink link(link_cfg(612, 139));
  const int n = 11 * 3600;
  double sum = 0.0;
  for (int t = 0; t < n; ++t) {
    const auto s = link.advance(1.0).telemetry;
    CHECK(s.timestamp_s == doctest::Approx(t + 1));
    CHECK(s.qber >= 0.0);
    CHECK(s.visibility <= 1.0);
    sum += s.secret_key_rate_bps;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean - 612.0) <= 3.0 * 139.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("link determinism") {
  QkdLink a(link_cfg(612, 139), 9), b(link_cfg(612, 139), 9), c(link_cfg(612, 139), 10);
  bool differs = false;
  for (int t = 0; t < 200; ++t) {
    const auto ra = a.advance(1.0), rb = b.advance(1.0), rc = c.advance(1.0);
    CHECK(ra.telemetry.secret_key_rate_bps == rb.telemetry.secret_key_rate_bps);
    REQUIRE(ra.new_blocks.size() == rb.new_blocks.size());
    for (std::size_t i = 0; i < ra.new_blocks.size(); ++i) CHECK(ra.new_blocks[i].block == rb.new_blocks[i].block);
    differs = differs || ra.telemetry.secret_key_rate_bps != rc.telemetry.secret_key_rate_bps;
  }
  CHECK(differs);
}

TEST_CASE("reserve") {
  SUBCASE("exact fit") {
    auto pool = filled_pool(4);
    const auto r = pool.reserve(1024);
    CHECK(r.material.size() == 1024);
    CHECK(r.key_ids.size() == 4);
    CHECK(r.residue_bits == 0);
    CHECK(pool.available_bits() == 0);
    check_conserved(pool);
  }
  SUBCASE("residue discarded") {
    auto pool = filled_pool(2);
    const auto before = pool.entries("A");
    const auto r = pool.reserve(300);
    CHECK(r.material.size() == 300);
    CHECK(r.key_ids.size() == 2);
    CHECK(r.residue_bits == 212);
    CHECK(pool.available_bits() == 0);
    CHECK(r.material == keycore::truncate(keycore::concat(before[0].block, before[1].block), 300));
    CHECK(pool.accounting("A").residue_discarded_bits == 212);
    check_conserved(pool);
  }
  SUBCASE("empty store") {
    KeyPool pool("A", "C");
    CHECK(code_of([&] { (void)pool.reserve(1); }) == ErrorCode::InsufficientKey);
  }
  SUBCASE("oldest first and paired") {
    auto pool = filled_pool(6);
    const auto entries = pool.entries("A");
    const auto r1 = pool.reserve(256);
    const auto r2 = pool.reserve(512);
    CHECK(r1.material == entries[0].block);
    CHECK(r2.material == keycore::concat(entries[1].block, entries[2].block));
    const auto after = pool.entries("C");
    for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i].consumed == (i < 3));
    CHECK(pool.single_use_holds());
  }
}

TEST_CASE("key delivery in process") {
  auto pool = filled_pool(8);
  CHECK(pool.status("A").stored_key_count == 8);
  CHECK(pool.status("A").key_size_bits == 256);

  SUBCASE("enc then dec on the peer") {
    const auto enc = pool.get_enc_keys("A", 1, 256);
    REQUIRE(enc.size() == 1);
    const std::vector<std::string> ids{enc[0].key_id};
    const auto dec = pool.get_dec_keys("C", ids);
    CHECK(dec[0].key == enc[0].key);
    CHECK(code_of([&] { (void)pool.get_dec_keys("C", ids); }) == ErrorCode::AlreadyConsumed);
    check_conserved(pool);
  }
  SUBCASE("multi-block keys") {
    const auto enc = pool.get_enc_keys("A", 2, 512);
    CHECK(enc.size() == 2);
    CHECK(enc[0].key.size() == 512);
    CHECK(pool.status("A").stored_key_count == 4);
  }
  SUBCASE("unknown id") {
    Rng rng(3);
    const std::vector<std::string> ids{encoding::uuid_to_string(encoding::random_uuid(rng))};
    CHECK(code_of([&] { (void)pool.get_dec_keys("C", ids); }) == ErrorCode::UnknownKeyId);
  }
  SUBCASE("insufficient") {
    CHECK(code_of([&] { (void)pool.get_enc_keys("A", 9, 256); }) == ErrorCode::InsufficientKey);
    CHECK(pool.status("A").stored_key_count == 8);
  }
}

TEST_CASE("capacity overflow is accounted") {
  KeyPool pool("A", "C", 2);
  Rng rng(1);
  CHECK(pool.deposit_material(keycore::random_register(4 * kBlockBits + 17, rng), rng) == 2);
  CHECK(pool.available_blocks() == 2);
  CHECK(pool.accounting("A").overflow_discarded_bits == 2 * kBlockBits);
  check_conserved(pool);
}

TEST_CASE("conservation under random workload") {
  QkdLink link(link_cfg(900, 300));
  Rng rng(77);
  for (int t = 0; t < 2000; ++t) {
    link.advance(1.0);
    const std::size_t want = std::uniform_int_distribution<std::size_t>(1, 3000)(rng);
    if (link.pool().available_bits() >= want) (void)link.pool().reserve(want);
    if (t % 7 == 0 && link.pool().available_blocks() > 0) {
      const auto keys = link.pool().get_enc_keys("A", 1, 256);
      const std::vector<std::string> ids{keys[0].key_id};
      CHECK(link.pool().get_dec_keys("C", ids)[0].key == keys[0].key);
    }
    REQUIRE(link.pool().accounting("A").conserved());
    REQUIRE(link.pool().accounting("C").conserved());
  }
  CHECK(link.pool().single_use_holds());
}
