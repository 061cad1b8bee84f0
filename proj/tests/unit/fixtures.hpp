#pragma once

#include <string>
#include <vector>

#include "qkdrelay/cryptoseal.hpp"
#include "qkdrelay/relay.hpp"

namespace fixtures {

using namespace qkdrelay;

// Node ids of an N-node chain: A, C, B for three nodes, A, C1..C{N-2}, B otherwise.
inline std::vector<std::string> chain_ids(std::size_t n) {
  if (n == 3) return {"A", "C", "B"};
  std::vector<std::string> ids{"A"};
  for (std::size_t i = 1; i + 1 < n; ++i) ids.push_back("C" + std::to_string(i));
  ids.push_back("B");
  return ids;
}

// A chain whose links produce nothing on their own; each hop's store is
// preloaded with `hop_bits[i]` bits (rounded down to whole blocks).
struct Chain {
  relay::RelayNetwork net;
  std::vector<std::string> path;
  Rng rng;

  Chain(const std::vector<std::size_t>& hop_bits, std::uint64_t seed, bool zero_material = false) : rng(seed) {
    path = chain_ids(hop_bits.size() + 1);
    for (std::size_t i = 0; i < path.size(); ++i) {
      const bool inner = i > 0 && i + 1 < path.size();
      net.add_node(path[i], inner ? HonestyLevel::HonestButCurious : HonestyLevel::Honest);
    }
    for (std::size_t i = 0; i < hop_bits.size(); ++i) {
      qkdsim::QkdLinkConfig c;
      c.link_id = path[i] + "-" + path[i + 1];
      c.endpoint_a = path[i];
      c.endpoint_b = path[i + 1];
      c.seed = seed * 31 + i;
      auto& link = net.add_link(c, seed);
      const auto material = zero_material ? keycore::KeyRegister(hop_bits[i]) : keycore::random_register(hop_bits[i], rng);
      link.pool().deposit_material(material, rng);
    }
  }

  qkdsim::KeyPool& pool(std::size_t hop) { return net.find_link(path[hop], path[hop + 1])->pool(); }

  relay::RelayResult run(Variant v, std::size_t l, const cryptoseal::CryptoSuite& suite,
                         cryptoseal::KemParamSet kem = cryptoseal::KemParamSet::kem512(),
                         relay::AesKeyCache* cache = nullptr, std::string id = "S1") {
    relay::RelayContext ctx{suite, rng, cache};
    return relay::run_multi_hop(net, relay::SessionRequest{std::move(id), v, path, l, kem}, ctx);
  }
};

}  // namespace fixtures
