#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qkdrelay/keycore.hpp"

namespace qkdrelay::encoding {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;
using Uuid = std::array<std::uint8_t, 16>;

std::string base64_encode(std::span<const std::uint8_t> data);
Bytes base64_decode(std::string_view text);

Digest sha256(std::span<const std::uint8_t> data);

// Random version-4 UUID drawn from `rng`.
Uuid random_uuid(Rng& rng);
std::string uuid_to_string(const Uuid& id);

}  // namespace qkdrelay::encoding
