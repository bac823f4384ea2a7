#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace samif {

using Digest = std::array<std::uint8_t, 32>;

/// SHA-256 of the given bytes.
Digest sha256(std::string_view bytes);
std::string to_hex(const Digest& digest);

}  // namespace samif
