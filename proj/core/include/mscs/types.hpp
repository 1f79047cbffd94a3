#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mscs {

/// Milliseconds since the simulation epoch.
using Millis = std::uint64_t;

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// On-air pseudonym. Zero is reserved and never names a real station.
struct StationId {
    std::uint32_t value = 0;

    constexpr bool valid() const { return value != 0; }
    friend constexpr auto operator<=>(const StationId&, const StationId&) = default;
};

/// Ground-truth identity of a physical station. Simulation only, never on the wire.
struct LongTermId {
    std::uint32_t value = 0;

    friend constexpr auto operator<=>(const LongTermId&, const LongTermId&) = default;
};

/// SHA-256 of a message's bytes; used to reference evidence.
struct MessageDigest {
    std::array<std::uint8_t, 32> bytes{};

    std::string hex() const;
    static MessageDigest of(ByteView data);

    friend constexpr auto operator<=>(const MessageDigest&, const MessageDigest&) = default;
};

std::string to_hex(ByteView data);
/// Returns false on odd length or a non-hex character.
bool from_hex(std::string_view text, Bytes& out);

}  // namespace mscs

template <>
struct std::hash<mscs::StationId> {
    std::size_t operator()(const mscs::StationId& id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};

template <>
struct std::hash<mscs::MessageDigest> {
    std::size_t operator()(const mscs::MessageDigest& d) const noexcept {
        std::size_t h = 0;
        for (std::size_t i = 0; i < sizeof(std::size_t); ++i) h = (h << 8) | d.bytes[i];
        return h;
    }
};
