#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nups/transport/message.hpp"

namespace nups::wire {

/// Frame layout (all integers little-endian, scalars raw IEEE-754 LE):
///
///   u32 body_length                  bytes that follow this field
///   u8  version (1)
///   u8  kind                         MessageKind
///   u8  cause                        Cause
///   u8  scalar_bytes                 4 or 8
///   u32 sender, u32 receiver, u32 origin, u32 stage
///   u64 request_id
///   u32 n_keys, u32 n_versions, u32 n_payload
///   u64 keys[n_keys]
///   u64 versions[n_versions]
///   scalar payload[n_payload]
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kLengthBytes = 4;
inline constexpr std::size_t kHeaderBytes = 40;

std::vector<std::uint8_t> encode(const Message& m);

/// Decodes one frame body (without the leading length field).
/// Throws InvalidInput on malformed input.
Message decode_body(std::span<const std::uint8_t> body);

/// Decodes a full frame including the length prefix.
Message decode(std::span<const std::uint8_t> frame);

}  // namespace nups::wire
