#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace visvar {

// SHA-256 of raw bytes, lowercase hex (64 chars).
std::string sha256_hex(std::string_view bytes);

// Content digest of a record: SHA-256 over the canonical serialization
// (keys in sorted order, which nlohmann's default object type guarantees).
// Text fields are expected to be whitespace-normalized by their producers.
std::string content_digest(const nlohmann::json& record);

// First 8 bytes of sha256(input) as a big-endian integer; seeds RNGs and
// derives deterministic mock outputs.
std::uint64_t digest_u64(std::string_view input);

}  // namespace visvar
