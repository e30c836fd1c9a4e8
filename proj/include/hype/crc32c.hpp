#pragma once

#include <cstddef>
#include <cstdint>

namespace hype {

// CRC-32C (Castagnoli). Incremental: feed crc32c_update with the running
// value, starting from crc32c_init(), then finalize.
std::uint32_t crc32c(const void* data, std::size_t len);

constexpr std::uint32_t crc32c_init() { return 0xFFFFFFFFu; }
std::uint32_t crc32c_update(std::uint32_t state, const void* data, std::size_t len);
constexpr std::uint32_t crc32c_finalize(std::uint32_t state) { return state ^ 0xFFFFFFFFu; }

}  // namespace hype
