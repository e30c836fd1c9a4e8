#include "hype/crc32c.hpp"

#include <array>

namespace hype {

namespace {

// Reflected Castagnoli polynomial.
constexpr std::uint32_t kPoly = 0x82F63B78u;

std::array<std::uint32_t, 256> make_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t crc = i;
        for (int bit = 0; bit < 8; ++bit)
            crc = (crc >> 1) ^ (kPoly & (0u - (crc & 1u)));
        table[i] = crc;
    }
    return table;
}

const std::array<std::uint32_t, 256> kTable = make_table();

}  // namespace

std::uint32_t crc32c_update(std::uint32_t state, const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i)
        state = (state >> 8) ^ kTable[(state ^ p[i]) & 0xFFu];
    return state;
}

std::uint32_t crc32c(const void* data, std::size_t len) {
    return crc32c_finalize(crc32c_update(crc32c_init(), data, len));
}

}  // namespace hype
