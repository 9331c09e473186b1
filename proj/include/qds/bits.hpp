#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qds/errors.hpp"
#include "qds/rng.hpp"

namespace qds {

// One byte per bit (values 0/1). String lengths here top out around 12k
// bits, so compactness is not worth the indexing noise.
using Bits = std::vector<std::uint8_t>;

inline Bits random_bits(Rng& rng, std::size_t n) {
    Bits out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::uint8_t>(rng.next_u64() & 1u);
    return out;
}

inline long hamming_distance(const Bits& a, const Bits& b) {
    if (a.size() != b.size()) throw ValidationError("hamming_distance: length mismatch");
    long d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]) ? 1 : 0;
    return d;
}

// Hex codec used on the wire and in store files: bits packed MSB-first into
// bytes, trailing pad bits zero, lowercase hex. 0xa5 over 8 bits is "a5".
inline std::string bits_to_hex(const Bits& bits) {
    static const char* digits = "0123456789abcdef";
    const std::size_t nbytes = (bits.size() + 7) / 8;
    std::vector<std::uint8_t> bytes(nbytes, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) bytes[i / 8] |= static_cast<std::uint8_t>(1u << (7 - i % 8));
    }
    std::string hex;
    hex.reserve(nbytes * 2);
    for (std::uint8_t b : bytes) {
        hex.push_back(digits[b >> 4]);
        hex.push_back(digits[b & 0x0f]);
    }
    return hex;
}

inline Bits bits_from_hex(std::string_view hex, std::size_t bit_length) {
    const std::size_t nbytes = (bit_length + 7) / 8;
    if (hex.size() != nbytes * 2)
        throw ValidationError("hex bit string: length does not match bit_length");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    Bits bits(bit_length);
    for (std::size_t byte = 0; byte < nbytes; ++byte) {
        const int hi = nibble(hex[byte * 2]);
        const int lo = nibble(hex[byte * 2 + 1]);
        if (hi < 0 || lo < 0) throw ValidationError("hex bit string: invalid hex digit");
        const unsigned value = static_cast<unsigned>(hi) << 4 | static_cast<unsigned>(lo);
        for (unsigned j = 0; j < 8; ++j) {
            const std::size_t i = byte * 8 + j;
            const unsigned bit = (value >> (7 - j)) & 1u;
            if (i < bit_length) {
                bits[i] = static_cast<std::uint8_t>(bit);
            } else if (bit) {
                throw ValidationError("hex bit string: nonzero padding bits");
            }
        }
    }
    return bits;
}

} // namespace qds
