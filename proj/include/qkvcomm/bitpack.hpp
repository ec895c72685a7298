#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qkvcomm/quantize.hpp"

namespace qkvcomm {

// Dense LSB-first little-endian bitstream: code i occupies absolute bit
// positions [i*bits, (i+1)*bits); trailing padding bits are zero. This
// layout is normative for the wire format.
std::vector<uint8_t> pack_codes(std::span<const uint8_t> codes, int bits);

// Exact inverse of pack_codes. bytes.size() must equal
// packed_size(count, bits).
std::vector<uint8_t> unpack_codes(std::span<const uint8_t> bytes, int bits, size_t count);

constexpr size_t packed_size(uint64_t count, int bits) {
    return static_cast<size_t>((count * uint64_t(bits) + 7) / 8);
}

// A quantized tensor with its codes packed for transmission.
struct PackedTensor {
    std::vector<uint8_t> bytes;
    int bits = 8;
    uint64_t count = 0;
    QuantParams params;
    std::array<uint32_t, 4> shape{0, 0, 0, 0};
};

PackedTensor pack_tensor(const QuantizedTensor& q);
QuantizedTensor unpack_tensor(const PackedTensor& p);

}  // namespace qkvcomm
