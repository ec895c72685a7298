#include "qkvcomm/bitpack.hpp"

#include <algorithm>

#include "qkvcomm/errors.hpp"

namespace qkvcomm {

namespace {

void check_bits(int bits) {
    if (bits < kMinQuantBits || bits > kMaxQuantBits)
        throw InvalidArgument("bitpack: bits must be in [2,8]");
}

}  // namespace

std::vector<uint8_t> pack_codes(std::span<const uint8_t> codes, int bits) {
    check_bits(bits);
    const uint32_t limit = 1u << bits;

    std::vector<uint8_t> out(packed_size(codes.size(), bits), 0);
    size_t bit_pos = 0;
    for (uint8_t code : codes) {
        if (code >= limit) throw InvalidArgument("pack_codes: code out of range for bit width");
        // LSB-first: low bits of the code land at the low end of the stream.
        uint32_t value = code;
        int remaining = bits;
        while (remaining > 0) {
            const size_t byte_idx = bit_pos >> 3;
            const int offset = int(bit_pos & 7);
            const int take = std::min(remaining, 8 - offset);
            out[byte_idx] |= uint8_t((value & ((1u << take) - 1)) << offset);
            value >>= take;
            remaining -= take;
            bit_pos += take;
        }
    }
    return out;
}

std::vector<uint8_t> unpack_codes(std::span<const uint8_t> bytes, int bits, size_t count) {
    check_bits(bits);
    if (bytes.size() != packed_size(count, bits))
        throw InvalidArgument("unpack_codes: byte length does not match count");

    std::vector<uint8_t> out;
    out.reserve(count);
    size_t bit_pos = 0;
    for (size_t i = 0; i < count; ++i) {
        uint32_t value = 0;
        int got = 0;
        while (got < bits) {
            const size_t byte_idx = bit_pos >> 3;
            const int offset = int(bit_pos & 7);
            const int take = std::min(bits - got, 8 - offset);
            value |= ((uint32_t(bytes[byte_idx]) >> offset) & ((1u << take) - 1)) << got;
            got += take;
            bit_pos += take;
        }
        out.push_back(uint8_t(value));
    }
    return out;
}

PackedTensor pack_tensor(const QuantizedTensor& q) {
    PackedTensor p;
    p.bits = q.params.bits;
    p.count = q.codes.size();
    p.params = q.params;
    p.shape = q.shape;
    p.bytes = pack_codes(q.codes, q.params.bits);
    return p;
}

QuantizedTensor unpack_tensor(const PackedTensor& p) {
    QuantizedTensor q;
    q.params = p.params;
    q.shape = p.shape;
    q.codes = unpack_codes(p.bytes, p.bits, size_t(p.count));
    return q;
}

}  // namespace qkvcomm
