#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qkvcomm/bitpack.hpp"
#include "qkvcomm/extraction.hpp"

namespace qkvcomm {

// v1 payload layout, little-endian throughout:
//   magic "QKVC" | version u8 | flags u8 | model_id str16
//   total_layers u16 | selected_layers u16 | original_seq_len u32
//   per layer: index u16, then for K and V:
//     bits u8 | scale f32 | zero_point f32 | shape 4xu32 | byte_len u32 | packed bytes
//   facts: count u16, per fact:
//     kind u8 | confidence f32 | content str16 | meta count u8 | (key str16, value str16)*
//   crc32 u32 over everything before it
inline constexpr char kPayloadMagic[4] = {'Q', 'K', 'V', 'C'};
inline constexpr uint8_t kPayloadVersion = 1;
inline constexpr uint8_t kFlagCalibrationApplied = 0x01;
inline constexpr uint8_t kFlagFactsPresent = 0x02;

struct PayloadHeader {
    uint8_t version = kPayloadVersion;
    uint8_t flags = 0;
    std::string sender_model_id;
    uint16_t total_layers = 0;
    uint16_t selected_layers = 0;
    uint32_t original_seq_len = 0;
};

struct PayloadLayer {
    uint16_t layer_index = 0;
    PackedTensor packed_key;
    PackedTensor packed_value;
};

struct Payload {
    PayloadHeader header;
    std::vector<PayloadLayer> layers;
    std::vector<Fact> facts;
};

// Canonical encoding: equal payloads serialize to identical bytes.
// Throws WireError(UnrepresentableField) when a count or length exceeds
// its field width.
std::vector<uint8_t> serialize(const Payload& payload);

// Exact inverse of serialize. Validates magic, version, every length
// field (a structural pre-pass that never over-allocates) and the CRC
// before constructing the result.
Payload deserialize(std::span<const uint8_t> bytes);

// Closed-form size model; equals the length serialize() produces.
struct LayerSizeSpec {
    std::array<uint32_t, 4> shape{0, 0, 0, 0};
    int bits_key = 8;
    int bits_value = 8;
};

struct FactSizeSpec {
    size_t content_bytes = 0;
    std::vector<std::pair<size_t, size_t>> metadata_bytes;
};

struct PayloadSizeSpec {
    size_t model_id_bytes = 0;
    std::vector<LayerSizeSpec> layers;
    std::vector<FactSizeSpec> facts;
};

size_t payload_size(const PayloadSizeSpec& spec);

// The size spec a payload occupies on the wire.
PayloadSizeSpec size_spec_of(const Payload& payload);

bool payload_equal(const Payload& a, const Payload& b);

}  // namespace qkvcomm
