#include "qkvcomm/wire.hpp"

#include <cmath>
#include <cstring>

#include "qkvcomm/bytes.hpp"
#include "qkvcomm/errors.hpp"

namespace qkvcomm {

namespace {

uint32_t float_bits(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    return bits;
}

void check_packed(const PackedTensor& p) {
    if (p.bits < kMinQuantBits || p.bits > kMaxQuantBits)
        throw InvalidArgument("payload: tensor bits out of range");
    const uint64_t numel = uint64_t(p.shape[0]) * p.shape[1] * p.shape[2] * p.shape[3];
    if (p.count != numel) throw InvalidArgument("payload: packed count does not match shape");
    if (p.bytes.size() != packed_size(p.count, p.bits))
        throw InvalidArgument("payload: packed byte length does not match count");
    if (!(p.params.scale > 0.0f) || !std::isfinite(p.params.scale) ||
        !std::isfinite(p.params.zero_point))
        throw InvalidArgument("payload: invalid quantization parameters");
}

void write_packed(ByteWriter& w, const PackedTensor& p) {
    if (p.bytes.size() > 0xffffffffull)
        throw WireError(WireCode::UnrepresentableField, "packed tensor exceeds u32 bytes");
    w.u8(uint8_t(p.bits));
    w.f32(p.params.scale);
    w.f32(p.params.zero_point);
    for (uint32_t extent : p.shape) w.u32(extent);
    w.u32(uint32_t(p.bytes.size()));
    w.bytes(p.bytes);
}

void write_fact(ByteWriter& w, const Fact& f) {
    if (f.metadata.size() > 0xff)
        throw WireError(WireCode::UnrepresentableField, "fact has more than 255 metadata pairs");
    w.u8(uint8_t(f.kind));
    w.f32(f.confidence);
    w.str16(f.content);
    w.u8(uint8_t(f.metadata.size()));
    for (const auto& [key, value] : f.metadata) {
        w.str16(key);
        w.str16(value);
    }
}

// Single parse routine for both passes: the validation pass runs with
// out == nullptr and only skips over variable-length sections, so no
// allocation happens before every length field has been checked.
void parse_body(ByteReader& r, Payload* out) {
    {
        const auto magic = r.bytes(4);
        if (std::memcmp(magic.data(), kPayloadMagic, 4) != 0)
            throw WireError(WireCode::BadMagic, "bad payload magic");
    }
    const uint8_t version = r.u8();
    if (version != kPayloadVersion)
        throw WireError(WireCode::UnsupportedVersion, "unsupported payload version");
    const uint8_t flags = r.u8();
    std::string model_id = r.str16();
    const uint16_t total_layers = r.u16();
    const uint16_t selected_layers = r.u16();
    if (selected_layers > total_layers)
        throw WireError(WireCode::MalformedLength, "selected layer count exceeds total");
    const uint32_t original_seq_len = r.u32();

    if (out != nullptr) {
        out->header.version = version;
        out->header.flags = flags;
        out->header.sender_model_id = std::move(model_id);
        out->header.total_layers = total_layers;
        out->header.selected_layers = selected_layers;
        out->header.original_seq_len = original_seq_len;
        out->layers.reserve(selected_layers);
    }

    int32_t previous_index = -1;
    for (uint16_t i = 0; i < selected_layers; ++i) {
        const uint16_t layer_index = r.u16();
        if (int32_t(layer_index) <= previous_index)
            throw WireError(WireCode::MalformedLength, "layer indices not strictly increasing");
        if (layer_index >= total_layers)
            throw WireError(WireCode::MalformedLength, "layer index exceeds total layers");
        previous_index = layer_index;

        PayloadLayer layer;
        layer.layer_index = layer_index;
        for (PackedTensor* side : {&layer.packed_key, &layer.packed_value}) {
            const uint8_t bits = r.u8();
            if (bits < kMinQuantBits || bits > kMaxQuantBits)
                throw WireError(WireCode::MalformedLength, "tensor bit width out of range");
            const float scale = r.f32();
            const float zero_point = r.f32();
            if (!(scale > 0.0f) || !std::isfinite(scale) || !std::isfinite(zero_point))
                throw WireError(WireCode::MalformedLength, "invalid quantization parameters");
            std::array<uint32_t, 4> shape;
            uint64_t numel = 1;
            for (uint32_t& extent : shape) {
                extent = r.u32();
                if (numel != 0 && extent != 0 &&
                    numel > UINT64_MAX / extent)
                    throw WireError(WireCode::MalformedLength, "tensor shape overflows");
                numel *= extent;
            }
            if (numel > (UINT64_MAX - 7) / 8)
                throw WireError(WireCode::MalformedLength, "tensor shape overflows");
            const uint32_t byte_len = r.u32();
            if (byte_len != packed_size(numel, bits))
                throw WireError(WireCode::MalformedLength,
                                "packed byte length does not match shape");
            if (out == nullptr) {
                r.skip(byte_len);
            } else {
                side->bits = bits;
                side->count = numel;
                side->params = QuantParams{bits, scale, zero_point};
                side->shape = shape;
                side->bytes = r.bytes(byte_len);
            }
        }
        if (out != nullptr) out->layers.push_back(std::move(layer));
    }

    const uint16_t fact_count = r.u16();
    if (out != nullptr) out->facts.reserve(fact_count);
    for (uint16_t i = 0; i < fact_count; ++i) {
        const uint8_t kind = r.u8();
        if (kind > uint8_t(FactKind::Entity))
            throw WireError(WireCode::MalformedLength, "unknown fact kind");
        const float confidence = r.f32();
        if (!std::isfinite(confidence) || confidence < 0.0f || confidence > 1.0f)
            throw WireError(WireCode::MalformedLength, "fact confidence out of range");
        std::string content = r.str16();
        if (content.empty())
            throw WireError(WireCode::MalformedLength, "fact content empty");
        const uint8_t meta_count = r.u8();
        Fact fact;
        fact.kind = FactKind(kind);
        fact.confidence = confidence;
        fact.content = std::move(content);
        for (uint8_t m = 0; m < meta_count; ++m) {
            std::string key = r.str16();
            std::string value = r.str16();
            if (out != nullptr) fact.metadata.emplace_back(std::move(key), std::move(value));
        }
        if (out != nullptr) out->facts.push_back(std::move(fact));
    }
}

}  // namespace

std::vector<uint8_t> serialize(const Payload& payload) {
    if (payload.layers.size() > 0xffff)
        throw WireError(WireCode::UnrepresentableField, "more than 65535 layers");
    if (payload.facts.size() > 0xffff)
        throw WireError(WireCode::UnrepresentableField, "more than 65535 facts");
    if (payload.header.selected_layers != payload.layers.size())
        throw InvalidArgument("payload: header selected_layers does not match layer count");
    if (payload.header.selected_layers > payload.header.total_layers)
        throw InvalidArgument("payload: selected layers exceed total layers");
    int32_t previous_index = -1;
    for (const PayloadLayer& layer : payload.layers) {
        if (int32_t(layer.layer_index) <= previous_index)
            throw InvalidArgument("payload: layer indices must be strictly increasing");
        previous_index = layer.layer_index;
        check_packed(layer.packed_key);
        check_packed(layer.packed_value);
    }

    ByteWriter w;
    w.bytes(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(kPayloadMagic), 4));
    w.u8(payload.header.version);
    w.u8(payload.header.flags);
    w.str16(payload.header.sender_model_id);
    w.u16(payload.header.total_layers);
    w.u16(uint16_t(payload.layers.size()));
    w.u32(payload.header.original_seq_len);
    for (const PayloadLayer& layer : payload.layers) {
        w.u16(layer.layer_index);
        write_packed(w, layer.packed_key);
        write_packed(w, layer.packed_value);
    }
    w.u16(uint16_t(payload.facts.size()));
    for (const Fact& fact : payload.facts) write_fact(w, fact);

    const uint32_t crc = crc32(std::span<const uint8_t>(w.data()));
    w.u32(crc);
    return w.take();
}

Payload deserialize(std::span<const uint8_t> bytes) {
    // Pass 1: structural validation, no construction, no allocation
    // proportional to claimed lengths.
    {
        ByteReader walk(bytes);
        parse_body(walk, nullptr);
        if (walk.remaining() != 4)
            throw WireError(WireCode::MalformedLength,
                            "payload body does not end at checksum");
    }

    const size_t body_len = bytes.size() - 4;
    const uint32_t stored_crc = uint32_t(bytes[body_len]) | uint32_t(bytes[body_len + 1]) << 8 |
                                uint32_t(bytes[body_len + 2]) << 16 |
                                uint32_t(bytes[body_len + 3]) << 24;
    if (crc32(bytes.subspan(0, body_len)) != stored_crc)
        throw WireError(WireCode::CrcMismatch, "payload checksum mismatch");

    // Pass 2: construct from the validated stream.
    Payload payload;
    ByteReader r(bytes);
    parse_body(r, &payload);

    // canonical form: padding bits in every packed tensor are zero
    for (const PayloadLayer& layer : payload.layers) {
        for (const PackedTensor* side : {&layer.packed_key, &layer.packed_value}) {
            const uint64_t padding = uint64_t(side->bytes.size()) * 8 - side->count * side->bits;
            if (padding > 0 && !side->bytes.empty() &&
                (side->bytes.back() >> (8 - padding)) != 0)
                throw WireError(WireCode::MalformedLength, "nonzero padding bits");
        }
    }
    return payload;
}

size_t payload_size(const PayloadSizeSpec& spec) {
    size_t size = 4 + 1 + 1 + 2 + spec.model_id_bytes + 2 + 2 + 4;  // header
    for (const LayerSizeSpec& layer : spec.layers) {
        const uint64_t numel =
            uint64_t(layer.shape[0]) * layer.shape[1] * layer.shape[2] * layer.shape[3];
        size += 2 + 2 * (1 + 4 + 4 + 16 + 4);
        size += packed_size(numel, layer.bits_key);
        size += packed_size(numel, layer.bits_value);
    }
    size += 2;  // fact count
    for (const FactSizeSpec& fact : spec.facts) {
        size += 1 + 4 + 2 + fact.content_bytes + 1;
        for (const auto& [key_bytes, value_bytes] : fact.metadata_bytes)
            size += 2 + key_bytes + 2 + value_bytes;
    }
    return size + 4;  // crc
}

PayloadSizeSpec size_spec_of(const Payload& payload) {
    PayloadSizeSpec spec;
    spec.model_id_bytes = payload.header.sender_model_id.size();
    for (const PayloadLayer& layer : payload.layers) {
        spec.layers.push_back(
            {layer.packed_key.shape, layer.packed_key.bits, layer.packed_value.bits});
    }
    for (const Fact& fact : payload.facts) {
        FactSizeSpec f;
        f.content_bytes = fact.content.size();
        for (const auto& [key, value] : fact.metadata)
            f.metadata_bytes.emplace_back(key.size(), value.size());
        spec.facts.push_back(std::move(f));
    }
    return spec;
}

namespace {

bool packed_equal(const PackedTensor& a, const PackedTensor& b) {
    return a.bytes == b.bytes && a.bits == b.bits && a.count == b.count &&
           a.shape == b.shape && a.params.bits == b.params.bits &&
           float_bits(a.params.scale) == float_bits(b.params.scale) &&
           float_bits(a.params.zero_point) == float_bits(b.params.zero_point);
}

}  // namespace

bool payload_equal(const Payload& a, const Payload& b) {
    if (a.header.version != b.header.version || a.header.flags != b.header.flags ||
        a.header.sender_model_id != b.header.sender_model_id ||
        a.header.total_layers != b.header.total_layers ||
        a.header.selected_layers != b.header.selected_layers ||
        a.header.original_seq_len != b.header.original_seq_len)
        return false;
    if (a.layers.size() != b.layers.size() || a.facts.size() != b.facts.size()) return false;
    for (size_t i = 0; i < a.layers.size(); ++i) {
        if (a.layers[i].layer_index != b.layers[i].layer_index ||
            !packed_equal(a.layers[i].packed_key, b.layers[i].packed_key) ||
            !packed_equal(a.layers[i].packed_value, b.layers[i].packed_value))
            return false;
    }
    for (size_t i = 0; i < a.facts.size(); ++i) {
        const Fact& fa = a.facts[i];
        const Fact& fb = b.facts[i];
        if (fa.kind != fb.kind || fa.content != fb.content ||
            float_bits(fa.confidence) != float_bits(fb.confidence) ||
            fa.metadata != fb.metadata)
            return false;
    }
    return true;
}

}  // namespace qkvcomm
