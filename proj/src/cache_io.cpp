#include "qkvcomm/cache_io.hpp"

#include <cstring>
#include <fstream>

#include "qkvcomm/bytes.hpp"
#include "qkvcomm/errors.hpp"

namespace qkvcomm {

namespace {

constexpr char kCacheMagic[4] = {'Q', 'K', 'V', 'T'};
constexpr uint8_t kCacheVersion = 1;

void write_tensor_data(ByteWriter& w, const Tensor& t) {
    for (float v : t.data) w.f32(v);
}

Tensor read_tensor_data(ByteReader& r, std::array<uint32_t, 4> shape) {
    Tensor t;
    t.shape = shape;
    const uint64_t numel = t.numel();
    if (r.remaining() < numel * 4)
        throw WireError(WireCode::Truncated, "cache file tensor data truncated");
    t.data.resize(size_t(numel));
    for (float& v : t.data) v = r.f32();
    return t;
}

}  // namespace

std::vector<uint8_t> serialize_cache(const KvCache& cache, uint16_t total_layers) {
    cache.validate();
    if (cache.num_layers() > 0xffff)
        throw WireError(WireCode::UnrepresentableField, "more than 65535 layers");
    uint16_t total = total_layers;
    if (total == 0)
        total = cache.layer_indices.empty() ? 0 : uint16_t(cache.layer_indices.back() + 1);
    if (!cache.layer_indices.empty() && cache.layer_indices.back() >= total)
        throw InvalidArgument("cache: layer index exceeds stated total depth");

    ByteWriter w;
    w.bytes(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(kCacheMagic), 4));
    w.u8(kCacheVersion);
    w.str16(cache.model_id);
    w.u16(total);
    w.u16(uint16_t(cache.num_layers()));
    for (uint16_t index : cache.layer_indices) w.u16(index);

    const std::array<uint32_t, 4> shape =
        cache.layers.empty() ? std::array<uint32_t, 4>{0, 0, 0, 0}
                             : cache.layers.front().key.shape;
    for (uint32_t extent : shape) w.u32(extent);
    for (const LayerKv& layer : cache.layers) {
        write_tensor_data(w, layer.key);
        write_tensor_data(w, layer.value);
    }
    return w.take();
}

KvCache deserialize_cache(std::span<const uint8_t> bytes, uint16_t* total_layers) {
    ByteReader r(bytes);
    if (r.remaining() < 4) throw WireError(WireCode::Truncated, "cache file shorter than magic");
    const auto magic = r.bytes(4);
    if (std::memcmp(magic.data(), kCacheMagic, 4) != 0)
        throw WireError(WireCode::BadMagic, "not a cache file");
    if (r.u8() != kCacheVersion)
        throw WireError(WireCode::UnsupportedVersion, "unsupported cache file version");

    KvCache cache;
    cache.model_id = r.str16();
    const uint16_t total = r.u16();
    const uint16_t stored = r.u16();
    if (stored > total)
        throw WireError(WireCode::MalformedLength, "stored layers exceed total depth");
    cache.layer_indices.resize(stored);
    for (uint16_t& index : cache.layer_indices) index = r.u16();

    std::array<uint32_t, 4> shape;
    uint64_t numel = 1;
    for (uint32_t& extent : shape) {
        extent = r.u32();
        if (extent != 0 && numel > UINT64_MAX / extent)
            throw WireError(WireCode::MalformedLength, "cache shape overflows");
        numel *= extent;
    }
    if (stored > 0) {
        if (numel > UINT64_MAX / (8ull * stored) || numel * 8ull * stored != r.remaining())
            throw WireError(WireCode::MalformedLength,
                            "cache file size does not match header");
    }

    cache.layers.reserve(stored);
    for (uint16_t l = 0; l < stored; ++l) {
        LayerKv layer;
        layer.key = read_tensor_data(r, shape);
        layer.value = read_tensor_data(r, shape);
        cache.layers.push_back(std::move(layer));
    }
    if (r.remaining() != 0)
        throw WireError(WireCode::MalformedLength, "trailing bytes after cache data");

    cache.validate();
    if (total_layers != nullptr) *total_layers = total;
    return cache;
}

void save_cache(const KvCache& cache, const std::string& path, uint16_t total_layers) {
    write_file(path, serialize_cache(cache, total_layers));
}

KvCache load_cache(const std::string& path, uint16_t* total_layers) {
    return deserialize_cache(read_file(path), total_layers);
}

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path);
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(size), 0);
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (in.gcount() != size) throw IoError("short read from " + path);
    return bytes;
}

void write_file(const std::string& path, std::span<const uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoError("short write to " + path);
}

}  // namespace qkvcomm
