#include "qkvcomm/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "qkvcomm/errors.hpp"

namespace qkvcomm {

void SyntheticSpec::validate() const {
    if (num_layers == 0 || num_heads == 0 || seq_len == 0 || head_dim == 0)
        throw InvalidArgument("synthetic spec: all extents must be positive");
    if (per_layer_mean.size() != num_layers || per_layer_std.size() != num_layers)
        throw InvalidArgument("synthetic spec: per-layer mean/std must have num_layers entries");
    for (float s : per_layer_std) {
        if (!(s > 0.0f)) throw InvalidArgument("synthetic spec: per-layer std must be > 0");
    }
}

namespace {

// Box-Muller over SplitMix64 uniforms; seed-stable on a given build.
float next_normal(SplitMix64& rng, double mean, double std_dev) {
    const double u1 = rng.next_unit();
    const double u2 = rng.next_unit();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return float(mean + std_dev * z);
}

}  // namespace

KvCache generate_cache(const SyntheticSpec& spec) {
    spec.validate();

    const std::array<uint32_t, 4> shape{1, spec.num_heads, spec.seq_len, spec.head_dim};
    const size_t numel = size_t(spec.num_heads) * spec.seq_len * spec.head_dim;

    SplitMix64 rng(spec.seed);
    std::vector<LayerKv> layers;
    layers.reserve(spec.num_layers);
    for (uint32_t l = 0; l < spec.num_layers; ++l) {
        const double mean = spec.per_layer_mean[l];
        const double std_dev = spec.per_layer_std[l];
        LayerKv layer;
        layer.key.shape = shape;
        layer.value.shape = shape;
        layer.key.data.reserve(numel);
        layer.value.data.reserve(numel);
        for (size_t i = 0; i < numel; ++i) layer.key.data.push_back(next_normal(rng, mean, std_dev));
        for (size_t i = 0; i < numel; ++i)
            layer.value.data.push_back(next_normal(rng, mean, std_dev));
        layers.push_back(std::move(layer));
    }
    return KvCache::dense(spec.model_id, std::move(layers));
}

AttentionMap generate_attention(const KvCache& cache, uint64_t seed) {
    if (cache.layers.empty()) throw InvalidArgument("generate_attention: empty cache");

    AttentionMap map;
    map.num_layers = static_cast<uint32_t>(cache.num_layers());
    map.num_heads = cache.layers.front().key.heads();
    map.num_positions = cache.layers.front().key.seq_len();
    map.weights.reserve(size_t(map.num_layers) * map.num_heads * map.num_positions);

    SplitMix64 rng(seed);
    for (uint64_t i = 0, n = uint64_t(map.num_layers) * map.num_heads * map.num_positions; i < n;
         ++i) {
        map.weights.push_back(float(rng.next() >> 40) * 0x1.0p-24f);
    }
    return map;
}

}  // namespace qkvcomm
