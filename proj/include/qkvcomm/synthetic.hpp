#pragma once

#include <cstdint>
#include <vector>

#include "qkvcomm/tensor.hpp"

namespace qkvcomm {

// Deterministic stand-in for live model inference: per-layer normal
// tensors from a seeded generator. Equal specs produce bitwise-equal
// caches on a given build.
struct SyntheticSpec {
    uint32_t num_layers = 0;
    uint32_t num_heads = 0;
    uint32_t seq_len = 0;
    uint32_t head_dim = 0;
    std::vector<float> per_layer_mean;
    std::vector<float> per_layer_std;
    uint64_t seed = 0;
    std::string model_id = "synthetic";

    void validate() const;  // InvalidArgument on zero extents or std <= 0
};

KvCache generate_cache(const SyntheticSpec& spec);

// Uniform [0,1) weights matching the cache dimensions; deterministic
// given the seed. Throws InvalidArgument on an empty cache.
AttentionMap generate_attention(const KvCache& cache, uint64_t seed);

// SplitMix64: the seed-stable PRNG behind the synthetic generators.
struct SplitMix64 {
    uint64_t state;

    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        state += 0x9e3779b97f4a7c15ull;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform double in (0,1].
    double next_unit() { return (double(next() >> 11) + 1.0) * 0x1.0p-53; }
};

}  // namespace qkvcomm
