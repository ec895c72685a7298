#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace qkvcomm {

// Row-major fp32 tensor with axis order (batch, heads, seq, head_dim).
struct Tensor {
    std::array<uint32_t, 4> shape{0, 0, 0, 0};
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::array<uint32_t, 4> shape_, std::vector<float> data_);

    static Tensor zeros(std::array<uint32_t, 4> shape);

    uint64_t numel() const noexcept {
        return uint64_t(shape[0]) * shape[1] * shape[2] * shape[3];
    }
    uint32_t batch() const noexcept { return shape[0]; }
    uint32_t heads() const noexcept { return shape[1]; }
    uint32_t seq_len() const noexcept { return shape[2]; }
    uint32_t head_dim() const noexcept { return shape[3]; }

    float& at(uint32_t b, uint32_t h, uint32_t s, uint32_t d) {
        return data[((uint64_t(b) * shape[1] + h) * shape[2] + s) * shape[3] + d];
    }
    float at(uint32_t b, uint32_t h, uint32_t s, uint32_t d) const {
        return data[((uint64_t(b) * shape[1] + h) * shape[2] + s) * shape[3] + d];
    }

    bool operator==(const Tensor&) const = default;

    // Throws InvalidArgument if data length mismatches the shape or any
    // element is NaN/Inf.
    void validate() const;
};

struct TensorStats {
    float min = 0.0f;
    float max = 0.0f;
    float mean = 0.0f;
    float std_dev = 0.0f;  // population form, sqrt(E[x^2] - mean^2)
};

// Exact min/max; mean and std accumulated in 64-bit then narrowed.
TensorStats tensor_stats(const Tensor& t);

struct LayerKv {
    Tensor key;
    Tensor value;

    bool operator==(const LayerKv&) const = default;
};

// Per-layer key/value tensors of one model. A dense cache holds every
// layer with layer_indices = {0..L-1}; a sparse cache (the receiver side
// after transmission) holds only selected layers tagged with their
// original indices.
struct KvCache {
    std::string model_id;
    std::vector<LayerKv> layers;
    std::vector<uint16_t> layer_indices;

    size_t num_layers() const noexcept { return layers.size(); }
    bool is_dense() const noexcept;

    static KvCache dense(std::string model_id, std::vector<LayerKv> layers);

    // key.shape == value.shape per layer; batch/heads/head_dim and seq
    // shared across layers; indices strictly increasing.
    void validate() const;

    bool operator==(const KvCache&) const = default;
};

// Non-negative attention weights A[layer][head][position].
struct AttentionMap {
    uint32_t num_layers = 0;
    uint32_t num_heads = 0;
    uint32_t num_positions = 0;
    std::vector<float> weights;  // flat, layer-major

    float at(uint32_t l, uint32_t h, uint32_t t) const {
        return weights[(uint64_t(l) * num_heads + h) * num_positions + t];
    }
    float& at(uint32_t l, uint32_t h, uint32_t t) {
        return weights[(uint64_t(l) * num_heads + h) * num_positions + t];
    }

    void validate() const;
};

}  // namespace qkvcomm
