#include "qkvcomm/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "qkvcomm/errors.hpp"

namespace qkvcomm {

Tensor::Tensor(std::array<uint32_t, 4> shape_, std::vector<float> data_)
    : shape(shape_), data(std::move(data_)) {
    validate();
}

Tensor Tensor::zeros(std::array<uint32_t, 4> shape) {
    Tensor t;
    t.shape = shape;
    t.data.assign(size_t(uint64_t(shape[0]) * shape[1] * shape[2] * shape[3]), 0.0f);
    return t;
}

void Tensor::validate() const {
    if (data.size() != numel())
        throw InvalidArgument("tensor data length does not match shape");
    for (float v : data) {
        if (!std::isfinite(v)) throw InvalidArgument("tensor contains non-finite values");
    }
}

TensorStats tensor_stats(const Tensor& t) {
    if (t.data.empty()) throw InvalidArgument("tensor_stats: empty tensor");

    float lo = t.data[0];
    float hi = t.data[0];
    double sum = 0.0;
    double sum_sq = 0.0;
    for (float v : t.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
        sum_sq += double(v) * v;
    }
    const double n = double(t.data.size());
    const double mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - mean * mean);

    TensorStats s;
    s.min = lo;
    s.max = hi;
    s.mean = float(mean);
    s.std_dev = float(std::sqrt(var));
    return s;
}

bool KvCache::is_dense() const noexcept {
    for (size_t i = 0; i < layer_indices.size(); ++i) {
        if (layer_indices[i] != i) return false;
    }
    return layer_indices.size() == layers.size();
}

KvCache KvCache::dense(std::string model_id, std::vector<LayerKv> layers) {
    KvCache cache;
    cache.model_id = std::move(model_id);
    cache.layers = std::move(layers);
    cache.layer_indices.resize(cache.layers.size());
    for (size_t i = 0; i < cache.layer_indices.size(); ++i)
        cache.layer_indices[i] = static_cast<uint16_t>(i);
    cache.validate();
    return cache;
}

void KvCache::validate() const {
    if (layer_indices.size() != layers.size())
        throw InvalidArgument("cache layer_indices length does not match layer count");
    for (size_t i = 0; i + 1 < layer_indices.size(); ++i) {
        if (layer_indices[i] >= layer_indices[i + 1])
            throw InvalidArgument("cache layer indices must be strictly increasing");
    }
    for (const LayerKv& layer : layers) {
        layer.key.validate();
        layer.value.validate();
        if (layer.key.shape != layer.value.shape)
            throw InvalidArgument("layer key/value shapes differ");
        if (layer.key.shape != layers.front().key.shape)
            throw InvalidArgument("layers must share tensor shape");
    }
}

void AttentionMap::validate() const {
    if (weights.size() != uint64_t(num_layers) * num_heads * num_positions)
        throw InvalidArgument("attention map weight count does not match dimensions");
    for (float w : weights) {
        if (!(w >= 0.0f)) throw InvalidArgument("attention weights must be non-negative");
    }
}

}  // namespace qkvcomm
