#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qkvcomm/tensor.hpp"

namespace qkvcomm {

enum class CalibrationMode : uint8_t {
    PerDimension = 0,  // one (mean, std) per head_dim channel
    Scalar = 1,        // one pooled (mean, std) per layer
};

// Per-layer first and second moments of one model's keys and values.
// Vectors have head_dim entries in per-dimension mode, one entry in
// scalar mode. Stds are population form, floored at kSigmaFloor.
struct LayerStats {
    std::vector<float> mu_k;
    std::vector<float> sigma_k;
    std::vector<float> mu_v;
    std::vector<float> sigma_v;
};

inline constexpr float kSigmaFloor = 1e-6f;

struct CalibrationProfile {
    std::string model_id;
    CalibrationMode mode = CalibrationMode::Scalar;
    std::vector<LayerStats> per_layer;

    size_t num_layers() const noexcept { return per_layer.size(); }

    // Single scalar entry pooled across layers with equal weights; the
    // cross-depth fallback when layer counts differ between models.
    LayerStats pooled_scalar() const;

    void validate() const;
};

// Moments over a non-empty calibration set with consistent shapes.
CalibrationProfile compute_profile(const std::vector<KvCache>& caches, CalibrationMode mode);

// Eq-style standardize-and-rescale: out = (x - mu_s) / sigma_s * sigma_r + mu_r.
// stats vectors broadcast over the head_dim axis in per-dimension mode.
Tensor calibrate(const Tensor& kv, const std::vector<float>& mu_s,
                 const std::vector<float>& sigma_s, const std::vector<float>& mu_r,
                 const std::vector<float>& sigma_r);

struct ModelDims {
    uint32_t head_dim = 0;
    uint32_t num_layers = 0;
};

// Per-dimension when head_dim and layer counts match, scalar otherwise.
CalibrationMode select_mode(const ModelDims& sender, const ModelDims& receiver);

// Applies the transform layer by layer (keys with key stats, values with
// value stats). Falls back to profile-wide pooled scalar stats when the
// profiles' layer counts differ.
KvCache calibrate_cache(const KvCache& cache, const CalibrationProfile& sender,
                        const CalibrationProfile& receiver);

// Versioned binary container ("QKVP").
std::vector<uint8_t> serialize_profile(const CalibrationProfile& profile);
CalibrationProfile deserialize_profile(std::span<const uint8_t> bytes);

void save_profile(const CalibrationProfile& profile, const std::string& path);
CalibrationProfile load_profile(const std::string& path);

}  // namespace qkvcomm
