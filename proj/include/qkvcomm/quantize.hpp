#pragma once

#include <cstdint>
#include <vector>

#include "qkvcomm/tensor.hpp"

namespace qkvcomm {

inline constexpr int kMinQuantBits = 2;
inline constexpr int kMaxQuantBits = 8;

// Asymmetric per-tensor quantization parameters:
//   scale      = (max - min) / (2^bits - 1)
//   zero_point = -min / scale
// Degenerate max == min tensors use scale = 1, zero_point = -min so all
// codes are zero and reconstruction is exact.
struct QuantParams {
    int bits = 8;
    float scale = 1.0f;
    float zero_point = 0.0f;
};

struct QuantizedTensor {
    std::vector<uint8_t> codes;  // each < 2^bits
    QuantParams params;
    std::array<uint32_t, 4> shape{0, 0, 0, 0};

    uint64_t numel() const noexcept {
        return uint64_t(shape[0]) * shape[1] * shape[2] * shape[3];
    }
};

// codes = clip(round(x / scale + zero_point), 0, 2^bits - 1), rounding
// half away from zero. Arithmetic runs in 64-bit; scale and zero_point
// are narrowed to fp32 first so codes match what a receiver of the wire
// parameters would compute.
QuantizedTensor quantize(const Tensor& t, int bits);

// x_hat = (code - zero_point) * scale.
Tensor dequantize(const QuantizedTensor& q);

// Per-layer squared reconstruction error under quantization at
// probe_bits, averaged over the calibration caches:
//   E_l = mean_c( ||K_l - K_hat_l||^2 + ||V_l - V_hat_l||^2 )
struct SensitivityReport {
    std::vector<double> per_layer_error;
    int probe_bits = kMinQuantBits;
};

SensitivityReport profile_sensitivity(const std::vector<KvCache>& caches, int probe_bits);

// 30/40/30 schedule over sensitivity rank: the most sensitive ~30% of
// layers get max_bits, the least sensitive ~30% get min_bits, the rest
// get target_bits. Bucket sizes are round(0.3 L) with the remainder in
// the middle; a single layer lands in the top bucket.
struct BitAllocation {
    std::vector<int> per_layer_bits;
    int max_bits = 8;
    int target_bits = 6;
    int min_bits = 4;
};

BitAllocation allocate_bits(const SensitivityReport& report, int max_bits, int target_bits,
                            int min_bits);

}  // namespace qkvcomm
