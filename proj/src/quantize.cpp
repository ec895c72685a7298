#include "qkvcomm/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qkvcomm/errors.hpp"

namespace qkvcomm {

namespace {

void check_bits(int bits) {
    if (bits < kMinQuantBits || bits > kMaxQuantBits)
        throw InvalidArgument("quantize: bits must be in [2,8]");
}

}  // namespace

QuantizedTensor quantize(const Tensor& t, int bits) {
    check_bits(bits);
    if (t.data.empty()) throw InvalidArgument("quantize: empty tensor");

    float lo = t.data[0];
    float hi = t.data[0];
    for (float v : t.data) {
        if (!std::isfinite(v)) throw InvalidArgument("quantize: non-finite input");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    // Params derive in 64-bit, then narrow to the fp32 values that travel
    // on the wire; codes are computed against the narrowed values so the
    // receiver reconstructs with exactly the parameters the sender used.
    const double levels = double((1 << bits) - 1);
    QuantParams params;
    params.bits = bits;
    if (hi == lo) {
        params.scale = 1.0f;
        params.zero_point = -lo;
    } else {
        const double scale_d = (double(hi) - double(lo)) / levels;
        params.scale = float(scale_d);
        params.zero_point = float(-double(lo) / scale_d);
    }

    const double scale = params.scale;
    const double zero_point = params.zero_point;
    QuantizedTensor q;
    q.params = params;
    q.shape = t.shape;
    q.codes.reserve(t.data.size());
    for (float v : t.data) {
        // round half away from zero, per std::round
        double code = std::round(double(v) / scale + zero_point);
        code = std::clamp(code, 0.0, levels);
        q.codes.push_back(static_cast<uint8_t>(code));
    }
    return q;
}

Tensor dequantize(const QuantizedTensor& q) {
    const double scale = q.params.scale;
    const double zero_point = q.params.zero_point;

    Tensor t;
    t.shape = q.shape;
    t.data.reserve(q.codes.size());
    for (uint8_t code : q.codes) t.data.push_back(float((double(code) - zero_point) * scale));
    return t;
}

namespace {

double squared_error(const Tensor& original, const Tensor& reconstructed) {
    double sum = 0.0;
    for (size_t i = 0; i < original.data.size(); ++i) {
        const double d = double(original.data[i]) - double(reconstructed.data[i]);
        sum += d * d;
    }
    return sum;
}

}  // namespace

SensitivityReport profile_sensitivity(const std::vector<KvCache>& caches, int probe_bits) {
    check_bits(probe_bits);
    if (caches.empty()) throw InvalidArgument("profile_sensitivity: empty calibration set");

    const size_t num_layers = caches.front().num_layers();
    for (const KvCache& cache : caches) {
        if (cache.num_layers() != num_layers)
            throw InvalidArgument("profile_sensitivity: layer count mismatch across caches");
    }

    SensitivityReport report;
    report.probe_bits = probe_bits;
    report.per_layer_error.assign(num_layers, 0.0);
    for (const KvCache& cache : caches) {
        for (size_t l = 0; l < num_layers; ++l) {
            const LayerKv& layer = cache.layers[l];
            const double err_k = squared_error(layer.key, dequantize(quantize(layer.key, probe_bits)));
            const double err_v =
                squared_error(layer.value, dequantize(quantize(layer.value, probe_bits)));
            report.per_layer_error[l] += err_k + err_v;
        }
    }
    for (double& e : report.per_layer_error) e /= double(caches.size());
    return report;
}

BitAllocation allocate_bits(const SensitivityReport& report, int max_bits, int target_bits,
                            int min_bits) {
    check_bits(max_bits);
    check_bits(target_bits);
    check_bits(min_bits);
    if (!(min_bits <= target_bits && target_bits <= max_bits))
        throw InvalidArgument("allocate_bits: need min_bits <= target_bits <= max_bits");

    const size_t num_layers = report.per_layer_error.size();
    if (num_layers == 0) throw InvalidArgument("allocate_bits: empty sensitivity report");

    // Most sensitive first, ties toward the lower layer index.
    std::vector<size_t> order(num_layers);
    std::iota(order.begin(), order.end(), size_t(0));
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (report.per_layer_error[a] != report.per_layer_error[b])
            return report.per_layer_error[a] > report.per_layer_error[b];
        return a < b;
    });

    size_t n_top = size_t(std::llround(0.3 * double(num_layers)));
    if (n_top == 0) n_top = 1;  // the top bucket wins at tiny depth
    const size_t n_bottom =
        std::min(size_t(std::llround(0.3 * double(num_layers))), num_layers - n_top);

    BitAllocation alloc;
    alloc.max_bits = max_bits;
    alloc.target_bits = target_bits;
    alloc.min_bits = min_bits;
    alloc.per_layer_bits.assign(num_layers, target_bits);
    for (size_t i = 0; i < n_top; ++i) alloc.per_layer_bits[order[i]] = max_bits;
    for (size_t i = 0; i < n_bottom; ++i)
        alloc.per_layer_bits[order[num_layers - 1 - i]] = min_bits;
    return alloc;
}

}  // namespace qkvcomm
