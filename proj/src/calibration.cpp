#include "qkvcomm/calibration.hpp"

#include <cmath>
#include <cstring>

#include "qkvcomm/bytes.hpp"
#include "qkvcomm/cache_io.hpp"
#include "qkvcomm/errors.hpp"

namespace qkvcomm {

namespace {

constexpr char kProfileMagic[4] = {'Q', 'K', 'V', 'P'};
constexpr uint8_t kProfileVersion = 1;

// Streaming moment accumulator, one slot per output channel.
struct MomentAccumulator {
    std::vector<double> sum;
    std::vector<double> sum_sq;
    uint64_t count_per_slot = 0;

    explicit MomentAccumulator(size_t slots) : sum(slots, 0.0), sum_sq(slots, 0.0) {}

    void add(const Tensor& t, size_t slots) {
        const size_t n = t.data.size();
        for (size_t i = 0; i < n; ++i) {
            const double v = t.data[i];
            const size_t slot = (slots == 1) ? 0 : i % slots;
            sum[slot] += v;
            sum_sq[slot] += v * v;
        }
        count_per_slot += n / slots;
    }

    void finish(std::vector<float>& mu, std::vector<float>& sigma) const {
        mu.resize(sum.size());
        sigma.resize(sum.size());
        for (size_t i = 0; i < sum.size(); ++i) {
            const double n = double(count_per_slot);
            const double mean = sum[i] / n;
            const double var = std::max(0.0, sum_sq[i] / n - mean * mean);
            mu[i] = float(mean);
            sigma[i] = std::max(kSigmaFloor, float(std::sqrt(var)));
        }
    }
};

}  // namespace

LayerStats CalibrationProfile::pooled_scalar() const {
    if (per_layer.empty()) throw InvalidArgument("calibration profile has no layers");

    // Equal layer weights are exact here: every layer of a cache holds
    // the same element count.
    auto pool = [&](auto mu_of, auto sigma_of) {
        double mean_acc = 0.0;
        double ex2_acc = 0.0;
        size_t slots = 0;
        for (const LayerStats& ls : per_layer) {
            const std::vector<float>& mu = mu_of(ls);
            const std::vector<float>& sigma = sigma_of(ls);
            for (size_t i = 0; i < mu.size(); ++i) {
                mean_acc += mu[i];
                ex2_acc += double(sigma[i]) * sigma[i] + double(mu[i]) * mu[i];
            }
            slots += mu.size();
        }
        const double mean = mean_acc / double(slots);
        const double var = std::max(0.0, ex2_acc / double(slots) - mean * mean);
        return std::pair<float, float>(float(mean),
                                       std::max(kSigmaFloor, float(std::sqrt(var))));
    };

    auto [mu_k, sigma_k] = pool([](const LayerStats& s) -> const std::vector<float>& { return s.mu_k; },
                                [](const LayerStats& s) -> const std::vector<float>& { return s.sigma_k; });
    auto [mu_v, sigma_v] = pool([](const LayerStats& s) -> const std::vector<float>& { return s.mu_v; },
                                [](const LayerStats& s) -> const std::vector<float>& { return s.sigma_v; });

    LayerStats pooled;
    pooled.mu_k = {mu_k};
    pooled.sigma_k = {sigma_k};
    pooled.mu_v = {mu_v};
    pooled.sigma_v = {sigma_v};
    return pooled;
}

void CalibrationProfile::validate() const {
    for (const LayerStats& ls : per_layer) {
        if (ls.mu_k.size() != ls.sigma_k.size() || ls.mu_v.size() != ls.sigma_v.size() ||
            ls.mu_k.size() != ls.mu_v.size())
            throw InvalidArgument("calibration profile: stats vector lengths differ");
        if (mode == CalibrationMode::Scalar && ls.mu_k.size() != 1)
            throw InvalidArgument("calibration profile: scalar mode requires length-1 stats");
        for (float s : ls.sigma_k)
            if (!(s > 0.0f)) throw InvalidArgument("calibration profile: sigma must be > 0");
        for (float s : ls.sigma_v)
            if (!(s > 0.0f)) throw InvalidArgument("calibration profile: sigma must be > 0");
    }
}

CalibrationProfile compute_profile(const std::vector<KvCache>& caches, CalibrationMode mode) {
    if (caches.empty()) throw InvalidArgument("compute_profile: empty calibration set");

    const size_t num_layers = caches.front().num_layers();
    if (num_layers == 0) throw InvalidArgument("compute_profile: caches have no layers");
    const auto shape = caches.front().layers.front().key.shape;
    for (const KvCache& cache : caches) {
        if (cache.num_layers() != num_layers ||
            cache.layers.front().key.shape != shape)
            throw InvalidArgument("compute_profile: shape mismatch across caches");
    }

    const size_t slots = (mode == CalibrationMode::PerDimension) ? shape[3] : 1;

    CalibrationProfile profile;
    profile.model_id = caches.front().model_id;
    profile.mode = mode;
    profile.per_layer.resize(num_layers);
    for (size_t l = 0; l < num_layers; ++l) {
        MomentAccumulator acc_k(slots);
        MomentAccumulator acc_v(slots);
        for (const KvCache& cache : caches) {
            acc_k.add(cache.layers[l].key, slots);
            acc_v.add(cache.layers[l].value, slots);
        }
        acc_k.finish(profile.per_layer[l].mu_k, profile.per_layer[l].sigma_k);
        acc_v.finish(profile.per_layer[l].mu_v, profile.per_layer[l].sigma_v);
    }
    return profile;
}

Tensor calibrate(const Tensor& kv, const std::vector<float>& mu_s,
                 const std::vector<float>& sigma_s, const std::vector<float>& mu_r,
                 const std::vector<float>& sigma_r) {
    const size_t slots = mu_s.size();
    if (sigma_s.size() != slots || mu_r.size() != slots || sigma_r.size() != slots)
        throw InvalidArgument("calibrate: stats vector lengths differ");
    if (slots != 1 && slots != kv.head_dim())
        throw InvalidArgument("calibrate: stats length matches neither 1 nor head_dim");

    Tensor out;
    out.shape = kv.shape;
    out.data.resize(kv.data.size());
    for (size_t i = 0; i < kv.data.size(); ++i) {
        const size_t slot = (slots == 1) ? 0 : i % slots;
        const double standardized = (double(kv.data[i]) - mu_s[slot]) / double(sigma_s[slot]);
        out.data[i] = float(standardized * double(sigma_r[slot]) + double(mu_r[slot]));
    }
    return out;
}

CalibrationMode select_mode(const ModelDims& sender, const ModelDims& receiver) {
    if (sender.head_dim == 0 || receiver.head_dim == 0 || sender.num_layers == 0 ||
        receiver.num_layers == 0)
        throw InvalidArgument("select_mode: extents must be positive");
    if (sender.head_dim == receiver.head_dim && sender.num_layers == receiver.num_layers)
        return CalibrationMode::PerDimension;
    return CalibrationMode::Scalar;
}

KvCache calibrate_cache(const KvCache& cache, const CalibrationProfile& sender,
                        const CalibrationProfile& receiver) {
    if (sender.mode != receiver.mode)
        throw InvalidArgument("calibrate_cache: profile modes differ");

    const bool depth_match = sender.num_layers() == receiver.num_layers();
    LayerStats sender_pooled;
    LayerStats receiver_pooled;
    if (!depth_match) {
        sender_pooled = sender.pooled_scalar();
        receiver_pooled = receiver.pooled_scalar();
    }

    KvCache out = cache;
    for (size_t i = 0; i < out.layers.size(); ++i) {
        const size_t layer_index = out.layer_indices[i];
        const LayerStats& s =
            depth_match ? sender.per_layer.at(layer_index) : sender_pooled;
        const LayerStats& r =
            depth_match ? receiver.per_layer.at(layer_index) : receiver_pooled;
        out.layers[i].key = calibrate(out.layers[i].key, s.mu_k, s.sigma_k, r.mu_k, r.sigma_k);
        out.layers[i].value =
            calibrate(out.layers[i].value, s.mu_v, s.sigma_v, r.mu_v, r.sigma_v);
    }
    return out;
}

namespace {

void write_stats_vector(ByteWriter& w, const std::vector<float>& v) {
    if (v.size() > 0xffff)
        throw WireError(WireCode::UnrepresentableField, "stats vector exceeds 65535 entries");
    w.u16(uint16_t(v.size()));
    for (float x : v) w.f32(x);
}

std::vector<float> read_stats_vector(ByteReader& r) {
    const uint16_t n = r.u16();
    if (r.remaining() < size_t(n) * 4)
        throw WireError(WireCode::Truncated, "profile stats vector truncated");
    std::vector<float> v(n);
    for (uint16_t i = 0; i < n; ++i) v[i] = r.f32();
    return v;
}

}  // namespace

std::vector<uint8_t> serialize_profile(const CalibrationProfile& profile) {
    profile.validate();
    if (profile.per_layer.size() > 0xffff)
        throw WireError(WireCode::UnrepresentableField, "profile exceeds 65535 layers");

    ByteWriter w;
    w.bytes(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(kProfileMagic), 4));
    w.u8(kProfileVersion);
    w.u8(uint8_t(profile.mode));
    w.str16(profile.model_id);
    w.u16(uint16_t(profile.per_layer.size()));
    for (const LayerStats& ls : profile.per_layer) {
        write_stats_vector(w, ls.mu_k);
        write_stats_vector(w, ls.sigma_k);
        write_stats_vector(w, ls.mu_v);
        write_stats_vector(w, ls.sigma_v);
    }
    return w.take();
}

CalibrationProfile deserialize_profile(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    if (r.remaining() < 4) throw WireError(WireCode::Truncated, "profile shorter than magic");
    const auto magic = r.bytes(4);
    if (std::memcmp(magic.data(), kProfileMagic, 4) != 0)
        throw WireError(WireCode::BadMagic, "not a calibration profile");
    const uint8_t version = r.u8();
    if (version != kProfileVersion)
        throw WireError(WireCode::UnsupportedVersion, "unsupported profile version");
    const uint8_t mode_byte = r.u8();
    if (mode_byte > 1) throw WireError(WireCode::MalformedLength, "unknown calibration mode");

    CalibrationProfile profile;
    profile.mode = CalibrationMode(mode_byte);
    profile.model_id = r.str16();
    const uint16_t num_layers = r.u16();
    profile.per_layer.resize(num_layers);
    for (uint16_t l = 0; l < num_layers; ++l) {
        profile.per_layer[l].mu_k = read_stats_vector(r);
        profile.per_layer[l].sigma_k = read_stats_vector(r);
        profile.per_layer[l].mu_v = read_stats_vector(r);
        profile.per_layer[l].sigma_v = read_stats_vector(r);
    }
    if (r.remaining() != 0)
        throw WireError(WireCode::MalformedLength, "trailing bytes after profile");
    profile.validate();
    return profile;
}

void save_profile(const CalibrationProfile& profile, const std::string& path) {
    const auto bytes = serialize_profile(profile);
    write_file(path, bytes);
}

CalibrationProfile load_profile(const std::string& path) {
    const auto bytes = read_file(path);
    return deserialize_profile(bytes);
}

}  // namespace qkvcomm
