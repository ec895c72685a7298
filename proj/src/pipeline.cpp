#include "qkvcomm/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include "qkvcomm/bytes.hpp"
#include "qkvcomm/errors.hpp"

namespace qkvcomm {

void SenderConfig::validate() const {
    selection.validate();
    if (bits.min_bits < kMinQuantBits || bits.max_bits > kMaxQuantBits ||
        !(bits.min_bits <= bits.target_bits && bits.target_bits <= bits.max_bits))
        throw InvalidArgument("sender config: invalid bit triple");
    if (facts_budget == 0) throw InvalidArgument("sender config: facts budget must be >= 1");
}

namespace {

std::vector<Fact> facts_for_context(const std::string& context_text, const SenderConfig& cfg) {
    if (context_text.empty()) return {};
    if (cfg.fact_cache == nullptr) return extract_facts(context_text, cfg.facts_budget);

    const uint64_t key = content_hash(context_text) ^
                         (uint64_t(cfg.facts_budget) * 0x9e3779b97f4a7c15ull);
    if (auto cached = cfg.fact_cache->get(key)) {
        ByteReader r{std::span<const uint8_t>(*cached)};
        const uint16_t count = r.u16();
        std::vector<Fact> facts(count);
        for (Fact& f : facts) {
            f.kind = FactKind(r.u8());
            f.confidence = r.f32();
            f.content = r.str16();
            const uint8_t meta = r.u8();
            for (uint8_t m = 0; m < meta; ++m) {
                std::string k = r.str16();
                std::string v = r.str16();
                f.metadata.emplace_back(std::move(k), std::move(v));
            }
        }
        return facts;
    }

    std::vector<Fact> facts = extract_facts(context_text, cfg.facts_budget);
    ByteWriter w;
    w.u16(uint16_t(facts.size()));
    for (const Fact& f : facts) {
        w.u8(uint8_t(f.kind));
        w.f32(f.confidence);
        w.str16(f.content);
        w.u8(uint8_t(f.metadata.size()));
        for (const auto& [k, v] : f.metadata) {
            w.str16(k);
            w.str16(v);
        }
    }
    if (w.size() <= cfg.fact_cache->capacity_bytes()) cfg.fact_cache->put(key, w.take());
    return facts;
}

}  // namespace

Payload build_payload(const KvCache& cache, const AttentionMap& attention,
                      const std::string& context_text, const SenderConfig& cfg,
                      TransferReport* report) {
    cfg.validate();
    cache.validate();
    attention.validate();
    if (cache.layers.empty()) throw InvalidArgument("build_payload: empty cache");
    if (!cache.is_dense())
        throw InvalidArgument("build_payload: sender cache must be dense");
    if (attention.num_layers != cache.num_layers() ||
        attention.num_heads != cache.layers.front().key.heads() ||
        attention.num_positions != cache.layers.front().key.seq_len())
        throw InvalidArgument("build_payload: attention dimensions do not match cache");
    if (cache.num_layers() > 0xffff)
        throw WireError(WireCode::UnrepresentableField, "more than 65535 layers");

    const LayerScores scores = score_layers(attention, cfg.selection);
    const std::vector<size_t> selected = select_layers(scores.combined, cfg.selection.ratio);

    std::vector<Fact> facts = facts_for_context(context_text, cfg);

    // Sensitivity buckets span all layers; the selected subset keeps its
    // globally assigned widths.
    const SensitivityReport sensitivity = profile_sensitivity({cache}, cfg.bits.min_bits);
    const BitAllocation allocation =
        allocate_bits(sensitivity, cfg.bits.max_bits, cfg.bits.target_bits, cfg.bits.min_bits);

    Payload payload;
    payload.header.flags = 0;
    if (!facts.empty()) payload.header.flags |= kFlagFactsPresent;
    payload.header.sender_model_id = cache.model_id;
    payload.header.total_layers = uint16_t(cache.num_layers());
    payload.header.selected_layers = uint16_t(selected.size());
    payload.header.original_seq_len = cache.layers.front().key.seq_len();
    payload.facts = std::move(facts);

    std::vector<int> per_layer_bits;
    for (size_t index : selected) {
        const int bits = allocation.per_layer_bits[index];
        PayloadLayer layer;
        layer.layer_index = uint16_t(index);
        layer.packed_key = pack_tensor(quantize(cache.layers[index].key, bits));
        layer.packed_value = pack_tensor(quantize(cache.layers[index].value, bits));
        payload.layers.push_back(std::move(layer));
        per_layer_bits.push_back(bits);
    }

    if (report != nullptr) {
        const uint64_t numel = cache.layers.front().key.numel();
        report->original_bytes = uint64_t(cache.num_layers()) * 2 * numel * sizeof(float);
        report->selected_layers = selected.size();
        report->selected_indices = selected;
        report->per_layer_bits = std::move(per_layer_bits);
    }
    return payload;
}

TransferReport send(const KvCache& cache, const AttentionMap& attention,
                    const std::string& context_text, const SenderConfig& cfg,
                    Transport& transport) {
    const auto start = std::chrono::steady_clock::now();

    TransferReport report;
    const Payload payload = build_payload(cache, attention, context_text, cfg, &report);
    const std::vector<uint8_t> bytes = serialize(payload);
    transport.send_frame(bytes);

    report.payload_bytes = bytes.size();
    report.compression_ratio = double(report.original_bytes) / double(report.payload_bytes);
    report.elapsed = std::chrono::steady_clock::now() - start;
    return report;
}

ReceiveResult decode_payload(const Payload& payload,
                             const std::optional<CalibrationProfile>& receiver_profile,
                             const std::optional<CalibrationProfile>& sender_profile) {
    ReceiveResult result;
    result.payload = payload;
    result.facts = payload.facts;
    result.facts_summary = format_facts_summary(result.facts);

    result.cache.model_id = payload.header.sender_model_id;
    for (const PayloadLayer& layer : payload.layers) {
        LayerKv kv;
        kv.key = dequantize(unpack_tensor(layer.packed_key));
        kv.value = dequantize(unpack_tensor(layer.packed_value));
        result.cache.layers.push_back(std::move(kv));
        result.cache.layer_indices.push_back(layer.layer_index);
    }

    const bool already_calibrated = payload.header.flags & kFlagCalibrationApplied;
    if (receiver_profile && sender_profile && !already_calibrated)
        result.cache = calibrate_cache(result.cache, *sender_profile, *receiver_profile);
    return result;
}

ReceiveResult receive(Transport& transport,
                      const std::optional<CalibrationProfile>& receiver_profile,
                      const std::optional<CalibrationProfile>& sender_profile) {
    const auto frame = transport.recv_frame();
    if (!frame) throw TransportError("no frame available");
    const Payload payload = deserialize(std::span<const uint8_t>(*frame));
    return decode_payload(payload, receiver_profile, sender_profile);
}

KvCache integrate(const KvCache& sender_cache, const KvCache& receiver_cache) {
    receiver_cache.validate();
    if (sender_cache.layers.empty()) return receiver_cache;
    sender_cache.validate();

    const Tensor& sender_first = sender_cache.layers.front().key;
    const Tensor& receiver_first = receiver_cache.layers.front().key;
    if (sender_first.batch() != receiver_first.batch() ||
        sender_first.heads() != receiver_first.heads() ||
        sender_first.head_dim() != receiver_first.head_dim())
        throw InvalidArgument("integrate: batch/heads/head_dim mismatch");
    for (uint16_t index : sender_cache.layer_indices) {
        if (index >= receiver_cache.num_layers())
            throw InvalidArgument("integrate: sender layer index outside receiver depth");
    }

    auto concat_seq = [](const Tensor& front, const Tensor& back) {
        Tensor out;
        out.shape = {front.batch(), front.heads(), front.seq_len() + back.seq_len(),
                     front.head_dim()};
        out.data.reserve(out.numel());
        const size_t front_block = size_t(front.seq_len()) * front.head_dim();
        const size_t back_block = size_t(back.seq_len()) * back.head_dim();
        for (uint32_t b = 0; b < front.batch(); ++b) {
            for (uint32_t h = 0; h < front.heads(); ++h) {
                const size_t slice = size_t(b) * front.heads() + h;
                const float* f = front.data.data() + slice * front_block;
                const float* k = back.data.data() + slice * back_block;
                out.data.insert(out.data.end(), f, f + front_block);
                out.data.insert(out.data.end(), k, k + back_block);
            }
        }
        return out;
    };

    KvCache out = receiver_cache;
    for (size_t i = 0; i < sender_cache.layers.size(); ++i) {
        const uint16_t index = sender_cache.layer_indices[i];
        out.layers[index].key = concat_seq(sender_cache.layers[i].key, out.layers[index].key);
        out.layers[index].value =
            concat_seq(sender_cache.layers[i].value, out.layers[index].value);
    }
    return out;
}

std::vector<TransferReport> run_benchmark(const SyntheticSpec& spec,
                                          const std::vector<SenderConfig>& sweep) {
    if (sweep.empty()) throw InvalidArgument("run_benchmark: empty sweep");

    const KvCache cache = generate_cache(spec);
    const AttentionMap attention = generate_attention(cache, spec.seed ^ 0xa77e11710full);

    std::vector<TransferReport> reports;
    reports.reserve(sweep.size());
    for (const SenderConfig& cfg : sweep) {
        InMemoryTransport transport;
        TransferReport report = send(cache, attention, "", cfg, transport);
        const ReceiveResult received = receive(transport);

        double error_sum = 0.0;
        uint64_t error_count = 0;
        for (size_t i = 0; i < received.cache.layers.size(); ++i) {
            const size_t index = received.cache.layer_indices[i];
            for (const auto& [original, reconstructed] :
                 {std::pair{&cache.layers[index].key, &received.cache.layers[i].key},
                  std::pair{&cache.layers[index].value, &received.cache.layers[i].value}}) {
                for (size_t e = 0; e < original->data.size(); ++e) {
                    const double d =
                        double(original->data[e]) - double(reconstructed->data[e]);
                    error_sum += d * d;
                }
                error_count += original->data.size();
            }
        }
        report.reconstruction_mse = error_count > 0 ? error_sum / double(error_count) : 0.0;
        reports.push_back(std::move(report));
    }
    return reports;
}

}  // namespace qkvcomm
