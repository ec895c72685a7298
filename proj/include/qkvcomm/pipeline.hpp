#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "qkvcomm/calibration.hpp"
#include "qkvcomm/layer_select.hpp"
#include "qkvcomm/memory_cache.hpp"
#include "qkvcomm/quantize.hpp"
#include "qkvcomm/synthetic.hpp"
#include "qkvcomm/transport.hpp"
#include "qkvcomm/wire.hpp"

namespace qkvcomm {

struct SenderConfig {
    SelectionConfig selection;
    BitTriple bits;
    size_t facts_budget = 16;
    // Sender-side profile, persisted next to payloads by the CLI so the
    // receiver can calibrate; transmitted out of band, not in the payload.
    std::optional<CalibrationProfile> calibration;
    // When set, extraction results are memoized by content hash.
    LruCache* fact_cache = nullptr;

    void validate() const;
};

struct TransferReport {
    uint64_t original_bytes = 0;  // full dense cache at fp32
    uint64_t payload_bytes = 0;   // serialized payload (frame body)
    double compression_ratio = 0.0;
    size_t selected_layers = 0;
    std::vector<size_t> selected_indices;
    std::vector<int> per_layer_bits;  // bits of each selected layer, ascending index
    double reconstruction_mse = 0.0;  // filled by run_benchmark
    std::chrono::duration<double, std::milli> elapsed{0.0};
};

// Builds the payload for one cache: hybrid layer selection, fact
// extraction from the context text, sensitivity-ranked bit allocation
// (buckets computed over all layers, then restricted to the selected
// set), quantization, packing and serialization.
Payload build_payload(const KvCache& cache, const AttentionMap& attention,
                      const std::string& context_text, const SenderConfig& cfg,
                      TransferReport* report = nullptr);

// build_payload + one length-prefixed frame on the transport.
TransferReport send(const KvCache& cache, const AttentionMap& attention,
                    const std::string& context_text, const SenderConfig& cfg,
                    Transport& transport);

struct ReceiveResult {
    KvCache cache;  // sparse: transmitted layers tagged with original indices
    std::vector<Fact> facts;
    std::string facts_summary;
    Payload payload;
};

// Reads one frame, deserializes, unpacks and dequantizes. When both
// profiles are given and the payload is not already calibrated, applies
// the distribution alignment per layer. Throws TransportError when no
// frame is available.
ReceiveResult receive(Transport& transport,
                      const std::optional<CalibrationProfile>& receiver_profile = std::nullopt,
                      const std::optional<CalibrationProfile>& sender_profile = std::nullopt);

ReceiveResult decode_payload(const Payload& payload,
                             const std::optional<CalibrationProfile>& receiver_profile,
                             const std::optional<CalibrationProfile>& sender_profile);

// Concatenates sender layers in front of the receiver's along the
// sequence axis; receiver layers without a sender counterpart pass
// through unchanged.
KvCache integrate(const KvCache& sender_cache, const KvCache& receiver_cache);

// send/receive over an in-memory transport for each config on the same
// generated cache; reports carry reconstruction MSE over transmitted
// layers. Deterministic given spec.seed (elapsed aside).
std::vector<TransferReport> run_benchmark(const SyntheticSpec& spec,
                                          const std::vector<SenderConfig>& sweep);

}  // namespace qkvcomm
