#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace qkvcomm {

// FNV-1a, 64-bit. Stable across runs; hash of the empty input is the
// FNV offset basis 0xcbf29ce484222325.
uint64_t content_hash(std::span<const uint8_t> bytes);
uint64_t content_hash(const std::string& text);

struct BitTriple {
    int max_bits = 8;
    int target_bits = 6;
    int min_bits = 4;

    bool operator==(const BitTriple&) const = default;
};

// Bands keyed by inclusive lower usage bound; the band with the highest
// bound <= usage applies. Defaults: <0.5 conservative, up to 0.8
// balanced, above that aggressive.
struct PressurePolicy {
    struct Band {
        double threshold;
        BitTriple bits;
    };
    std::vector<Band> bands;

    static PressurePolicy defaults();
    void validate() const;
};

BitTriple pressure_to_bits(double usage_fraction, const PressurePolicy& policy);

// Byte-budgeted LRU cache with an eviction threshold and optional disk
// spill. When usage exceeds threshold * capacity after an insert or a
// disk load, least-recently-accessed entries are evicted (to spill
// files when a directory is configured, dropped otherwise) until usage
// is back under the threshold. The entry just touched is never evicted
// by its own operation. All operations are serialized by one mutex.
class LruCache {
public:
    explicit LruCache(uint64_t capacity_bytes, double eviction_threshold = 0.8,
                      std::string spill_dir = "");

    void put(uint64_t key, std::vector<uint8_t> value);
    std::optional<std::vector<uint8_t>> get(uint64_t key);

    uint64_t used_bytes() const;
    uint64_t capacity_bytes() const noexcept { return capacity_; }
    double usage_fraction() const;
    size_t entry_count() const;
    bool spill_enabled() const noexcept { return !spill_dir_.empty(); }

private:
    enum class Location { Memory, Disk };

    struct Entry {
        uint64_t key = 0;
        uint64_t size = 0;
        uint64_t last_access = 0;
        Location location = Location::Memory;
        std::vector<uint8_t> value;  // empty while on disk
    };

    void evict_until_under_threshold(uint64_t protected_key);
    void spill_to_disk(Entry& e);
    std::vector<uint8_t> load_from_disk(const Entry& e);
    std::string spill_path(uint64_t key) const;

    mutable std::mutex mutex_;
    uint64_t capacity_;
    double threshold_;
    std::string spill_dir_;
    uint64_t used_ = 0;
    uint64_t access_counter_ = 0;
    std::unordered_map<uint64_t, Entry> entries_;
};

}  // namespace qkvcomm
