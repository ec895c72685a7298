#include "qkvcomm/memory_cache.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>

#include "qkvcomm/errors.hpp"

namespace qkvcomm {

uint64_t content_hash(std::span<const uint8_t> bytes) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t content_hash(const std::string& text) {
    return content_hash(
        std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

PressurePolicy PressurePolicy::defaults() {
    PressurePolicy policy;
    policy.bands = {
        {0.0, {8, 8, 6}},
        {0.5, {8, 6, 4}},
        {0.8, {6, 4, 2}},
    };
    return policy;
}

void PressurePolicy::validate() const {
    if (bands.empty()) throw InvalidArgument("pressure policy: no bands");
    for (size_t i = 0; i < bands.size(); ++i) {
        const BitTriple& b = bands[i].bits;
        if (!(b.min_bits <= b.target_bits && b.target_bits <= b.max_bits && b.min_bits >= 2 &&
              b.max_bits <= 8))
            throw InvalidArgument("pressure policy: invalid bit triple");
        if (i > 0 && !(bands[i].threshold > bands[i - 1].threshold))
            throw InvalidArgument("pressure policy: thresholds must be strictly increasing");
    }
}

BitTriple pressure_to_bits(double usage_fraction, const PressurePolicy& policy) {
    policy.validate();
    if (!(usage_fraction >= 0.0 && usage_fraction <= 1.0))
        throw InvalidArgument("pressure_to_bits: usage must be in [0,1]");

    // highest band whose threshold does not exceed the usage
    BitTriple selected = policy.bands.front().bits;
    for (const PressurePolicy::Band& band : policy.bands) {
        if (band.threshold <= usage_fraction) selected = band.bits;
    }
    return selected;
}

LruCache::LruCache(uint64_t capacity_bytes, double eviction_threshold, std::string spill_dir)
    : capacity_(capacity_bytes), threshold_(eviction_threshold), spill_dir_(std::move(spill_dir)) {
    if (capacity_ == 0) throw InvalidArgument("lru cache: capacity must be positive");
    if (!(threshold_ > 0.0 && threshold_ <= 1.0))
        throw InvalidArgument("lru cache: eviction threshold must be in (0,1]");
    if (!spill_dir_.empty()) std::filesystem::create_directories(spill_dir_);
}

void LruCache::put(uint64_t key, std::vector<uint8_t> value) {
    std::lock_guard lock(mutex_);
    const uint64_t size = value.size();
    if (size > capacity_) throw InvalidArgument("lru cache: entry exceeds capacity");

    auto it = entries_.find(key);
    if (it != entries_.end()) {
        if (it->second.location == Location::Memory) {
            used_ -= it->second.size;
        } else {
            std::remove(spill_path(key).c_str());
        }
        entries_.erase(it);
    }

    Entry e;
    e.key = key;
    e.size = size;
    e.last_access = ++access_counter_;
    e.location = Location::Memory;
    e.value = std::move(value);
    entries_.emplace(key, std::move(e));
    used_ += size;

    evict_until_under_threshold(key);
}

std::optional<std::vector<uint8_t>> LruCache::get(uint64_t key) {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;

    Entry& e = it->second;
    if (e.location == Location::Disk) {
        e.value = load_from_disk(e);
        e.location = Location::Memory;
        used_ += e.size;
        std::remove(spill_path(key).c_str());
    }
    e.last_access = ++access_counter_;
    std::vector<uint8_t> result = e.value;
    evict_until_under_threshold(key);
    return result;
}

uint64_t LruCache::used_bytes() const {
    std::lock_guard lock(mutex_);
    return used_;
}

double LruCache::usage_fraction() const {
    std::lock_guard lock(mutex_);
    return double(used_) / double(capacity_);
}

size_t LruCache::entry_count() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void LruCache::evict_until_under_threshold(uint64_t protected_key) {
    const double limit = threshold_ * double(capacity_);
    while (double(used_) > limit) {
        Entry* victim = nullptr;
        for (auto& [key, entry] : entries_) {
            if (entry.location != Location::Memory || key == protected_key) continue;
            if (victim == nullptr || entry.last_access < victim->last_access) victim = &entry;
        }
        if (victim == nullptr) break;  // only the protected entry remains resident

        if (spill_enabled()) {
            spill_to_disk(*victim);
            used_ -= victim->size;
            victim->location = Location::Disk;
            victim->value.clear();
            victim->value.shrink_to_fit();
        } else {
            used_ -= victim->size;
            entries_.erase(victim->key);
        }
    }
}

void LruCache::spill_to_disk(Entry& e) {
    const std::string path = spill_path(e.key);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("lru cache: cannot open spill file " + path);
    out.write(reinterpret_cast<const char*>(e.value.data()), std::streamsize(e.value.size()));
    if (!out) throw IoError("lru cache: short write to spill file " + path);
}

std::vector<uint8_t> LruCache::load_from_disk(const Entry& e) {
    const std::string path = spill_path(e.key);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("lru cache: cannot open spill file " + path);
    std::vector<uint8_t> bytes(e.size);
    in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(e.size));
    if (in.gcount() != std::streamsize(e.size))
        throw IoError("lru cache: short read from spill file " + path);
    return bytes;
}

std::string LruCache::spill_path(uint64_t key) const {
    char name[32];
    std::snprintf(name, sizeof(name), "%016llx.spill", static_cast<unsigned long long>(key));
    return spill_dir_ + "/" + name;
}

}  // namespace qkvcomm
