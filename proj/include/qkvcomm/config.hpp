#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qkvcomm/layer_select.hpp"
#include "qkvcomm/memory_cache.hpp"
#include "qkvcomm/synthetic.hpp"

namespace qkvcomm {

// "key = value" lines, '#' comments, UTF-8, no sections. Unknown keys
// are rejected, values are type-checked on access.
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    uint64_t get_uint(const std::string& key, uint64_t fallback) const;
    std::vector<float> get_float_list(const std::string& key) const;  // comma-separated

    SelectionConfig selection() const;
    BitTriple bits() const;
    int probe_bits() const;
    size_t facts_budget() const;
    SyntheticSpec synthetic_spec() const;

    uint64_t cache_capacity_bytes() const;
    double eviction_threshold() const;
    std::string spill_dir() const;

    std::optional<std::string> sender_profile_path() const;
    std::optional<std::string> receiver_profile_path() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace qkvcomm
