#include "qkvcomm/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "qkvcomm/errors.hpp"
#include "qkvcomm/quantize.hpp"

namespace qkvcomm {

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        // layer selection
        "alpha", "gamma_mu", "gamma_sigma", "layer_ratio",
        // quantizer
        "max_bits", "target_bits", "min_bits", "probe_bits",
        // memory
        "cache_capacity_bytes", "eviction_threshold", "spill_dir",
        // pipeline
        "facts_budget", "sender_profile", "receiver_profile",
        // synthetic spec
        "num_layers", "num_heads", "seq_len", "head_dim", "seed", "model_id",
        "per_layer_mean", "per_layer_std",
    };
    return keys;
}

std::string trim(const std::string& s) {
    size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

Config Config::parse(const std::string& text) {
    Config config;
    std::istringstream stream(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;

        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidArgument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw InvalidArgument("config line " + std::to_string(line_no) + ": empty key");
        if (known_keys().count(key) == 0)
            throw InvalidArgument("config line " + std::to_string(line_no) + ": unknown key '" +
                                  key + "'");
        config.values_[key] = value;
    }
    return config;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t consumed = 0;
        const double v = std::stod(it->second, &consumed);
        if (consumed != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw InvalidArgument("config key '" + key + "': not a number: " + it->second);
    }
}

int64_t Config::get_int(const std::string& key, int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    int64_t v = 0;
    const auto [ptr, ec] =
        std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc() || ptr != it->second.data() + it->second.size())
        throw InvalidArgument("config key '" + key + "': not an integer: " + it->second);
    return v;
}

uint64_t Config::get_uint(const std::string& key, uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    uint64_t v = 0;
    const auto [ptr, ec] =
        std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc() || ptr != it->second.data() + it->second.size())
        throw InvalidArgument("config key '" + key + "': not an unsigned integer: " + it->second);
    return v;
}

std::vector<float> Config::get_float_list(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return {};
    std::vector<float> out;
    std::istringstream stream(it->second);
    std::string item;
    while (std::getline(stream, item, ',')) {
        item = trim(item);
        if (item.empty())
            throw InvalidArgument("config key '" + key + "': empty list element");
        try {
            size_t consumed = 0;
            out.push_back(std::stof(item, &consumed));
            if (consumed != item.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw InvalidArgument("config key '" + key + "': not a number: " + item);
        }
    }
    return out;
}

SelectionConfig Config::selection() const {
    SelectionConfig cfg;
    cfg.alpha = get_double("alpha", cfg.alpha);
    cfg.gamma_mu = get_double("gamma_mu", cfg.gamma_mu);
    cfg.gamma_sigma = get_double("gamma_sigma", cfg.gamma_sigma);
    cfg.ratio = get_double("layer_ratio", cfg.ratio);
    cfg.validate();
    return cfg;
}

BitTriple Config::bits() const {
    BitTriple bits;
    bits.max_bits = int(get_int("max_bits", bits.max_bits));
    bits.target_bits = int(get_int("target_bits", bits.target_bits));
    bits.min_bits = int(get_int("min_bits", bits.min_bits));
    if (bits.min_bits < kMinQuantBits || bits.max_bits > kMaxQuantBits ||
        !(bits.min_bits <= bits.target_bits && bits.target_bits <= bits.max_bits))
        throw InvalidArgument("config: need 2 <= min_bits <= target_bits <= max_bits <= 8");
    return bits;
}

int Config::probe_bits() const {
    const int probe = int(get_int("probe_bits", bits().min_bits));
    if (probe < kMinQuantBits || probe > kMaxQuantBits)
        throw InvalidArgument("config: probe_bits must be in [2,8]");
    return probe;
}

size_t Config::facts_budget() const {
    const int64_t budget = get_int("facts_budget", 16);
    if (budget < 1) throw InvalidArgument("config: facts_budget must be >= 1");
    return size_t(budget);
}

SyntheticSpec Config::synthetic_spec() const {
    SyntheticSpec spec;
    spec.num_layers = uint32_t(get_uint("num_layers", 0));
    spec.num_heads = uint32_t(get_uint("num_heads", 0));
    spec.seq_len = uint32_t(get_uint("seq_len", 0));
    spec.head_dim = uint32_t(get_uint("head_dim", 0));
    spec.seed = get_uint("seed", 0);
    spec.model_id = get_string("model_id", "synthetic");
    spec.per_layer_mean = get_float_list("per_layer_mean");
    spec.per_layer_std = get_float_list("per_layer_std");
    if (spec.per_layer_mean.empty())
        spec.per_layer_mean.assign(spec.num_layers, 0.0f);
    if (spec.per_layer_std.empty())
        spec.per_layer_std.assign(spec.num_layers, 1.0f);
    spec.validate();
    return spec;
}

uint64_t Config::cache_capacity_bytes() const { return get_uint("cache_capacity_bytes", 0); }

double Config::eviction_threshold() const { return get_double("eviction_threshold", 0.8); }

std::string Config::spill_dir() const { return get_string("spill_dir", ""); }

std::optional<std::string> Config::sender_profile_path() const {
    if (!has("sender_profile")) return std::nullopt;
    return get_string("sender_profile", "");
}

std::optional<std::string> Config::receiver_profile_path() const {
    if (!has("receiver_profile")) return std::nullopt;
    return get_string("receiver_profile", "");
}

}  // namespace qkvcomm
