#pragma once

#include <span>
#include <string>
#include <vector>

#include "qkvcomm/tensor.hpp"

namespace qkvcomm {

// "QKVT" cache container: magic, version u8, model_id str16,
// total_layers u16, stored_layers u16, stored layer indices u16 each,
// shape 4xu32, then per stored layer the K and V tensors as raw
// little-endian fp32. total_layers records the depth of the originating
// model so sparse caches stay self-describing.
std::vector<uint8_t> serialize_cache(const KvCache& cache, uint16_t total_layers);
KvCache deserialize_cache(std::span<const uint8_t> bytes, uint16_t* total_layers = nullptr);

void save_cache(const KvCache& cache, const std::string& path, uint16_t total_layers = 0);
KvCache load_cache(const std::string& path, uint16_t* total_layers = nullptr);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const uint8_t> bytes);

}  // namespace qkvcomm
