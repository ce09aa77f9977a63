#pragma once

#include <cstdint>
#include <string>

#include "adnet/graph.hpp"

namespace adnet {

// Weights container, little-endian throughout:
//   magic "ADNW" | u32 version | u8 flags (bit0: training checkpoint)
//   u32 fingerprint length | fingerprint bytes
//   u32 record count
//   records: u32 name length | name | u8 dtype (0=f32,1=f64) | u8 rank
//            | u64 extents[rank] | row-major payload
//   u32 CRC-32 of everything before it
// Checkpoint files carry "<name>.adam_m"/"<name>.adam_v" records per
// trainable entry plus an "optim.step" scalar.
inline constexpr std::uint32_t kWeightsVersion = 1;

struct WeightsMeta {
    std::uint32_t version = kWeightsVersion;
    bool checkpoint = false;
    std::string fingerprint;
};

template <typename T>
struct LoadedWeights {
    ParamStore<T> store;
    WeightsMeta meta;
    std::uint64_t adam_steps = 0;
};

template <typename T>
void save_weights(const std::string& path, const ParamStore<T>& store,
                  const std::string& fingerprint, bool checkpoint = false,
                  std::uint64_t adam_steps = 0);

// Header only: enough to pick a precision and verify compatibility before
// paying for the full payload read.
WeightsMeta peek_weights(const std::string& path);

// Full load. Validates magic/version/checksum over the whole file before any
// record is interpreted; a truncated or corrupted file never yields a store.
template <typename T>
LoadedWeights<T> load_weights(const std::string& path);

// Precision recorded in a fingerprint string, or 0 when absent.
int fingerprint_precision(const std::string& fingerprint);

std::uint32_t crc32_ieee(const std::uint8_t* data, std::size_t size);

} // namespace adnet
