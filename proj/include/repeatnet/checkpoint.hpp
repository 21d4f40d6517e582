#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "repeatnet/network.hpp"

namespace repeatnet {

// Binary checkpoint: magic "RPNT", version u32, then one record per named
// parameter: name length u32, name bytes, dtype tag u8, ndim u8, extents u32
// each, then the payload (raw little-endian scalars, or a bit-packed mask for
// sign-bit entries: 8 bits per byte, row-major, LSB first, padded to a byte).
inline constexpr uint32_t kCheckpointVersion = 1;

enum class DtypeTag : uint8_t { f32 = 0, f64 = 1, bits = 2 };

struct CheckpointEntry {
    std::string name;
    DtypeTag dtype = DtypeTag::f32;
    std::vector<int> shape;
    std::vector<float> f32;
    std::vector<double> f64;
    std::vector<uint8_t> packed;
};

// bit b = (latent < 0); bit 1 means the weight is negated
std::vector<uint8_t> pack_sign_bits(const float* latent, int64_t n);
// reconstructs latents as +/-0.5 (magnitudes are not persisted)
void unpack_sign_bits(const std::vector<uint8_t>& packed, int64_t n, float* latent_out);

void write_checkpoint(const std::string& path, const std::vector<NamedParam<float>>& params);
std::vector<CheckpointEntry> read_checkpoint(const std::string& path);
// loads by name into an existing parameter set; shapes must match
void load_checkpoint(const std::string& path, const std::vector<NamedParam<float>>& params);

}  // namespace repeatnet
