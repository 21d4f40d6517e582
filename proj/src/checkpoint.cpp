#include "repeatnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <unordered_map>

namespace repeatnet {

namespace {

constexpr char kMagic[4] = {'R', 'P', 'N', 'T'};

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError("checkpoint: truncated file");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

std::vector<uint8_t> pack_sign_bits(const float* latent, int64_t n) {
    std::vector<uint8_t> packed(static_cast<size_t>((n + 7) / 8), 0);
    for (int64_t i = 0; i < n; ++i)
        if (latent[i] < 0.0f) packed[static_cast<size_t>(i / 8)] |= static_cast<uint8_t>(1u << (i % 8));
    return packed;
}

void unpack_sign_bits(const std::vector<uint8_t>& packed, int64_t n, float* latent_out) {
    if (static_cast<int64_t>(packed.size()) != (n + 7) / 8)
        throw DataError("checkpoint: packed mask size mismatch");
    for (int64_t i = 0; i < n; ++i) {
        const bool bit = (packed[static_cast<size_t>(i / 8)] >> (i % 8)) & 1u;
        latent_out[i] = bit ? -0.5f : 0.5f;
    }
}

void write_checkpoint(const std::string& path, const std::vector<NamedParam<float>>& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    put_u32(os, kCheckpointVersion);
    for (const auto& p : params) {
        put_u32(os, static_cast<uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        os.put(static_cast<char>(p.sign_bits ? DtypeTag::bits : DtypeTag::f32));
        os.put(static_cast<char>(p.tensor->ndim()));
        for (int d : p.tensor->shape) put_u32(os, static_cast<uint32_t>(d));
        if (p.sign_bits) {
            const auto packed = pack_sign_bits(p.tensor->data.data(), p.tensor->numel());
            os.write(reinterpret_cast<const char*>(packed.data()),
                     static_cast<std::streamsize>(packed.size()));
        } else {
            os.write(reinterpret_cast<const char*>(p.tensor->data.data()),
                     static_cast<std::streamsize>(p.tensor->numel() * sizeof(float)));
        }
    }
    if (!os) throw DataError("checkpoint: write failed for '" + path + "'");
}

std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("checkpoint: bad magic in '" + path + "'");
    const uint32_t version = get_u32(is);
    if (version != kCheckpointVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));

    std::vector<CheckpointEntry> entries;
    while (true) {
        is.peek();
        if (is.eof()) break;
        CheckpointEntry e;
        const uint32_t name_len = get_u32(is);
        e.name.resize(name_len);
        if (!is.read(e.name.data(), name_len)) throw DataError("checkpoint: truncated name");
        int dtype = is.get();
        int ndim = is.get();
        if (dtype < 0 || ndim < 0) throw DataError("checkpoint: truncated header");
        if (dtype > 2) throw DataError("checkpoint: unknown dtype tag " + std::to_string(dtype));
        e.dtype = static_cast<DtypeTag>(dtype);
        int64_t numel = 1;
        for (int i = 0; i < ndim; ++i) {
            const uint32_t d = get_u32(is);
            e.shape.push_back(static_cast<int>(d));
            numel *= d;
        }
        switch (e.dtype) {
            case DtypeTag::f32:
                e.f32.resize(static_cast<size_t>(numel));
                if (!is.read(reinterpret_cast<char*>(e.f32.data()),
                             static_cast<std::streamsize>(numel * sizeof(float))))
                    throw DataError("checkpoint: truncated payload for '" + e.name + "'");
                break;
            case DtypeTag::f64:
                e.f64.resize(static_cast<size_t>(numel));
                if (!is.read(reinterpret_cast<char*>(e.f64.data()),
                             static_cast<std::streamsize>(numel * sizeof(double))))
                    throw DataError("checkpoint: truncated payload for '" + e.name + "'");
                break;
            case DtypeTag::bits:
                e.packed.resize(static_cast<size_t>((numel + 7) / 8));
                if (!is.read(reinterpret_cast<char*>(e.packed.data()),
                             static_cast<std::streamsize>(e.packed.size())))
                    throw DataError("checkpoint: truncated mask for '" + e.name + "'");
                break;
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

void load_checkpoint(const std::string& path, const std::vector<NamedParam<float>>& params) {
    auto entries = read_checkpoint(path);
    std::unordered_map<std::string, const CheckpointEntry*> by_name;
    for (const auto& e : entries) by_name[e.name] = &e;
    for (const auto& p : params) {
        auto it = by_name.find(p.name);
        if (it == by_name.end())
            throw DataError("checkpoint: missing parameter '" + p.name + "'");
        const CheckpointEntry& e = *it->second;
        if (e.shape != p.tensor->shape)
            throw DataError("checkpoint: shape mismatch for '" + p.name + "': file " +
                            shape_str(e.shape) + " vs model " + shape_str(p.tensor->shape));
        if (p.sign_bits) {
            if (e.dtype != DtypeTag::bits)
                throw DataError("checkpoint: '" + p.name + "' is not a bit mask");
            unpack_sign_bits(e.packed, p.tensor->numel(), p.tensor->data.data());
        } else {
            if (e.dtype != DtypeTag::f32)
                throw DataError("checkpoint: '" + p.name + "' has unexpected dtype");
            p.tensor->data = e.f32;
        }
    }
}

}  // namespace repeatnet
