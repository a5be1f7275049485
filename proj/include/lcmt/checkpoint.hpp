#pragma once

// Self-describing checkpoint container. Layout (all integers little-endian
// uint32, floats IEEE-754 binary32):
//   magic "LCMT" | version | config fields | n_params |
//   per parameter: name_len | name bytes | rank | dims... | f32 payload
// Parameters are written in name order (std::map), payloads row-major.
// Round trips are bit-exact in 32-bit mode; 64-bit parameters are rounded
// to f32 on save.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "lcmt/config.hpp"
#include "lcmt/error.hpp"
#include "lcmt/tensor.hpp"

namespace lcmt {

namespace ckpt_detail {

inline void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw DataError("checkpoint truncated");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

inline float get_f32(std::istream& is) {
    uint32_t bits = get_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace ckpt_detail

constexpr uint32_t kCheckpointVersion = 1;

template <class S>
void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const std::map<std::string, Tensor<S>>& params) {
    using namespace ckpt_detail;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write checkpoint: " + path);
    os.write("LCMT", 4);
    put_u32(os, kCheckpointVersion);
    put_u32(os, static_cast<uint32_t>(cfg.n_layers));
    put_u32(os, static_cast<uint32_t>(cfg.d_model));
    put_u32(os, static_cast<uint32_t>(cfg.d_ff));
    put_u32(os, static_cast<uint32_t>(cfg.n_heads));
    put_f32(os, static_cast<float>(cfg.dropout));
    put_f32(os, static_cast<float>(cfg.word_dropout));
    put_u32(os, static_cast<uint32_t>(cfg.max_seq_len));
    put_u32(os, static_cast<uint32_t>(cfg.max_len_index));
    put_u32(os, static_cast<uint32_t>(cfg.d_len));
    put_u32(os, static_cast<uint32_t>(cfg.vocab_size));
    put_u32(os, static_cast<uint32_t>(cfg.length_mode));
    put_u32(os, static_cast<uint32_t>(cfg.precision_bits));
    put_u32(os, static_cast<uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        put_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<uint32_t>(t.shape().size()));
        for (int d : t.shape()) put_u32(os, static_cast<uint32_t>(d));
        for (S v : t.value()) put_f32(os, static_cast<float>(v));
    }
    if (!os) throw DataError("write failed: " + path);
}

struct LoadedCheckpoint {
    ModelConfig config;
    std::map<std::string, Tensor<float>> params;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    using namespace ckpt_detail;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot read checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "LCMT", 4) != 0)
        throw DataError("not a checkpoint file: " + path);
    const uint32_t version = get_u32(is);
    if (version != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    LoadedCheckpoint out;
    ModelConfig& cfg = out.config;
    cfg.n_layers = static_cast<int>(get_u32(is));
    cfg.d_model = static_cast<int>(get_u32(is));
    cfg.d_ff = static_cast<int>(get_u32(is));
    cfg.n_heads = static_cast<int>(get_u32(is));
    cfg.dropout = get_f32(is);
    cfg.word_dropout = get_f32(is);
    cfg.max_seq_len = static_cast<int>(get_u32(is));
    cfg.max_len_index = static_cast<int>(get_u32(is));
    cfg.d_len = static_cast<int>(get_u32(is));
    cfg.vocab_size = static_cast<int>(get_u32(is));
    cfg.length_mode = static_cast<LengthMode>(get_u32(is));
    cfg.precision_bits = static_cast<int>(get_u32(is));
    const uint32_t n_params = get_u32(is);
    for (uint32_t i = 0; i < n_params; ++i) {
        const uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const uint32_t rank = get_u32(is);
        std::vector<int> shape(rank);
        int64_t n = 1;
        for (auto& d : shape) {
            d = static_cast<int>(get_u32(is));
            n *= d;
        }
        std::vector<float> data(static_cast<size_t>(n));
        for (auto& v : data) v = get_f32(is);
        if (!is) throw DataError("checkpoint truncated: " + path);
        out.params.emplace(std::move(name),
                           Tensor<float>::from(std::move(shape), std::move(data), true));
    }
    return out;
}

// cast a loaded f32 parameter map into the requested scalar type
template <class S>
std::map<std::string, Tensor<S>> cast_params(const std::map<std::string, Tensor<float>>& in) {
    std::map<std::string, Tensor<S>> out;
    for (const auto& [name, t] : in) {
        std::vector<S> data(t.value().size());
        for (size_t i = 0; i < data.size(); ++i) data[i] = static_cast<S>(t.value()[i]);
        out.emplace(name, Tensor<S>::from(t.shape(), std::move(data), true));
    }
    return out;
}

}  // namespace lcmt
