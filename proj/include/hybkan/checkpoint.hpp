#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hybkan/tensor.hpp"

namespace hybkan {

struct CheckpointMagicError : std::runtime_error {
    explicit CheckpointMagicError(const std::string& m) : std::runtime_error(m) {}
};
struct CheckpointVersionError : std::runtime_error {
    explicit CheckpointVersionError(const std::string& m) : std::runtime_error(m) {}
};
struct CheckpointShapeError : std::runtime_error {
    explicit CheckpointShapeError(const std::string& m) : std::runtime_error(m) {}
};

inline constexpr char kCheckpointMagic[8] = {'H', 'Y', 'B', 'K', 'A', 'N', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// One serialized tensor: name, dtype code (1 = f32, 2 = f64), shape, and the
// raw little-endian payload.
struct TensorRecord {
    std::string name;
    std::uint8_t dtype = 0;
    std::vector<std::uint64_t> shape;
    std::vector<unsigned char> payload;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (auto d : shape) n *= static_cast<std::size_t>(d);
        return shape.empty() ? 0 : n;
    }
};

struct CheckpointData {
    std::vector<std::pair<std::string, std::string>> manifest;  // ordered UTF-8 key/value
    std::vector<TensorRecord> tensors;

    const std::string* find(const std::string& key) const {
        for (const auto& kv : manifest)
            if (kv.first == key) return &kv.second;
        return nullptr;
    }
    const TensorRecord* find_tensor(const std::string& name) const {
        for (const auto& t : tensors)
            if (t.name == name) return &t;
        return nullptr;
    }
};

namespace detail {

// Serialization is explicit little-endian byte order regardless of host.
inline void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_str(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError("checkpoint truncated while reading u32");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw FormatError("checkpoint truncated while reading u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

inline std::string get_str(std::istream& in) {
    const std::uint32_t n = get_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw FormatError("checkpoint truncated while reading string");
    return s;
}

template <typename T>
void encode_payload(const T* src, std::size_t count, std::vector<unsigned char>& out) {
    out.resize(count * sizeof(T));
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        static_assert(sizeof(T) == 4 || sizeof(T) == 8);
        if constexpr (sizeof(T) == 4) {
            std::uint32_t b32;
            std::memcpy(&b32, &src[i], 4);
            bits = b32;
        } else {
            std::memcpy(&bits, &src[i], 8);
        }
        for (std::size_t k = 0; k < sizeof(T); ++k)
            out[i * sizeof(T) + k] = static_cast<unsigned char>(bits >> (8 * k));
    }
}

template <typename T>
void decode_payload(const std::vector<unsigned char>& in, T* dst, std::size_t count) {
    if (in.size() != count * sizeof(T)) throw FormatError("checkpoint payload size mismatch");
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        for (std::size_t k = 0; k < sizeof(T); ++k)
            bits |= std::uint64_t(in[i * sizeof(T) + k]) << (8 * k);
        if constexpr (sizeof(T) == 4) {
            const std::uint32_t b32 = static_cast<std::uint32_t>(bits);
            std::memcpy(&dst[i], &b32, 4);
        } else {
            std::memcpy(&dst[i], &bits, 8);
        }
    }
}

}  // namespace detail

template <typename T>
constexpr std::uint8_t dtype_code() {
    return sizeof(T) == 4 ? 1 : 2;
}

inline void checkpoint_write(const std::string& path, const CheckpointData& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out.write(kCheckpointMagic, 8);
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(ckpt.manifest.size()));
    for (const auto& [k, v] : ckpt.manifest) {
        detail::put_str(out, k);
        detail::put_str(out, v);
    }
    detail::put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
        detail::put_str(out, t.name);
        out.put(static_cast<char>(t.dtype));
        detail::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) detail::put_u64(out, d);
        detail::put_u64(out, t.payload.size());
        out.write(reinterpret_cast<const char*>(t.payload.data()),
                  static_cast<std::streamsize>(t.payload.size()));
    }
    if (!out) throw std::runtime_error("I/O failure writing checkpoint " + path);
}

inline CheckpointData checkpoint_read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw CheckpointMagicError("bad checkpoint magic in " + path);
    const std::uint32_t version = detail::get_u32(in);
    if (version != kCheckpointVersion)
        throw CheckpointVersionError("checkpoint version " + std::to_string(version) +
                                     ", expected " + std::to_string(kCheckpointVersion));
    CheckpointData ckpt;
    const std::uint32_t n_manifest = detail::get_u32(in);
    for (std::uint32_t i = 0; i < n_manifest; ++i) {
        std::string k = detail::get_str(in);
        std::string v = detail::get_str(in);
        ckpt.manifest.emplace_back(std::move(k), std::move(v));
    }
    const std::uint32_t n_tensors = detail::get_u32(in);
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        TensorRecord t;
        t.name = detail::get_str(in);
        int dt = in.get();
        if (dt == EOF) throw FormatError("checkpoint truncated at tensor dtype");
        t.dtype = static_cast<std::uint8_t>(dt);
        const std::uint32_t nd = detail::get_u32(in);
        t.shape.resize(nd);
        for (std::uint32_t d = 0; d < nd; ++d) t.shape[d] = detail::get_u64(in);
        const std::uint64_t bytes = detail::get_u64(in);
        t.payload.resize(static_cast<std::size_t>(bytes));
        in.read(reinterpret_cast<char*>(t.payload.data()), static_cast<std::streamsize>(bytes));
        if (!in) throw FormatError("checkpoint truncated in tensor payload " + t.name);
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

}  // namespace hybkan
