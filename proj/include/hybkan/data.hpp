#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybkan/tensor.hpp"

namespace hybkan {

// Truncated or length-inconsistent input file.
struct LengthError : std::runtime_error {
    explicit LengthError(const std::string& m) : std::runtime_error(m) {}
};

template <typename T>
struct Dataset {
    std::size_t channels = 1, height = 0, width = 0, num_classes = 0;
    std::vector<Tensor<T>> images;  // each flattened C·H·W
    std::vector<int> labels;

    std::size_t size() const { return images.size(); }
    std::size_t image_dim() const { return channels * height * width; }
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw LengthError("truncated header while reading " + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline std::ifstream open_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return in;
}

}  // namespace detail

// IDX image + label pair (big-endian headers, magic 2051 / 2049).
// Pixels decode to [0,1], then standardize with (x - mean) / stddev.
template <typename T>
Dataset<T> load_mnist(const std::string& image_path, const std::string& label_path,
                      double mean = 0.1307, double stddev = 0.3081) {
    std::ifstream img = detail::open_binary(image_path);
    const std::uint32_t magic_i = detail::read_be32(img, "image magic");
    if (magic_i != 2051)
        throw FormatError("IDX image magic " + std::to_string(magic_i) + ", expected 2051");
    const std::uint32_t n = detail::read_be32(img, "image count");
    const std::uint32_t rows = detail::read_be32(img, "rows");
    const std::uint32_t cols = detail::read_be32(img, "cols");

    std::ifstream lab = detail::open_binary(label_path);
    const std::uint32_t magic_l = detail::read_be32(lab, "label magic");
    if (magic_l != 2049)
        throw FormatError("IDX label magic " + std::to_string(magic_l) + ", expected 2049");
    const std::uint32_t nl = detail::read_be32(lab, "label count");
    if (nl != n) throw LengthError("IDX image/label count mismatch");

    Dataset<T> ds;
    ds.channels = 1;
    ds.height = rows;
    ds.width = cols;
    ds.num_classes = 10;
    ds.images.reserve(n);
    ds.labels.reserve(n);
    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
    for (std::uint32_t i = 0; i < n; ++i) {
        img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!img) throw LengthError("truncated IDX image file at record " + std::to_string(i));
        Tensor<T> t({buf.size()});
        for (std::size_t j = 0; j < buf.size(); ++j)
            t[j] = static_cast<T>((buf[j] / 255.0 - mean) / stddev);
        ds.images.push_back(std::move(t));
        char lb;
        lab.read(&lb, 1);
        if (!lab) throw LengthError("truncated IDX label file at record " + std::to_string(i));
        ds.labels.push_back(static_cast<int>(static_cast<unsigned char>(lb)));
    }
    return ds;
}

// CIFAR-10 binary batch: 3073-byte records, 1 label byte + 3072 CHW pixels.
template <typename T>
Dataset<T> load_cifar10(const std::vector<std::string>& batch_paths,
                        const std::vector<double>& mean = {0.4914, 0.4822, 0.4465},
                        const std::vector<double>& stddev = {0.2470, 0.2435, 0.2616}) {
    Dataset<T> ds;
    ds.channels = 3;
    ds.height = 32;
    ds.width = 32;
    ds.num_classes = 10;
    constexpr std::size_t record = 3073;
    for (const std::string& path : batch_paths) {
        std::ifstream in = detail::open_binary(path);
        in.seekg(0, std::ios::end);
        const std::size_t bytes = static_cast<std::size_t>(in.tellg());
        in.seekg(0, std::ios::beg);
        if (bytes % record != 0)
            throw LengthError("CIFAR-10 batch " + path + " is not a multiple of 3073 bytes");
        const std::size_t n = bytes / record;
        std::vector<unsigned char> buf(record);
        for (std::size_t i = 0; i < n; ++i) {
            in.read(reinterpret_cast<char*>(buf.data()), record);
            if (!in) throw LengthError("truncated CIFAR-10 record " + std::to_string(i));
            ds.labels.push_back(static_cast<int>(buf[0]));
            Tensor<T> t({std::size_t(3072)});
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t j = 0; j < 1024; ++j)
                    t[c * 1024 + j] =
                        static_cast<T>((buf[1 + c * 1024 + j] / 255.0 - mean[c]) / stddev[c]);
            ds.images.push_back(std::move(t));
        }
    }
    return ds;
}

// Horizontal flip (width axis) for CHW-flattened images; the only geometric
// augmentation used at desk scale.
template <typename T>
Tensor<T> hflip(const Tensor<T>& img, std::size_t channels, std::size_t height,
                std::size_t width) {
    Tensor<T> out(img.shape());
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x)
                out[(c * height + y) * width + x] = img[(c * height + y) * width + (width - 1 - x)];
    return out;
}

// Seeded two-class generator: class 0 = smooth low-frequency blobs, class 1 =
// high-frequency oriented stripes. The classes separate by spectral content,
// so multiresolution detail bands carry the discriminative signal.
template <typename T>
Dataset<T> make_synthetic(std::uint64_t seed, std::size_t n, std::size_t image_size = 16) {
    Rng rng(seed);
    Dataset<T> ds;
    ds.channels = 1;
    ds.height = image_size;
    ds.width = image_size;
    ds.num_classes = 2;
    ds.images.reserve(n);
    ds.labels.reserve(n);
    const double s = static_cast<double>(image_size);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(rng.uniform() < 0.5);
        Tensor<T> img({image_size * image_size});
        if (label == 0) {
            // One or two broad Gaussian bumps with random centers and signs.
            const int bumps = 1 + static_cast<int>(rng.uniform() < 0.5);
            std::vector<double> cx(bumps), cy(bumps), amp(bumps), rad(bumps);
            for (int b = 0; b < bumps; ++b) {
                cx[b] = rng.uniform(0.2, 0.8) * s;
                cy[b] = rng.uniform(0.2, 0.8) * s;
                amp[b] = rng.uniform(0.6, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
                rad[b] = rng.uniform(0.25, 0.45) * s;
            }
            for (std::size_t y = 0; y < image_size; ++y)
                for (std::size_t x = 0; x < image_size; ++x) {
                    double v = 0.0;
                    for (int b = 0; b < bumps; ++b) {
                        const double dx = (x - cx[b]) / rad[b], dy = (y - cy[b]) / rad[b];
                        v += amp[b] * std::exp(-0.5 * (dx * dx + dy * dy));
                    }
                    img[y * image_size + x] = static_cast<T>(v);
                }
        } else {
            // Stripes near the Nyquist band with a random orientation/phase.
            const double theta = rng.uniform(0.0, 3.14159265358979323846);
            const double freq = rng.uniform(0.35, 0.5) * 2.0 * 3.14159265358979323846;
            const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            const double amp = rng.uniform(0.6, 1.0);
            const double kx = freq * std::cos(theta), ky = freq * std::sin(theta);
            for (std::size_t y = 0; y < image_size; ++y)
                for (std::size_t x = 0; x < image_size; ++x)
                    img[y * image_size + x] =
                        static_cast<T>(amp * std::sin(kx * x + ky * y + phase));
        }
        // Mild pixel noise keeps the task non-degenerate without closing the margin.
        for (std::size_t j = 0; j < img.size(); ++j)
            img[j] += static_cast<T>(0.05 * rng.normal());
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
    }
    return ds;
}

}  // namespace hybkan
