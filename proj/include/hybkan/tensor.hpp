#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cmath>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hybkan {

// ---------------------------------------------------------------------------
// Errors

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error("dimension error: " + msg) {}
};
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error("format error: " + msg) {}
};
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

// ---------------------------------------------------------------------------
// Allocation accounting. Every Tensor buffer goes through this allocator so
// benchmarks can report peak transient allocation without touching OS RSS.

struct AllocStats {
    static std::atomic<std::size_t>& current() {
        static std::atomic<std::size_t> c{0};
        return c;
    }
    static std::atomic<std::size_t>& peak() {
        static std::atomic<std::size_t> p{0};
        return p;
    }
    static void add(std::size_t bytes) {
        std::size_t now = current().fetch_add(bytes) + bytes;
        std::size_t prev = peak().load();
        while (prev < now && !peak().compare_exchange_weak(prev, now)) {}
    }
    static void sub(std::size_t bytes) { current().fetch_sub(bytes); }
    static void reset_peak() { peak().store(current().load()); }
};

template <typename T>
struct TrackingAllocator {
    using value_type = T;
    TrackingAllocator() = default;
    template <typename U>
    TrackingAllocator(const TrackingAllocator<U>&) {}
    T* allocate(std::size_t n) {
        AllocStats::add(n * sizeof(T));
        return static_cast<T*>(::operator new(n * sizeof(T)));
    }
    void deallocate(T* p, std::size_t n) {
        AllocStats::sub(n * sizeof(T));
        ::operator delete(p);
    }
    bool operator==(const TrackingAllocator&) const { return true; }
    bool operator!=(const TrackingAllocator&) const { return false; }
};

// ---------------------------------------------------------------------------
// Dense row-major tensor. Scalar type is float or double, selected per run.

template <typename T>
class Tensor {
public:
    using Scalar = T;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count_(shape_), T(0)) {}
    Tensor(std::vector<std::size_t> shape, std::vector<T, TrackingAllocator<T>> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count_(shape_) != data_.size()) throw DimensionError("shape/data length mismatch");
    }

    static Tensor zeros(std::initializer_list<std::size_t> shape) {
        return Tensor(std::vector<std::size_t>(shape));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t rows() const {
        if (rank() != 2) throw DimensionError("rows() on rank-" + std::to_string(rank()));
        return shape_[0];
    }
    std::size_t cols() const {
        if (rank() != 2) throw DimensionError("cols() on rank-" + std::to_string(rank()));
        return shape_[1];
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    T& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    const T& at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    void setZero() { fill(T(0)); }

    Tensor& operator+=(const Tensor& o) {
        if (o.shape_ != shape_) throw DimensionError("operator+= shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor& operator-=(const Tensor& o) {
        if (o.shape_ != shape_) throw DimensionError("operator-= shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Tensor& operator*=(T s) {
        for (auto& v : data_) v *= s;
        return *this;
    }

    bool all_finite() const {
        for (const auto& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    void require_finite(const char* where) const {
        if (!all_finite()) throw NumericError(std::string("non-finite value in ") + where);
    }

private:
    static std::size_t count_(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t e : s) {
            if (e == 0) throw DimensionError("zero extent");
            n *= e;
        }
        return s.empty() ? 0 : n;
    }

    std::vector<std::size_t> shape_;
    std::vector<T, TrackingAllocator<T>> data_;
};

template <typename T>
Tensor<T> operator+(Tensor<T> a, const Tensor<T>& b) {
    a += b;
    return a;
}
template <typename T>
Tensor<T> operator-(Tensor<T> a, const Tensor<T>& b) {
    a -= b;
    return a;
}

// ---------------------------------------------------------------------------
// Seeded PRNG with fully specified draw algorithms so that traces are
// reproducible across builds. mt19937_64 stream, 53-bit uniform mantissa,
// Box-Muller normals.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        // xorshift* would do, but mt19937_64 is the documented engine.
        return engine_step_();
    }

    double uniform() { return static_cast<double>(engine_step_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double th = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }

    // Fisher-Yates; the shuffle order is part of the reproducibility contract.
    template <typename V>
    void shuffle(V& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_u64() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t engine_step_() {
        // SplitMix64-seeded MT19937-64, stepped lazily.
        if (!seeded_) {
            std::uint64_t z = state_;
            for (int i = 0; i < 312; ++i) {
                z += 0x9E3779B97F4A7C15ull;
                std::uint64_t x = z;
                x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
                x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
                mt_[i] = x ^ (x >> 31);
            }
            idx_ = 312;
            seeded_ = true;
        }
        if (idx_ >= 312) twist_();
        std::uint64_t x = mt_[idx_++];
        x ^= (x >> 29) & 0x5555555555555555ull;
        x ^= (x << 17) & 0x71D67FFFEDA60000ull;
        x ^= (x << 37) & 0xFFF7EEE000000000ull;
        x ^= (x >> 43);
        return x;
    }

    void twist_() {
        constexpr std::uint64_t kLoMask = 0x7FFFFFFFull;
        constexpr std::uint64_t kHiMask = ~kLoMask;
        for (int i = 0; i < 312; ++i) {
            std::uint64_t y = (mt_[i] & kHiMask) | (mt_[(i + 1) % 312] & kLoMask);
            mt_[i] = mt_[(i + 156) % 312] ^ (y >> 1);
            if (y & 1) mt_[i] ^= 0xB5026F5AA96619E9ull;
        }
        idx_ = 0;
    }

    std::uint64_t state_ = 0;
    std::uint64_t mt_[312] = {};
    int idx_ = 312;
    bool seeded_ = false;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace hybkan
