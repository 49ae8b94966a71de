#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "hybkan/tensor.hpp"

namespace hybkan {

// Forward/backward pairs for the dense primitives. Every backward here is
// validated against central finite differences in the test suite.

template <typename T>
using EigenMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstEigenMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename T>
EigenMap<T> as_matrix(Tensor<T>& t, std::size_t r, std::size_t c) {
    return EigenMap<T>(t.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
template <typename T>
ConstEigenMap<T> as_matrix(const Tensor<T>& t, std::size_t r, std::size_t c) {
    return ConstEigenMap<T>(t.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
template <typename T>
EigenMap<T> as_matrix(Tensor<T>& t) {
    return as_matrix(t, t.rows(), t.cols());
}
template <typename T>
ConstEigenMap<T> as_matrix(const Tensor<T>& t) {
    return as_matrix(t, t.rows(), t.cols());
}

// ---- matmul ----------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2) throw DimensionError("matmul expects rank-2 operands");
    if (a.cols() != b.rows())
        throw DimensionError("matmul inner extents " + std::to_string(a.cols()) + " vs " +
                             std::to_string(b.rows()));
    Tensor<T> y({a.rows(), b.cols()});
    as_matrix(y).noalias() = as_matrix(a) * as_matrix(b);
    return y;
}

// y = a * b^T
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.cols() != b.cols()) throw DimensionError("matmul_nt inner extents");
    Tensor<T> y({a.rows(), b.rows()});
    as_matrix(y).noalias() = as_matrix(a) * as_matrix(b).transpose();
    return y;
}

// y = a^T * b
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rows() != b.rows()) throw DimensionError("matmul_tn inner extents");
    Tensor<T> y({a.cols(), b.cols()});
    as_matrix(y).noalias() = as_matrix(a).transpose() * as_matrix(b);
    return y;
}

// y = a^T * b accumulated into out
template <typename T>
void matmul_tn_acc(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out) {
    if (a.rows() != b.rows()) throw DimensionError("matmul_tn_acc inner extents");
    as_matrix(out).noalias() += as_matrix(a).transpose() * as_matrix(b);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> matmul_backward(const Tensor<T>& a, const Tensor<T>& b,
                                                const Tensor<T>& dy) {
    return {matmul_nt(dy, b), matmul_tn(a, dy)};
}

// ---- softmax over rows ------------------------------------------------------

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
    Tensor<T> y = x;
    const std::size_t m = x.rows(), n = x.cols();
    for (std::size_t r = 0; r < m; ++r) {
        T mx = y.at(r, 0);
        for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, y.at(r, c));
        T sum = T(0);
        for (std::size_t c = 0; c < n; ++c) {
            T e = std::exp(y.at(r, c) - mx);
            y.at(r, c) = e;
            sum += e;
        }
        for (std::size_t c = 0; c < n; ++c) y.at(r, c) /= sum;
    }
    return y;
}

// dx = y ⊙ (dy − rowsum(dy ⊙ y))
template <typename T>
Tensor<T> softmax_rows_backward(const Tensor<T>& y, const Tensor<T>& dy) {
    Tensor<T> dx = dy;
    const std::size_t m = y.rows(), n = y.cols();
    for (std::size_t r = 0; r < m; ++r) {
        T dot = T(0);
        for (std::size_t c = 0; c < n; ++c) dot += dy.at(r, c) * y.at(r, c);
        for (std::size_t c = 0; c < n; ++c) dx.at(r, c) = y.at(r, c) * (dy.at(r, c) - dot);
    }
    return dx;
}

// ---- layer norm -------------------------------------------------------------

template <typename T>
struct LayerNormCache {
    Tensor<T> xhat;     // normalized pre-affine values
    std::vector<T> inv_std;
};

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps,
                     LayerNormCache<T>* cache = nullptr) {
    const std::size_t m = x.rows(), d = x.cols();
    if (gamma.size() != d || beta.size() != d) throw DimensionError("layer_norm affine width");
    Tensor<T> y({m, d});
    Tensor<T> xhat({m, d});
    std::vector<T> inv_std(m);
    for (std::size_t r = 0; r < m; ++r) {
        T mean = T(0);
        for (std::size_t c = 0; c < d; ++c) mean += x.at(r, c);
        mean /= T(d);
        T var = T(0);
        for (std::size_t c = 0; c < d; ++c) {
            T u = x.at(r, c) - mean;
            var += u * u;
        }
        var /= T(d);
        T is = T(1) / std::sqrt(var + eps);
        inv_std[r] = is;
        for (std::size_t c = 0; c < d; ++c) {
            T h = (x.at(r, c) - mean) * is;
            xhat.at(r, c) = h;
            y.at(r, c) = h * gamma[c] + beta[c];
        }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

// Returns dx; accumulates into dgamma/dbeta.
template <typename T>
Tensor<T> layer_norm_backward(const LayerNormCache<T>& cache, const Tensor<T>& gamma,
                              const Tensor<T>& dy, Tensor<T>& dgamma, Tensor<T>& dbeta) {
    const std::size_t m = dy.rows(), d = dy.cols();
    Tensor<T> dx({m, d});
    for (std::size_t r = 0; r < m; ++r) {
        T sum_dh = T(0), sum_dh_h = T(0);
        for (std::size_t c = 0; c < d; ++c) {
            T dh = dy.at(r, c) * gamma[c];
            sum_dh += dh;
            sum_dh_h += dh * cache.xhat.at(r, c);
            dgamma[c] += dy.at(r, c) * cache.xhat.at(r, c);
            dbeta[c] += dy.at(r, c);
        }
        T is = cache.inv_std[r];
        for (std::size_t c = 0; c < d; ++c) {
            T dh = dy.at(r, c) * gamma[c];
            dx.at(r, c) = is * (dh - (sum_dh + cache.xhat.at(r, c) * sum_dh_h) / T(d));
        }
    }
    return dx;
}

// ---- GELU (exact Gaussian-CDF form) -----------------------------------------

template <typename T>
T gelu_scalar(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(0.7071067811865475244)));
}

template <typename T>
T gelu_grad_scalar(T x) {
    T phi = T(0.3989422804014326779) * std::exp(T(-0.5) * x * x);  // N(0,1) pdf
    T Phi = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865475244)));
    return Phi + x * phi;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = gelu_scalar(y[i]);
    return y;
}

template <typename T>
Tensor<T> gelu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = dy[i] * gelu_grad_scalar(x[i]);
    return dx;
}

// ---- conv1d, same-length, zero padded, along the last axis -------------------

template <typename T>
Tensor<T> conv1d_same(const Tensor<T>& x, const std::vector<T>& kernel) {
    const std::size_t w = kernel.size();
    if (w % 2 == 0) throw ConfigError("conv1d kernel width must be odd");
    const std::size_t d = x.shape().back();
    if (w > 2 * d + 1) throw ConfigError("conv1d kernel wider than 2d+1");
    const std::size_t nrows = x.size() / d;
    const long r = static_cast<long>(w / 2);
    Tensor<T> y(x.shape());
    for (std::size_t row = 0; row < nrows; ++row) {
        const T* xin = x.data() + row * d;
        T* yout = y.data() + row * d;
        for (long i = 0; i < static_cast<long>(d); ++i) {
            T acc = T(0);
            for (long t = -r; t <= r; ++t) {
                long j = i + t;
                if (j >= 0 && j < static_cast<long>(d)) acc += kernel[static_cast<std::size_t>(t + r)] * xin[j];
            }
            yout[i] = acc;
        }
    }
    return y;
}

// dx: correlation with the reversed kernel; dk accumulated.
template <typename T>
Tensor<T> conv1d_same_backward(const Tensor<T>& x, const std::vector<T>& kernel,
                               const Tensor<T>& dy, std::vector<T>& dkernel) {
    const std::size_t w = kernel.size();
    const std::size_t d = x.shape().back();
    const std::size_t nrows = x.size() / d;
    const long r = static_cast<long>(w / 2);
    std::vector<T> rev(kernel.rbegin(), kernel.rend());
    Tensor<T> dx = conv1d_same(dy, rev);
    if (dkernel.size() != w) dkernel.assign(w, T(0));
    for (std::size_t row = 0; row < nrows; ++row) {
        const T* xin = x.data() + row * d;
        const T* g = dy.data() + row * d;
        for (long t = -r; t <= r; ++t) {
            T acc = T(0);
            for (long i = 0; i < static_cast<long>(d); ++i) {
                long j = i + t;
                if (j >= 0 && j < static_cast<long>(d)) acc += g[i] * xin[j];
            }
            dkernel[static_cast<std::size_t>(t + r)] += acc;
        }
    }
    return dx;
}

}  // namespace hybkan
