#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hybkan/ops.hpp"
#include "hybkan/tensor.hpp"

namespace hybkan {

// ---------------------------------------------------------------------------
// Uniform B-spline grid over [range_lo, range_hi], extended by `order` knots
// on each side. Basis count is grid_size + order.

struct SplineGrid {
    double range_lo = -1.5;
    double range_hi = 1.5;
    int grid_size = 5;   // G: interior spans
    int order = 3;       // p: polynomial order (3 = cubic)
    double grid_eps = 0.02;  // stored for config fidelity; inert (no grid refitting)

    std::vector<double> knots;  // length G + 2p + 1, uniform spacing

    int basis_count() const { return grid_size + order; }
    double spacing() const { return (range_hi - range_lo) / grid_size; }

    static SplineGrid make(double lo = -1.5, double hi = 1.5, int G = 5, int p = 3,
                           double eps = 0.02) {
        if (G < 1 || p < 0 || hi <= lo) throw ConfigError("invalid spline grid");
        SplineGrid g;
        g.range_lo = lo;
        g.range_hi = hi;
        g.grid_size = G;
        g.order = p;
        g.grid_eps = eps;
        const double h = g.spacing();
        g.knots.resize(static_cast<std::size_t>(G + 2 * p + 1));
        for (int i = 0; i <= G + 2 * p; ++i) g.knots[static_cast<std::size_t>(i)] = lo + (i - p) * h;
        return g;
    }
};

// Cox-de Boor recursion over the full knot vector. Half-open spans
// [t_i, t_{i+1}); the very last span is closed so range_hi "+ tail" is covered.
// Writes basis values for all k = G+p functions; optionally their x-derivatives.
inline void bspline_basis_at(double x, const SplineGrid& g, double* basis, double* dbasis = nullptr) {
    const int p = g.order;
    const int nspans = g.grid_size + 2 * p;  // order-0 functions
    const auto& t = g.knots;
    std::vector<double> b(static_cast<std::size_t>(nspans));
    for (int i = 0; i < nspans; ++i) {
        bool in = (x >= t[i] && x < t[i + 1]) || (i == nspans - 1 && x == t[i + 1]);
        b[static_cast<std::size_t>(i)] = in ? 1.0 : 0.0;
    }
    std::vector<double> prev;  // order p-1 values, needed for the derivative
    for (int q = 1; q <= p; ++q) {
        if (q == p && dbasis) prev = b;
        for (int i = 0; i + q < nspans; ++i) {
            double left = 0.0, right = 0.0;
            double den1 = t[i + q] - t[i];
            double den2 = t[i + q + 1] - t[i + 1];
            if (den1 > 0.0) left = (x - t[i]) / den1 * b[static_cast<std::size_t>(i)];
            if (den2 > 0.0) right = (t[i + q + 1] - x) / den2 * b[static_cast<std::size_t>(i + 1)];
            b[static_cast<std::size_t>(i)] = left + right;
        }
    }
    const int k = g.basis_count();
    for (int j = 0; j < k; ++j) basis[j] = b[static_cast<std::size_t>(j)];
    if (dbasis) {
        for (int j = 0; j < k; ++j) {
            if (p == 0) {
                dbasis[j] = 0.0;
                continue;
            }
            double d1 = t[j + p] - t[j];
            double d2 = t[j + p + 1] - t[j + 1];
            double v = 0.0;
            if (d1 > 0.0) v += p / d1 * prev[static_cast<std::size_t>(j)];
            if (d2 > 0.0) v -= p / d2 * prev[static_cast<std::size_t>(j + 1)];
            dbasis[j] = v;
        }
    }
}

// Row i holds B_1..B_k evaluated at xs[i].
template <typename T>
Tensor<T> bspline_basis(const std::vector<T>& xs, const SplineGrid& g) {
    const std::size_t k = static_cast<std::size_t>(g.basis_count());
    Tensor<T> out({xs.size(), k});
    std::vector<double> row(k);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        bspline_basis_at(static_cast<double>(xs[i]), g, row.data());
        for (std::size_t j = 0; j < k; ++j) out.at(i, j) = static_cast<T>(row[j]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Efficient-KAN layer: y = act(W_base·x + (Σ_r C_r·B_r(x)) ⊙ S + b).
// The base path consumes raw x and the activation is applied once to the
// summed output. (The upstream Efficient-KAN codebase instead activates the
// base-path input; we follow the pseudocode form with the single trailing
// activation.)

template <typename T>
struct EffKanLayer {
    std::size_t d_in = 0, d_out = 0;
    SplineGrid grid;
    bool apply_gelu = true;  // heads produce raw logits

    Tensor<T> W_base;  // d_out × d_in
    Tensor<T> C;       // d_out × d_in × k spline coefficients
    Tensor<T> S;       // d_out × d_in spline scaler
    Tensor<T> b;       // d_out

    Tensor<T> gW_base, gC, gS, gb;

    std::size_t k() const { return static_cast<std::size_t>(grid.basis_count()); }

    struct Cache {
        Tensor<T> x;        // n × d_in
        Tensor<T> basis;    // n × (d_in·k), flattened
        Tensor<T> dbasis;   // n × (d_in·k), dB/dx
        Tensor<T> z;        // n × d_out pre-activation
    };

    static std::size_t param_count(std::size_t d_in, std::size_t d_out, const SplineGrid& g) {
        const std::size_t k = static_cast<std::size_t>(g.basis_count());
        return (k + 2) * d_in * d_out + d_out;
    }
    std::size_t param_count() const { return param_count(d_in, d_out, grid); }

    void init_buffers() {
        W_base = Tensor<T>({d_out, d_in});
        C = Tensor<T>({d_out, d_in, k()});
        S = Tensor<T>({d_out, d_in});
        b = Tensor<T>({d_out});
        zero_grads();
    }

    void zero_grads() {
        gW_base = Tensor<T>({d_out, d_in});
        gC = Tensor<T>({d_out, d_in, k()});
        gS = Tensor<T>({d_out, d_in});
        gb = Tensor<T>({d_out});
    }

    Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const {
        if (x.cols() != d_in) throw DimensionError("effkan_forward width " + std::to_string(x.cols()));
        const std::size_t n = x.rows(), K = k();
        Tensor<T> basis({n, d_in * K});
        Tensor<T> dbasis({n, d_in * K});
        std::vector<double> row(K), drow(K);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d_in; ++j) {
                bspline_basis_at(static_cast<double>(x.at(i, j)), grid, row.data(), drow.data());
                for (std::size_t r = 0; r < K; ++r) {
                    basis.at(i, j * K + r) = static_cast<T>(row[r]);
                    dbasis.at(i, j * K + r) = static_cast<T>(drow[r]);
                }
            }
        // Effective coefficients Ce[o, j, r] = C[o, j, r] * S[o, j]
        Tensor<T> Ce({d_out, d_in * K});
        for (std::size_t o = 0; o < d_out; ++o)
            for (std::size_t j = 0; j < d_in; ++j)
                for (std::size_t r = 0; r < K; ++r)
                    Ce.at(o, j * K + r) = C.at(o, j, r) * S.at(o, j);
        Tensor<T> z = matmul_nt(x, W_base);     // n × d_out
        Tensor<T> zs = matmul_nt(basis, Ce);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t o = 0; o < d_out; ++o) z.at(i, o) += zs.at(i, o) + b[o];
        z.require_finite("effkan_forward");
        Tensor<T> y = apply_gelu ? gelu(z) : z;
        if (cache) {
            cache->x = x;
            cache->basis = std::move(basis);
            cache->dbasis = std::move(dbasis);
            cache->z = std::move(z);
        }
        return y;
    }

    // Accumulates parameter gradients; returns dx.
    Tensor<T> backward(const Cache& cache, const Tensor<T>& dy) {
        const std::size_t n = cache.x.rows(), K = k();
        Tensor<T> dz = apply_gelu ? gelu_backward(cache.z, dy) : dy;
        // bias
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t o = 0; o < d_out; ++o) gb[o] += dz.at(i, o);
        // base path
        matmul_tn_acc(dz, cache.x, gW_base);
        Tensor<T> dx = matmul(dz, W_base);
        // spline path: dCe = dz^T · basis
        Tensor<T> dCe = matmul_tn(dz, cache.basis);  // d_out × (d_in·K)
        for (std::size_t o = 0; o < d_out; ++o)
            for (std::size_t j = 0; j < d_in; ++j) {
                T s = S.at(o, j), ds = T(0);
                for (std::size_t r = 0; r < K; ++r) {
                    T g = dCe.at(o, j * K + r);
                    gC.at(o, j, r) += g * s;
                    ds += g * C.at(o, j, r);
                }
                gS.at(o, j) += ds;
            }
        // input gradient through the basis: dBas = dz · Ce, then chain with dB/dx
        Tensor<T> Ce({d_out, d_in * K});
        for (std::size_t o = 0; o < d_out; ++o)
            for (std::size_t j = 0; j < d_in; ++j)
                for (std::size_t r = 0; r < K; ++r)
                    Ce.at(o, j * K + r) = C.at(o, j, r) * S.at(o, j);
        Tensor<T> dBas = matmul(dz, Ce);  // n × (d_in·K)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d_in; ++j) {
                T acc = T(0);
                for (std::size_t r = 0; r < K; ++r)
                    acc += dBas.at(i, j * K + r) * cache.dbasis.at(i, j * K + r);
                dx.at(i, j) += acc;
            }
        return dx;
    }
};

// Kaiming-uniform bound for a fan-in: uniform on [-b, b] with b = sqrt(3)·gain·sqrt(2/fan_in)
// gives an empirical std of gain·sqrt(2/fan_in).
inline double kaiming_uniform_bound(std::size_t fan_in, double gain) {
    return std::sqrt(3.0) * gain * std::sqrt(2.0 / static_cast<double>(fan_in));
}

template <typename T>
EffKanLayer<T> effkan_init(std::size_t d_in, std::size_t d_out, const SplineGrid& grid,
                           double scale_noise, double scale_base, double scale_spline, Rng& rng,
                           bool apply_gelu = true) {
    if (d_in == 0 || d_out == 0) throw ConfigError("effkan_init: zero dims");
    EffKanLayer<T> l;
    l.d_in = d_in;
    l.d_out = d_out;
    l.grid = grid;
    l.apply_gelu = apply_gelu;
    l.init_buffers();
    const double bw = kaiming_uniform_bound(d_in, scale_base);
    for (std::size_t i = 0; i < l.W_base.size(); ++i)
        l.W_base[i] = static_cast<T>(rng.uniform(-bw, bw));
    const double bs = kaiming_uniform_bound(d_in, scale_spline);
    for (std::size_t i = 0; i < l.S.size(); ++i) l.S[i] = static_cast<T>(rng.uniform(-bs, bs));
    const double amp = scale_noise / grid.grid_size;
    for (std::size_t i = 0; i < l.C.size(); ++i) l.C[i] = static_cast<T>(rng.uniform(-amp, amp));
    return l;
}

template <typename T>
std::size_t effkan_param_count(std::size_t d_in, std::size_t d_out, const SplineGrid& grid) {
    return EffKanLayer<T>::param_count(d_in, d_out, grid);
}

}  // namespace hybkan
