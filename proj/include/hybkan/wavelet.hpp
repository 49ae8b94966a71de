#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "hybkan/ops.hpp"
#include "hybkan/tensor.hpp"

namespace hybkan {

enum class WaveletKind { DoG, MexicanHat, Morlet };

inline const char* wavelet_kind_name(WaveletKind k) {
    switch (k) {
        case WaveletKind::DoG: return "dog";
        case WaveletKind::MexicanHat: return "mexhat";
        case WaveletKind::Morlet: return "morlet";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Mother wavelets. sigma is the scale, tau the translation, omega0 the Morlet
// central frequency; m the DoG derivative order (implemented for m=1).

template <typename T>
struct WaveletParams {
    WaveletKind kind = WaveletKind::DoG;
    T sigma = T(1);
    T tau = T(0);
    T omega0 = T(5);
    int m = 1;

    std::size_t trainable_count() const { return kind == WaveletKind::Morlet ? 3 : 2; }
};

struct WaveletGrads {
    double d_sigma = 0.0;
    double d_tau = 0.0;
    double d_omega0 = 0.0;
};

template <typename T>
double wavelet_eval(const WaveletParams<T>& p, double x) {
    const double s = static_cast<double>(p.sigma);
    const double u = x - static_cast<double>(p.tau);
    const double g = std::exp(-u * u / (2.0 * s * s));
    switch (p.kind) {
        case WaveletKind::DoG:
            // (-1)^m d^m/dx^m Gaussian, m = 1
            return u / (s * s) * g;
        case WaveletKind::MexicanHat:
            return (1.0 / std::sqrt(s)) * (1.0 - u * u / (s * s)) * g;
        case WaveletKind::Morlet:
            return g * std::cos(static_cast<double>(p.omega0) * u / s);
    }
    return 0.0;
}

// Analytic kernel-parameter gradients. d/dtau is -d/dx by the chain rule.
// These are the shipped gradients; gradient_audit() separately compares the
// commonly-cited closed-form sigma/omega gradients against finite differences.
template <typename T>
WaveletGrads wavelet_grad(const WaveletParams<T>& p, double x) {
    const double s = static_cast<double>(p.sigma);
    const double u = x - static_cast<double>(p.tau);
    const double g = std::exp(-u * u / (2.0 * s * s));
    WaveletGrads out;
    switch (p.kind) {
        case WaveletKind::DoG: {
            out.d_sigma = (u * u * u / std::pow(s, 5) - 2.0 * u / (s * s * s)) * g;
            const double ddx = g * (1.0 / (s * s) - u * u / std::pow(s, 4));
            out.d_tau = -ddx;
            break;
        }
        case WaveletKind::MexicanHat: {
            const double psi = (1.0 / std::sqrt(s)) * (1.0 - u * u / (s * s)) * g;
            out.d_sigma = psi * (u * u / (s * s * s) - 0.5 / s) +
                          2.0 * u * u * std::pow(s, -3.5) * g;
            const double ddx = -std::pow(s, -0.5) * g * (u / (s * s)) * (3.0 - u * u / (s * s));
            out.d_tau = -ddx;
            break;
        }
        case WaveletKind::Morlet: {
            const double w0 = static_cast<double>(p.omega0);
            const double th = w0 * u / s;
            const double psi = g * std::cos(th);
            out.d_sigma = u * u / (s * s * s) * psi + w0 * u / (s * s) * g * std::sin(th);
            out.d_omega0 = -(u / s) * g * std::sin(th);
            const double ddx = -u / (s * s) * psi - (w0 / s) * g * std::sin(th);
            out.d_tau = -ddx;
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Kernel sampling: taps at integer offsets i in [-r, r] with r = ceil(radius_mult·sigma),
// optionally clamped. DoG and Mexican-Hat taps are mean-subtracted so the
// discrete kernel keeps zero DC.

template <typename T>
struct SampledKernel {
    std::vector<T> taps;
    // Per-tap parameter sensitivities after the DC correction.
    std::vector<double> d_sigma, d_tau, d_omega0;
};

template <typename T>
SampledKernel<T> sample_kernel(const WaveletParams<T>& p, double radius_mult = 4.0,
                               long max_radius = -1) {
    if (!(p.sigma > T(0))) throw ConfigError("sample_kernel: sigma must be positive");
    long r = static_cast<long>(std::ceil(radius_mult * static_cast<double>(p.sigma)));
    r = std::max<long>(r, 1);
    if (max_radius >= 1) r = std::min(r, max_radius);
    const std::size_t w = static_cast<std::size_t>(2 * r + 1);
    SampledKernel<T> k;
    k.taps.resize(w);
    k.d_sigma.resize(w);
    k.d_tau.resize(w);
    k.d_omega0.resize(w);
    for (long i = -r; i <= r; ++i) {
        const std::size_t idx = static_cast<std::size_t>(i + r);
        k.taps[idx] = static_cast<T>(wavelet_eval(p, static_cast<double>(i)));
        WaveletGrads g = wavelet_grad(p, static_cast<double>(i));
        k.d_sigma[idx] = g.d_sigma;
        k.d_tau[idx] = g.d_tau;
        k.d_omega0[idx] = g.d_omega0;
    }
    if (p.kind != WaveletKind::Morlet) {
        // zero-DC correction; sensitivities follow the same projection
        double mean = 0.0, ms = 0.0, mt = 0.0;
        for (std::size_t i = 0; i < w; ++i) {
            mean += static_cast<double>(k.taps[i]);
            ms += k.d_sigma[i];
            mt += k.d_tau[i];
        }
        mean /= static_cast<double>(w);
        ms /= static_cast<double>(w);
        mt /= static_cast<double>(w);
        for (std::size_t i = 0; i < w; ++i) {
            k.taps[i] = static_cast<T>(static_cast<double>(k.taps[i]) - mean);
            k.d_sigma[i] -= ms;
            k.d_tau[i] -= mt;
        }
    }
    return k;
}

// ---------------------------------------------------------------------------
// A-trous additive pyramid along the feature axis. c_0 = x, c_j = G_j * c_{j-1}
// with G_j a normalized Gaussian of std base_scale·2^{j-1}; details are the
// successive differences and approx the last smoothing, so
// sum(details) + approx == x up to rounding.

template <typename T>
struct BandStack {
    std::vector<Tensor<T>> details;  // L bands, finest first
    Tensor<T> approx;
    double base_scale = 1.0;
    int levels = 0;
};

template <typename T>
std::vector<T> gaussian_taps(double sigma, std::size_t feature_dim) {
    long r = static_cast<long>(std::ceil(4.0 * sigma));
    r = std::max<long>(r, 1);
    r = std::min<long>(r, static_cast<long>(feature_dim));
    std::vector<T> taps(static_cast<std::size_t>(2 * r + 1));
    double sum = 0.0;
    for (long i = -r; i <= r; ++i) {
        double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
        taps[static_cast<std::size_t>(i + r)] = static_cast<T>(v);
        sum += v;
    }
    for (auto& t : taps) t = static_cast<T>(static_cast<double>(t) / sum);
    return taps;
}

template <typename T>
BandStack<T> fwt(const Tensor<T>& x, int levels, double base_scale = 1.0) {
    if (levels < 0) throw ConfigError("fwt: levels must be >= 0");
    const std::size_t d = x.shape().back();
    if (d < 2 && levels > 0) throw DimensionError("fwt: feature dim must be >= 2");
    BandStack<T> out;
    out.base_scale = base_scale;
    out.levels = levels;
    Tensor<T> c = x;
    for (int j = 1; j <= levels; ++j) {
        const double sigma = base_scale * std::pow(2.0, j - 1);
        Tensor<T> cs = conv1d_same(c, gaussian_taps<T>(sigma, d));
        out.details.push_back(c - cs);
        c = std::move(cs);
    }
    out.approx = std::move(c);
    return out;
}

template <typename T>
Tensor<T> iwt(const BandStack<T>& bands) {
    Tensor<T> x = bands.approx;
    for (const auto& det : bands.details) {
        if (det.shape() != x.shape()) throw DimensionError("iwt: band shape mismatch");
        x += det;
    }
    return x;
}

// Adjoint of fwt (the transform is linear): maps band cotangents back to dx.
template <typename T>
Tensor<T> fwt_backward(const BandStack<T>& dbands, std::size_t feature_dim) {
    const int L = dbands.levels;
    std::vector<Tensor<T>> dc(static_cast<std::size_t>(L + 1),
                              Tensor<T>(dbands.approx.shape()));
    dc[static_cast<std::size_t>(L)] += dbands.approx;
    for (int j = 1; j <= L; ++j) {
        dc[static_cast<std::size_t>(j - 1)] += dbands.details[static_cast<std::size_t>(j - 1)];
        dc[static_cast<std::size_t>(j)] -= dbands.details[static_cast<std::size_t>(j - 1)];
    }
    for (int j = L; j >= 1; --j) {
        // Gaussian taps are symmetric, so the adjoint of the zero-padded
        // correlation is the same correlation.
        const double sigma = dbands.base_scale * std::pow(2.0, j - 1);
        dc[static_cast<std::size_t>(j - 1)] +=
            conv1d_same(dc[static_cast<std::size_t>(j)], gaussian_taps<T>(sigma, feature_dim));
    }
    return dc[0];
}

// ---------------------------------------------------------------------------
// Pruning: per batch row, zero the floor(rho·L) detail bands with the lowest
// L1 norm; ties prune the lower band index first; the approximation band is
// never pruned. Returns an n×L binary mask.

template <typename T>
Tensor<T> prune_mask(const std::vector<Tensor<T>>& detail_bands, double rho) {
    if (rho < 0.0 || rho > 1.0) throw ConfigError("prune_mask: rho outside [0,1]");
    const std::size_t L = detail_bands.size();
    if (L == 0) return Tensor<T>();
    const std::size_t n = detail_bands[0].rows();
    const std::size_t n_prune = static_cast<std::size_t>(std::floor(rho * static_cast<double>(L)));
    Tensor<T> mask({n, L});
    mask.fill(T(1));
    if (n_prune == 0) return mask;
    std::vector<std::pair<double, std::size_t>> norms(L);
    for (std::size_t row = 0; row < n; ++row) {
        for (std::size_t j = 0; j < L; ++j) {
            const Tensor<T>& b = detail_bands[j];
            double s = 0.0;
            for (std::size_t c = 0; c < b.cols(); ++c) s += std::abs(static_cast<double>(b.at(row, c)));
            norms[j] = {s, j};
        }
        std::sort(norms.begin(), norms.end());  // (norm asc, index asc)
        for (std::size_t t = 0; t < n_prune; ++t) mask.at(row, norms[t].second) = T(0);
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Wav-KAN layer. Pipeline: fwt -> per-band trainable wavelet convolution ->
// per-band linear map C_j with per-band/per-channel modulation S_j -> pruning
// over detail bands in output space (straight-through gradient) -> additive
// synthesis -> base projection + bias -> GELU.

template <typename T>
struct WavKanLayer {
    std::size_t d_in = 0, d_out = 0;
    int levels = 4;
    double base_scale = 1.0;
    double prune_ratio = 0.4;
    double radius_mult = 4.0;
    bool apply_gelu = true;
    bool training = true;

    Tensor<T> W_base;                      // d_out × d_in
    std::vector<Tensor<T>> C;              // L+1 maps, each d_out × d_in
    Tensor<T> S;                           // (L+1) × d_out
    Tensor<T> b;                           // d_out
    std::vector<WaveletParams<T>> wavelets;  // L+1, trainable

    Tensor<T> gW_base, gS, gb;
    std::vector<Tensor<T>> gC;
    std::vector<T> g_sigma, g_tau, g_omega0;

    // Frozen pruning threshold for evaluation, tracked as a running mean of
    // the training-time rank cutoffs.
    double running_tau = 0.0;
    bool has_running_tau = false;

    // Test hook: when non-empty, replaces the sampled wavelet kernels.
    std::vector<std::vector<T>> fixed_kernels;

    std::size_t bands() const { return static_cast<std::size_t>(levels) + 1; }

    static std::size_t param_count(std::size_t d_in, std::size_t d_out, int L, WaveletKind kind) {
        const std::size_t nb = static_cast<std::size_t>(L) + 1;
        const std::size_t wp = (kind == WaveletKind::Morlet) ? 3 : 2;
        return (nb + 1) * d_in * d_out + nb * d_out + d_out + nb * wp;
    }
    std::size_t param_count() const {
        return param_count(d_in, d_out, levels, wavelets.empty() ? WaveletKind::DoG : wavelets[0].kind);
    }

    void zero_grads() {
        gW_base = Tensor<T>({d_out, d_in});
        gS = Tensor<T>({bands(), d_out});
        gb = Tensor<T>({d_out});
        gC.assign(bands(), Tensor<T>({d_out, d_in}));
        g_sigma.assign(bands(), T(0));
        g_tau.assign(bands(), T(0));
        g_omega0.assign(bands(), T(0));
    }

    // sigma must stay positive through training; called after optimizer steps.
    void project_constraints() {
        for (auto& w : wavelets) {
            if (w.sigma < T(1e-3)) w.sigma = T(1e-3);
            if (w.kind == WaveletKind::Morlet && w.omega0 < T(1e-3)) w.omega0 = T(1e-3);
        }
    }

    struct Cache {
        Tensor<T> x;
        BandStack<T> in_bands;
        std::vector<SampledKernel<T>> kernels;
        std::vector<Tensor<T>> conv_out;  // per band, n × d_in
        std::vector<Tensor<T>> mapped;    // per band, n × d_out (pre-modulation)
        Tensor<T> mask;                   // n × L
        Tensor<T> z;
    };

    Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) {
        if (x.cols() != d_in) throw DimensionError("wavkan_forward width " + std::to_string(x.cols()));
        const std::size_t n = x.rows(), nb = bands();
        BandStack<T> bs = fwt(x, levels, base_scale);
        std::vector<SampledKernel<T>> kernels(nb);
        std::vector<Tensor<T>> conv_out(nb), mapped(nb), modulated(nb);
        for (std::size_t j = 0; j < nb; ++j) {
            const Tensor<T>& band = (j < static_cast<std::size_t>(levels)) ? bs.details[j] : bs.approx;
            const std::vector<T>* taps;
            if (!fixed_kernels.empty()) {
                taps = &fixed_kernels[j];
            } else {
                kernels[j] = sample_kernel(wavelets[j], radius_mult, static_cast<long>(d_in));
                taps = &kernels[j].taps;
            }
            conv_out[j] = conv1d_same(band, *taps);
            mapped[j] = matmul_nt(conv_out[j], C[j]);
            modulated[j] = mapped[j];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t o = 0; o < d_out; ++o) modulated[j].at(i, o) *= S.at(j, o);
        }
        std::vector<Tensor<T>> detail_mod(modulated.begin(), modulated.begin() + levels);
        Tensor<T> mask = make_mask_(detail_mod);
        Tensor<T> phi = modulated[nb - 1];  // approximation band, never pruned
        for (std::size_t j = 0; j < static_cast<std::size_t>(levels); ++j)
            for (std::size_t i = 0; i < n; ++i) {
                const T m = mask.at(i, j);
                for (std::size_t o = 0; o < d_out; ++o) phi.at(i, o) += m * modulated[j].at(i, o);
            }
        Tensor<T> z = matmul_nt(x, W_base);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t o = 0; o < d_out; ++o) z.at(i, o) += phi.at(i, o) + b[o];
        z.require_finite("wavkan_forward");
        Tensor<T> y = apply_gelu ? gelu(z) : z;
        if (cache) {
            cache->x = x;
            cache->in_bands = std::move(bs);
            cache->kernels = std::move(kernels);
            cache->conv_out = std::move(conv_out);
            cache->mapped = std::move(mapped);
            cache->mask = std::move(mask);
            cache->z = std::move(z);
        }
        return y;
    }

    // Straight-through through the mask; accumulates parameter gradients.
    Tensor<T> backward(const Cache& cache, const Tensor<T>& dy) {
        const std::size_t n = cache.x.rows(), nb = bands();
        Tensor<T> dz = apply_gelu ? gelu_backward(cache.z, dy) : dy;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t o = 0; o < d_out; ++o) gb[o] += dz.at(i, o);
        matmul_tn_acc(dz, cache.x, gW_base);
        Tensor<T> dx = matmul(dz, W_base);

        BandStack<T> dbands;
        dbands.levels = levels;
        dbands.base_scale = base_scale;
        dbands.details.resize(static_cast<std::size_t>(levels));
        for (std::size_t j = 0; j < nb; ++j) {
            const bool is_detail = j < static_cast<std::size_t>(levels);
            // d(modulated_j) = mask_j ⊙ dz (approx band unmasked)
            Tensor<T> dmod({n, d_out});
            for (std::size_t i = 0; i < n; ++i) {
                const T m = is_detail ? cache.mask.at(i, j) : T(1);
                for (std::size_t o = 0; o < d_out; ++o) dmod.at(i, o) = m * dz.at(i, o);
            }
            Tensor<T> dmapped({n, d_out});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t o = 0; o < d_out; ++o) {
                    gS.at(j, o) += dmod.at(i, o) * cache.mapped[j].at(i, o);
                    dmapped.at(i, o) = dmod.at(i, o) * S.at(j, o);
                }
            matmul_tn_acc(dmapped, cache.conv_out[j], gC[j]);
            Tensor<T> dconv = matmul(dmapped, C[j]);
            const Tensor<T>& band =
                is_detail ? cache.in_bands.details[j] : cache.in_bands.approx;
            const std::vector<T>& taps =
                fixed_kernels.empty() ? cache.kernels[j].taps : fixed_kernels[j];
            std::vector<T> dtaps;
            Tensor<T> dband = conv1d_same_backward(band, taps, dconv, dtaps);
            if (fixed_kernels.empty()) {
                const SampledKernel<T>& k = cache.kernels[j];
                for (std::size_t i = 0; i < dtaps.size(); ++i) {
                    g_sigma[j] += static_cast<T>(static_cast<double>(dtaps[i]) * k.d_sigma[i]);
                    g_tau[j] += static_cast<T>(static_cast<double>(dtaps[i]) * k.d_tau[i]);
                    g_omega0[j] += static_cast<T>(static_cast<double>(dtaps[i]) * k.d_omega0[i]);
                }
            }
            if (is_detail)
                dbands.details[j] = std::move(dband);
            else
                dbands.approx = std::move(dband);
        }
        if (levels == 0 && dbands.approx.empty()) dbands.approx = Tensor<T>({n, d_in});
        dx += fwt_backward(dbands, d_in);
        return dx;
    }

private:
    Tensor<T> make_mask_(const std::vector<Tensor<T>>& detail_mod) {
        const std::size_t L = detail_mod.size();
        if (L == 0) return Tensor<T>();
        const std::size_t n = detail_mod[0].rows();
        if (training) {
            Tensor<T> mask = prune_mask(detail_mod, prune_ratio);
            // track the rank cutoff (largest pruned norm) for eval-time freezing
            const std::size_t n_prune =
                static_cast<std::size_t>(std::floor(prune_ratio * static_cast<double>(L)));
            if (n_prune > 0) {
                double mean_cut = 0.0;
                for (std::size_t row = 0; row < n; ++row) {
                    double cut = 0.0;
                    for (std::size_t j = 0; j < L; ++j)
                        if (mask.at(row, j) == T(0)) cut = std::max(cut, l1_row_(detail_mod[j], row));
                    mean_cut += cut;
                }
                mean_cut /= static_cast<double>(n);
                running_tau = has_running_tau ? 0.9 * running_tau + 0.1 * mean_cut : mean_cut;
                has_running_tau = true;
            }
            return mask;
        }
        // evaluation: frozen threshold (falls back to the rank policy until trained)
        if (!has_running_tau) return prune_mask(detail_mod, prune_ratio);
        Tensor<T> mask({n, L});
        for (std::size_t row = 0; row < n; ++row)
            for (std::size_t j = 0; j < L; ++j)
                mask.at(row, j) = l1_row_(detail_mod[j], row) > running_tau ? T(1) : T(0);
        return mask;
    }

    static double l1_row_(const Tensor<T>& t, std::size_t row) {
        double s = 0.0;
        for (std::size_t c = 0; c < t.cols(); ++c) s += std::abs(static_cast<double>(t.at(row, c)));
        return s;
    }
};

template <typename T>
WavKanLayer<T> wavkan_init(std::size_t d_in, std::size_t d_out, int levels, WaveletKind kind,
                           double base_scale, double central_frequency, double prune_ratio,
                           double scale_noise, double scale_base, Rng& rng,
                           bool apply_gelu = true) {
    if (d_in == 0 || d_out == 0 || levels < 0) throw ConfigError("wavkan_init: bad dims");
    WavKanLayer<T> l;
    l.d_in = d_in;
    l.d_out = d_out;
    l.levels = levels;
    l.base_scale = base_scale;
    l.prune_ratio = prune_ratio;
    l.apply_gelu = apply_gelu;
    const std::size_t nb = l.bands();
    l.W_base = Tensor<T>({d_out, d_in});
    const double bw = std::sqrt(3.0) * scale_base * std::sqrt(2.0 / static_cast<double>(d_in));
    for (std::size_t i = 0; i < l.W_base.size(); ++i)
        l.W_base[i] = static_cast<T>(rng.uniform(-bw, bw));
    l.C.resize(nb);
    for (std::size_t j = 0; j < nb; ++j) {
        l.C[j] = Tensor<T>({d_out, d_in});
        // per-band maps share the synthesis sum, so scale down by the band count
        const double bc = bw / static_cast<double>(nb);
        for (std::size_t i = 0; i < l.C[j].size(); ++i)
            l.C[j][i] = static_cast<T>(rng.uniform(-bc, bc));
    }
    l.S = Tensor<T>({nb, d_out});
    l.S.fill(T(1));
    l.b = Tensor<T>({d_out});
    l.wavelets.resize(nb);
    for (std::size_t j = 0; j < nb; ++j) {
        WaveletParams<T>& w = l.wavelets[j];
        w.kind = kind;
        // dyadic: detail band j matches the scale of its smoothing level
        const int lvl = (j < static_cast<std::size_t>(levels)) ? static_cast<int>(j)
                                                               : std::max(0, levels - 1);
        double sigma = base_scale * std::pow(2.0, lvl);
        sigma *= 1.0 + rng.uniform(-scale_noise, scale_noise);
        w.sigma = static_cast<T>(std::max(sigma, 1e-3));
        w.tau = T(0);
        w.omega0 = static_cast<T>(central_frequency);
    }
    l.zero_grads();
    return l;
}

template <typename T>
std::size_t wavkan_param_count(std::size_t d_in, std::size_t d_out, int L, WaveletKind kind) {
    return WavKanLayer<T>::param_count(d_in, d_out, L, kind);
}

// ---------------------------------------------------------------------------
// Gradient audit: compares the commonly-cited closed-form sigma/omega gradient
// expressions and the shipped analytic gradients against central finite
// differences of the kernel definitions.

struct GradAuditRow {
    std::string equation;     // which printed formula
    double max_dev_printed;   // |printed - finite difference|, max over samples
    double max_dev_shipped;   // |shipped - finite difference|, max (relative)
    bool printed_agrees;
    bool shipped_agrees;
};

namespace detail {

template <typename T>
double fd_param(const WaveletParams<T>& p, double x, int which) {
    WaveletParams<double> q{p.kind, static_cast<double>(p.sigma), static_cast<double>(p.tau),
                            static_cast<double>(p.omega0), p.m};
    double* slot = which == 0 ? &q.sigma : which == 1 ? &q.tau : &q.omega0;
    const double h = 1e-5 * std::max(1.0, std::abs(*slot));
    const double v0 = *slot;
    *slot = v0 + h;
    double fp = wavelet_eval(q, x);
    *slot = v0 - h;
    double fm = wavelet_eval(q, x);
    *slot = v0;
    return (fp - fm) / (2.0 * h);
}

inline double printed_dog_dsigma(double x, double sigma, double tau, int m) {
    WaveletParams<double> p{WaveletKind::DoG, sigma, tau, 5.0, m};
    const double psi = wavelet_eval(p, x);
    const double u = x - tau;
    return u * u / (sigma * sigma * sigma) * psi - static_cast<double>(m) / sigma * psi - 1.0;
}

inline double printed_mexhat_dsigma(double x, double sigma, double tau) {
    WaveletParams<double> p{WaveletKind::MexicanHat, sigma, tau, 5.0, 1};
    const double psi = wavelet_eval(p, x);
    const double u = x - tau;
    const double e = std::exp(-u * u / (2.0 * sigma * sigma));
    return u * u / (sigma * sigma * sigma) * psi +
           1.5 * std::pow(sigma, -1.5) * (u * u / (sigma * sigma) - 1.0) * e;
}

inline double printed_morlet_dsigma(double x, double sigma, double tau, double w0) {
    WaveletParams<double> p{WaveletKind::Morlet, sigma, tau, w0, 1};
    const double psi = wavelet_eval(p, x);
    const double u = x - tau;
    const double e = std::exp(-u * u / (2.0 * sigma * sigma));
    return u * u / (sigma * sigma * sigma) * psi +
           w0 * u / (sigma * sigma) * e * std::sin(w0 * u / sigma);
}

inline double printed_morlet_domega(double x, double sigma, double tau, double w0) {
    const double u = x - tau;
    const double e = std::exp(-u * u / (2.0 * sigma * sigma));
    return u / sigma * e * std::sin(w0 * u / sigma);
}

}  // namespace detail

inline std::vector<GradAuditRow> gradient_audit(std::uint64_t seed = 17, int samples = 1000,
                                                double tol = 1e-6) {
    Rng rng(seed);
    std::vector<GradAuditRow> rows;
    const char* names[4] = {"eq5.2 dog dPsi/dsigma", "eq6.2 mexhat dPsi/dsigma",
                            "eq7.2 morlet dPsi/dsigma", "eq7.3 morlet dPsi/domega0"};
    for (int eq = 0; eq < 4; ++eq) {
        double devp = 0.0, devs = 0.0;
        for (int it = 0; it < samples; ++it) {
            WaveletParams<double> p;
            p.kind = eq == 0 ? WaveletKind::DoG
                             : eq == 1 ? WaveletKind::MexicanHat : WaveletKind::Morlet;
            p.sigma = rng.uniform(0.5, 2.0);
            p.tau = rng.uniform(-1.0, 1.0);
            p.omega0 = rng.uniform(2.0, 8.0);
            const double x = rng.uniform(-3.0, 3.0);
            const int which = eq == 3 ? 2 : 0;
            const double fd = detail::fd_param(p, x, which);
            double printed = 0.0, shipped = 0.0;
            switch (eq) {
                case 0: printed = detail::printed_dog_dsigma(x, p.sigma, p.tau, p.m); break;
                case 1: printed = detail::printed_mexhat_dsigma(x, p.sigma, p.tau); break;
                case 2: printed = detail::printed_morlet_dsigma(x, p.sigma, p.tau, p.omega0); break;
                case 3: printed = detail::printed_morlet_domega(x, p.sigma, p.tau, p.omega0); break;
            }
            WaveletGrads g = wavelet_grad(p, x);
            shipped = which == 2 ? g.d_omega0 : g.d_sigma;
            const double scale = std::max(1.0, std::abs(fd));
            devp = std::max(devp, std::abs(printed - fd) / scale);
            devs = std::max(devs, std::abs(shipped - fd) / scale);
        }
        rows.push_back({names[eq], devp, devs, devp < tol, devs < tol});
    }
    return rows;
}

}  // namespace hybkan
