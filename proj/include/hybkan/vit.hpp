#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "hybkan/ops.hpp"
#include "hybkan/spline.hpp"
#include "hybkan/tensor.hpp"
#include "hybkan/wavelet.hpp"

namespace hybkan {

enum class FfnKind { Mlp, EffKan, WavKan };
enum class HeadKind { Linear, EffKan, WavKan };
enum class Variant { Vit, EffKanVit, WavKanVit, Hybrid1, Hybrid2 };
enum class SizePreset { Tiny, Small, Base, Custom };

struct SplineConfig {
    double range_lo = -1.5, range_hi = 1.5;
    int grid_size = 5;
    int order = 3;
    double grid_eps = 0.02;
    double scale_noise = 0.1;
    double scale_base = 1.0;
    double scale_spline = 1.0;

    SplineGrid grid() const {
        return SplineGrid::make(range_lo, range_hi, grid_size, order, grid_eps);
    }
};

struct WaveletConfig {
    WaveletKind kind = WaveletKind::DoG;
    int decomposition_levels = 4;
    int num_scales = 6;  // clamped to levels+1 bands when they disagree
    double initial_scale = 1.0;
    double central_frequency = 5.0;
    double prune_ratio = 0.4;
    double scale_noise = 0.1;
    double scale_base = 1.0;
    double grid_eps = 0.02;  // stored for config fidelity; unused by the transform
};

struct ModelConfig {
    std::size_t patch_size = 16;
    std::size_t image_size = 224;
    std::size_t in_channels = 3;
    std::size_t depth = 12;
    std::size_t heads = 3;
    std::size_t dim = 192;
    std::size_t ffn_width = 768;
    std::size_t num_classes = 1000;
    FfnKind ffn_kind = FfnKind::Mlp;
    HeadKind head_kind = HeadKind::Linear;
    WaveletKind ffn_wavelet = WaveletKind::DoG;
    WaveletKind head_wavelet = WaveletKind::DoG;
    SplineConfig spline;
    WaveletConfig wavelet;

    std::size_t n_patches() const {
        return (image_size / patch_size) * (image_size / patch_size);
    }
    std::size_t n_tokens() const { return n_patches() + 1; }

    void validate() const {
        if (dim % heads != 0) throw ConfigError("dim must be divisible by heads");
        if (image_size % patch_size != 0)
            throw ConfigError("image_size must be divisible by patch_size");
        if (depth == 0 || dim == 0 || heads == 0 || num_classes == 0)
            throw ConfigError("zero-sized model field");
    }

    // Table-2 presets: Tiny(12,3,192,768), Small(12,6,384,1536), Base(12,12,768,3072)
    static ModelConfig preset(SizePreset s) {
        ModelConfig c;
        switch (s) {
            case SizePreset::Tiny: c.depth = 12; c.heads = 3; c.dim = 192; c.ffn_width = 768; break;
            case SizePreset::Small: c.depth = 12; c.heads = 6; c.dim = 384; c.ffn_width = 1536; break;
            case SizePreset::Base: c.depth = 12; c.heads = 12; c.dim = 768; c.ffn_width = 3072; break;
            case SizePreset::Custom: break;
        }
        return c;
    }
};

inline void apply_variant(ModelConfig& c, Variant v) {
    switch (v) {
        case Variant::Vit:
            c.ffn_kind = FfnKind::Mlp;
            c.head_kind = HeadKind::Linear;
            break;
        case Variant::EffKanVit:
            c.ffn_kind = FfnKind::EffKan;
            c.head_kind = HeadKind::EffKan;
            break;
        case Variant::WavKanVit:
            c.ffn_kind = FfnKind::WavKan;
            c.head_kind = HeadKind::WavKan;
            c.head_wavelet = c.ffn_wavelet;
            break;
        case Variant::Hybrid1:  // Wav-KAN encoder + Eff-KAN head
            c.ffn_kind = FfnKind::WavKan;
            c.head_kind = HeadKind::EffKan;
            break;
        case Variant::Hybrid2:  // Eff-KAN encoder + Wav-KAN head
            c.ffn_kind = FfnKind::EffKan;
            c.head_kind = HeadKind::WavKan;
            break;
    }
}

// ---------------------------------------------------------------------------

template <typename T>
struct ParamRef {
    std::string name;
    T* value = nullptr;
    T* grad = nullptr;
    std::size_t len = 0;
    bool decay = true;  // weight decay applies (false for biases, norms, wavelet scalars)
};

// ---------------------------------------------------------------------------
// Multi-head self-attention with pre-norm handled by the enclosing block.
// Projection matrices carry no biases, matching the algorithmic definition.

template <typename T>
struct Attention {
    std::size_t dim = 0, heads = 0;
    Tensor<T> Wq, Wk, Wv, Wo;  // each dim × dim
    Tensor<T> gWq, gWk, gWv, gWo;

    std::size_t head_dim() const { return dim / heads; }

    void init(std::size_t d, std::size_t h, Rng& rng) {
        dim = d;
        heads = h;
        const double bound = std::sqrt(3.0) * std::sqrt(2.0 / static_cast<double>(d));
        for (Tensor<T>* w : {&Wq, &Wk, &Wv, &Wo}) {
            *w = Tensor<T>({d, d});
            for (std::size_t i = 0; i < w->size(); ++i)
                (*w)[i] = static_cast<T>(rng.uniform(-bound, bound));
        }
        zero_grads();
    }

    void zero_grads() {
        gWq = Tensor<T>({dim, dim});
        gWk = Tensor<T>({dim, dim});
        gWv = Tensor<T>({dim, dim});
        gWo = Tensor<T>({dim, dim});
    }

    struct Cache {
        Tensor<T> xn;                 // normalized input, n × d
        Tensor<T> q, k, v;            // n × d
        std::vector<Tensor<T>> attn;  // per head, n × n softmax weights
        Tensor<T> concat;             // n × d
    };

    // x is the *normalized* token matrix; the residual add lives in the block.
    Tensor<T> forward(const Tensor<T>& xn, Cache* cache = nullptr) const {
        if (xn.cols() != dim) throw DimensionError("attention width");
        const std::size_t n = xn.rows(), dh = head_dim();
        Tensor<T> q = matmul_nt(xn, Wq);
        Tensor<T> k = matmul_nt(xn, Wk);
        Tensor<T> v = matmul_nt(xn, Wv);
        Tensor<T> concat({n, dim});
        std::vector<Tensor<T>> attn(heads);
        const T inv_sqrt_dh = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t c0 = h * dh;
            Tensor<T> scores({n, n});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    T s = T(0);
                    for (std::size_t c = 0; c < dh; ++c) s += q.at(i, c0 + c) * k.at(j, c0 + c);
                    scores.at(i, j) = s * inv_sqrt_dh;
                }
            Tensor<T> a = softmax_rows(scores);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < dh; ++c) {
                    T s = T(0);
                    for (std::size_t j = 0; j < n; ++j) s += a.at(i, j) * v.at(j, c0 + c);
                    concat.at(i, c0 + c) = s;
                }
            attn[h] = std::move(a);
        }
        Tensor<T> out = matmul_nt(concat, Wo);
        if (cache) {
            cache->xn = xn;
            cache->q = std::move(q);
            cache->k = std::move(k);
            cache->v = std::move(v);
            cache->attn = std::move(attn);
            cache->concat = std::move(concat);
        }
        return out;
    }

    // Returns d(xn); accumulates weight gradients.
    Tensor<T> backward(const Cache& cache, const Tensor<T>& dout) {
        const std::size_t n = cache.xn.rows(), dh = head_dim();
        matmul_tn_acc(dout, cache.concat, gWo);
        Tensor<T> dconcat = matmul(dout, Wo);
        Tensor<T> dq({n, dim}), dk({n, dim}), dv({n, dim});
        const T inv_sqrt_dh = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t c0 = h * dh;
            const Tensor<T>& a = cache.attn[h];
            // dA = dhead · v_h^T ; dv_h = A^T · dhead
            Tensor<T> dA({n, n});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    T s = T(0);
                    for (std::size_t c = 0; c < dh; ++c)
                        s += dconcat.at(i, c0 + c) * cache.v.at(j, c0 + c);
                    dA.at(i, j) = s;
                }
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t c = 0; c < dh; ++c) {
                    T s = T(0);
                    for (std::size_t i = 0; i < n; ++i) s += a.at(i, j) * dconcat.at(i, c0 + c);
                    dv.at(j, c0 + c) = s;
                }
            Tensor<T> ds = softmax_rows_backward(a, dA);
            for (std::size_t i = 0; i < ds.size(); ++i) ds[i] *= inv_sqrt_dh;
            // dq_h = ds · k_h ; dk_h = ds^T · q_h
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < dh; ++c) {
                    T sq = T(0);
                    for (std::size_t j = 0; j < n; ++j) sq += ds.at(i, j) * cache.k.at(j, c0 + c);
                    dq.at(i, c0 + c) = sq;
                }
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t c = 0; c < dh; ++c) {
                    T sk = T(0);
                    for (std::size_t i = 0; i < n; ++i) sk += ds.at(i, j) * cache.q.at(i, c0 + c);
                    dk.at(j, c0 + c) = sk;
                }
        }
        matmul_tn_acc(dq, cache.xn, gWq);
        matmul_tn_acc(dk, cache.xn, gWk);
        matmul_tn_acc(dv, cache.xn, gWv);
        Tensor<T> dxn = matmul(dq, Wq);
        dxn += matmul(dk, Wk);
        dxn += matmul(dv, Wv);
        return dxn;
    }

    void collect_params(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".Wq", Wq.data(), gWq.data(), Wq.size(), true});
        out.push_back({prefix + ".Wk", Wk.data(), gWk.data(), Wk.size(), true});
        out.push_back({prefix + ".Wv", Wv.data(), gWv.data(), Wv.size(), true});
        out.push_back({prefix + ".Wo", Wo.data(), gWo.data(), Wo.size(), true});
    }
};

// ---------------------------------------------------------------------------
// Baseline FFN: y = W2·GELU(W1·x + b1) + b2

template <typename T>
struct MlpBlock {
    std::size_t d = 0, width = 0;
    Tensor<T> W1, b1, W2, b2;  // W1: width × d, W2: d × width
    Tensor<T> gW1, gb1, gW2, gb2;

    void init(std::size_t d_, std::size_t w_, Rng& rng) {
        d = d_;
        width = w_;
        W1 = Tensor<T>({width, d});
        b1 = Tensor<T>({width});
        W2 = Tensor<T>({d, width});
        b2 = Tensor<T>({d});
        const double bd1 = std::sqrt(3.0) * std::sqrt(2.0 / static_cast<double>(d));
        const double bd2 = std::sqrt(3.0) * std::sqrt(2.0 / static_cast<double>(width));
        for (std::size_t i = 0; i < W1.size(); ++i) W1[i] = static_cast<T>(rng.uniform(-bd1, bd1));
        for (std::size_t i = 0; i < W2.size(); ++i) W2[i] = static_cast<T>(rng.uniform(-bd2, bd2));
        zero_grads();
    }

    void zero_grads() {
        gW1 = Tensor<T>({width, d});
        gb1 = Tensor<T>({width});
        gW2 = Tensor<T>({d, width});
        gb2 = Tensor<T>({d});
    }

    struct Cache {
        Tensor<T> x, pre, hidden;
    };

    Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const {
        Tensor<T> pre = matmul_nt(x, W1);
        for (std::size_t i = 0; i < pre.rows(); ++i)
            for (std::size_t c = 0; c < width; ++c) pre.at(i, c) += b1[c];
        Tensor<T> hidden = gelu(pre);
        Tensor<T> y = matmul_nt(hidden, W2);
        for (std::size_t i = 0; i < y.rows(); ++i)
            for (std::size_t c = 0; c < d; ++c) y.at(i, c) += b2[c];
        if (cache) {
            cache->x = x;
            cache->pre = std::move(pre);
            cache->hidden = std::move(hidden);
        }
        return y;
    }

    Tensor<T> backward(const Cache& cache, const Tensor<T>& dy) {
        for (std::size_t i = 0; i < dy.rows(); ++i)
            for (std::size_t c = 0; c < d; ++c) gb2[c] += dy.at(i, c);
        matmul_tn_acc(dy, cache.hidden, gW2);
        Tensor<T> dhidden = matmul(dy, W2);
        Tensor<T> dpre = gelu_backward(cache.pre, dhidden);
        for (std::size_t i = 0; i < dpre.rows(); ++i)
            for (std::size_t c = 0; c < width; ++c) gb1[c] += dpre.at(i, c);
        matmul_tn_acc(dpre, cache.x, gW1);
        return matmul(dpre, W1);
    }

    void collect_params(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".W1", W1.data(), gW1.data(), W1.size(), true});
        out.push_back({prefix + ".b1", b1.data(), gb1.data(), b1.size(), false});
        out.push_back({prefix + ".W2", W2.data(), gW2.data(), W2.size(), true});
        out.push_back({prefix + ".b2", b2.data(), gb2.data(), b2.size(), false});
    }
};

// ---------------------------------------------------------------------------

template <typename T>
void collect_effkan(EffKanLayer<T>& l, std::vector<ParamRef<T>>& out, const std::string& prefix) {
    out.push_back({prefix + ".W_base", l.W_base.data(), l.gW_base.data(), l.W_base.size(), true});
    out.push_back({prefix + ".C", l.C.data(), l.gC.data(), l.C.size(), true});
    out.push_back({prefix + ".S", l.S.data(), l.gS.data(), l.S.size(), true});
    out.push_back({prefix + ".b", l.b.data(), l.gb.data(), l.b.size(), false});
}

template <typename T>
void collect_wavkan(WavKanLayer<T>& l, std::vector<ParamRef<T>>& out, const std::string& prefix) {
    out.push_back({prefix + ".W_base", l.W_base.data(), l.gW_base.data(), l.W_base.size(), true});
    for (std::size_t j = 0; j < l.bands(); ++j)
        out.push_back({prefix + ".C" + std::to_string(j), l.C[j].data(), l.gC[j].data(),
                       l.C[j].size(), true});
    out.push_back({prefix + ".S", l.S.data(), l.gS.data(), l.S.size(), false});
    out.push_back({prefix + ".b", l.b.data(), l.gb.data(), l.b.size(), false});
    for (std::size_t j = 0; j < l.bands(); ++j) {
        const std::string sj = std::to_string(j);
        out.push_back({prefix + ".sigma" + sj, &l.wavelets[j].sigma, &l.g_sigma[j], 1, false});
        out.push_back({prefix + ".tau" + sj, &l.wavelets[j].tau, &l.g_tau[j], 1, false});
        if (l.wavelets[j].kind == WaveletKind::Morlet)
            out.push_back({prefix + ".omega0" + sj, &l.wavelets[j].omega0, &l.g_omega0[j], 1, false});
    }
}

// FFN of the configured kind: MLP per the baseline equation, or two stacked
// KAN layers d -> ffn_width -> d.
template <typename T>
struct Ffn {
    FfnKind kind = FfnKind::Mlp;
    MlpBlock<T> mlp;
    EffKanLayer<T> ek1, ek2;
    WavKanLayer<T> wk1, wk2;

    struct Cache {
        typename MlpBlock<T>::Cache mlp;
        typename EffKanLayer<T>::Cache ek1, ek2;
        typename WavKanLayer<T>::Cache wk1, wk2;
    };

    void init(const ModelConfig& cfg, Rng& rng) {
        kind = cfg.ffn_kind;
        switch (kind) {
            case FfnKind::Mlp:
                mlp.init(cfg.dim, cfg.ffn_width, rng);
                break;
            case FfnKind::EffKan: {
                const SplineGrid g = cfg.spline.grid();
                ek1 = effkan_init<T>(cfg.dim, cfg.ffn_width, g, cfg.spline.scale_noise,
                                     cfg.spline.scale_base, cfg.spline.scale_spline, rng);
                ek2 = effkan_init<T>(cfg.ffn_width, cfg.dim, g, cfg.spline.scale_noise,
                                     cfg.spline.scale_base, cfg.spline.scale_spline, rng);
                break;
            }
            case FfnKind::WavKan: {
                const WaveletConfig& w = cfg.wavelet;
                wk1 = wavkan_init<T>(cfg.dim, cfg.ffn_width, w.decomposition_levels, cfg.ffn_wavelet,
                                     w.initial_scale, w.central_frequency, w.prune_ratio,
                                     w.scale_noise, w.scale_base, rng);
                wk2 = wavkan_init<T>(cfg.ffn_width, cfg.dim, w.decomposition_levels, cfg.ffn_wavelet,
                                     w.initial_scale, w.central_frequency, w.prune_ratio,
                                     w.scale_noise, w.scale_base, rng);
                break;
            }
        }
    }

    Tensor<T> forward(const Tensor<T>& x, Cache* cache) {
        switch (kind) {
            case FfnKind::Mlp: return mlp.forward(x, cache ? &cache->mlp : nullptr);
            case FfnKind::EffKan: {
                Tensor<T> h = ek1.forward(x, cache ? &cache->ek1 : nullptr);
                return ek2.forward(h, cache ? &cache->ek2 : nullptr);
            }
            case FfnKind::WavKan: {
                Tensor<T> h = wk1.forward(x, cache ? &cache->wk1 : nullptr);
                return wk2.forward(h, cache ? &cache->wk2 : nullptr);
            }
        }
        throw ConfigError("unknown ffn kind");
    }

    Tensor<T> backward(Cache& cache, const Tensor<T>& dy) {
        switch (kind) {
            case FfnKind::Mlp: return mlp.backward(cache.mlp, dy);
            case FfnKind::EffKan: {
                Tensor<T> dh = ek2.backward(cache.ek2, dy);
                return ek1.backward(cache.ek1, dh);
            }
            case FfnKind::WavKan: {
                Tensor<T> dh = wk2.backward(cache.wk2, dy);
                return wk1.backward(cache.wk1, dh);
            }
        }
        throw ConfigError("unknown ffn kind");
    }

    void zero_grads() {
        switch (kind) {
            case FfnKind::Mlp: mlp.zero_grads(); break;
            case FfnKind::EffKan: ek1.zero_grads(); ek2.zero_grads(); break;
            case FfnKind::WavKan: wk1.zero_grads(); wk2.zero_grads(); break;
        }
    }

    void collect_params(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        switch (kind) {
            case FfnKind::Mlp: mlp.collect_params(out, prefix + ".mlp"); break;
            case FfnKind::EffKan:
                collect_effkan(ek1, out, prefix + ".ek1");
                collect_effkan(ek2, out, prefix + ".ek2");
                break;
            case FfnKind::WavKan:
                collect_wavkan(wk1, out, prefix + ".wk1");
                collect_wavkan(wk2, out, prefix + ".wk2");
                break;
        }
    }
};

// ---------------------------------------------------------------------------
// Pre-norm encoder block: x' = MHA(LN1(x)) + x ; out = FFN(LN2(x')) + x'

template <typename T>
struct EncoderBlock {
    std::size_t dim = 0;
    Tensor<T> ln1_g, ln1_b, ln2_g, ln2_b;
    Tensor<T> g_ln1_g, g_ln1_b, g_ln2_g, g_ln2_b;
    Attention<T> attn;
    Ffn<T> ffn;

    void init(const ModelConfig& cfg, Rng& rng) {
        dim = cfg.dim;
        ln1_g = Tensor<T>({dim});
        ln1_g.fill(T(1));
        ln1_b = Tensor<T>({dim});
        ln2_g = Tensor<T>({dim});
        ln2_g.fill(T(1));
        ln2_b = Tensor<T>({dim});
        attn.init(cfg.dim, cfg.heads, rng);
        ffn.init(cfg, rng);
        zero_grads();
    }

    void zero_grads() {
        g_ln1_g = Tensor<T>({dim});
        g_ln1_b = Tensor<T>({dim});
        g_ln2_g = Tensor<T>({dim});
        g_ln2_b = Tensor<T>({dim});
        attn.zero_grads();
        ffn.zero_grads();
    }

    struct Cache {
        LayerNormCache<T> ln1, ln2;
        typename Attention<T>::Cache attn;
        typename Ffn<T>::Cache ffn;
    };

    Tensor<T> forward(const Tensor<T>& x, Cache* cache) {
        LayerNormCache<T> ln1c, ln2c;
        Tensor<T> xn = layer_norm(x, ln1_g, ln1_b, T(1e-5), &ln1c);
        Tensor<T> att = attn.forward(xn, cache ? &cache->attn : nullptr);
        Tensor<T> xp = att + x;
        Tensor<T> xn2 = layer_norm(xp, ln2_g, ln2_b, T(1e-5), &ln2c);
        Tensor<T> f = ffn.forward(xn2, cache ? &cache->ffn : nullptr);
        Tensor<T> out = f + xp;
        if (cache) {
            cache->ln1 = std::move(ln1c);
            cache->ln2 = std::move(ln2c);
        }
        return out;
    }

    Tensor<T> backward(Cache& cache, const Tensor<T>& dout) {
        Tensor<T> df = ffn.backward(cache.ffn, dout);
        Tensor<T> dxp = layer_norm_backward(cache.ln2, ln2_g, df, g_ln2_g, g_ln2_b);
        dxp += dout;  // residual
        Tensor<T> dxn = attn.backward(cache.attn, dxp);
        Tensor<T> dx = layer_norm_backward(cache.ln1, ln1_g, dxn, g_ln1_g, g_ln1_b);
        dx += dxp;  // residual
        return dx;
    }

    void collect_params(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".ln1.g", ln1_g.data(), g_ln1_g.data(), dim, false});
        out.push_back({prefix + ".ln1.b", ln1_b.data(), g_ln1_b.data(), dim, false});
        attn.collect_params(out, prefix + ".attn");
        out.push_back({prefix + ".ln2.g", ln2_g.data(), g_ln2_g.data(), dim, false});
        out.push_back({prefix + ".ln2.b", ln2_b.data(), g_ln2_b.data(), dim, false});
        ffn.collect_params(out, prefix + ".ffn");
    }
};

// ---------------------------------------------------------------------------
// Classification head over the final [CLS] embedding. KAN heads are single
// layers without the trailing activation (they emit logits).

template <typename T>
struct Head {
    HeadKind kind = HeadKind::Linear;
    std::size_t d = 0, classes = 0;
    Tensor<T> W, b, gW, gb;  // linear
    EffKanLayer<T> ek;
    WavKanLayer<T> wk;

    struct Cache {
        Tensor<T> x;
        typename EffKanLayer<T>::Cache ek;
        typename WavKanLayer<T>::Cache wk;
    };

    void init(const ModelConfig& cfg, Rng& rng) {
        kind = cfg.head_kind;
        d = cfg.dim;
        classes = cfg.num_classes;
        switch (kind) {
            case HeadKind::Linear: {
                W = Tensor<T>({classes, d});
                b = Tensor<T>({classes});
                const double bound = std::sqrt(3.0) * std::sqrt(2.0 / static_cast<double>(d));
                for (std::size_t i = 0; i < W.size(); ++i)
                    W[i] = static_cast<T>(rng.uniform(-bound, bound));
                break;
            }
            case HeadKind::EffKan:
                ek = effkan_init<T>(d, classes, cfg.spline.grid(), cfg.spline.scale_noise,
                                    cfg.spline.scale_base, cfg.spline.scale_spline, rng,
                                    /*apply_gelu=*/false);
                break;
            case HeadKind::WavKan: {
                const WaveletConfig& w = cfg.wavelet;
                wk = wavkan_init<T>(d, classes, w.decomposition_levels, cfg.head_wavelet,
                                    w.initial_scale, w.central_frequency, w.prune_ratio,
                                    w.scale_noise, w.scale_base, rng, /*apply_gelu=*/false);
                break;
            }
        }
        zero_grads();
    }

    void zero_grads() {
        switch (kind) {
            case HeadKind::Linear:
                gW = Tensor<T>({classes, d});
                gb = Tensor<T>({classes});
                break;
            case HeadKind::EffKan: ek.zero_grads(); break;
            case HeadKind::WavKan: wk.zero_grads(); break;
        }
    }

    Tensor<T> forward(const Tensor<T>& x, Cache* cache) {
        switch (kind) {
            case HeadKind::Linear: {
                Tensor<T> y = matmul_nt(x, W);
                for (std::size_t i = 0; i < y.rows(); ++i)
                    for (std::size_t c = 0; c < classes; ++c) y.at(i, c) += b[c];
                if (cache) cache->x = x;
                return y;
            }
            case HeadKind::EffKan: return ek.forward(x, cache ? &cache->ek : nullptr);
            case HeadKind::WavKan: return wk.forward(x, cache ? &cache->wk : nullptr);
        }
        throw ConfigError("unknown head kind");
    }

    Tensor<T> backward(Cache& cache, const Tensor<T>& dy) {
        switch (kind) {
            case HeadKind::Linear: {
                for (std::size_t i = 0; i < dy.rows(); ++i)
                    for (std::size_t c = 0; c < classes; ++c) gb[c] += dy.at(i, c);
                matmul_tn_acc(dy, cache.x, gW);
                return matmul(dy, W);
            }
            case HeadKind::EffKan: return ek.backward(cache.ek, dy);
            case HeadKind::WavKan: return wk.backward(cache.wk, dy);
        }
        throw ConfigError("unknown head kind");
    }

    void collect_params(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        switch (kind) {
            case HeadKind::Linear:
                out.push_back({prefix + ".W", W.data(), gW.data(), W.size(), true});
                out.push_back({prefix + ".b", b.data(), gb.data(), b.size(), false});
                break;
            case HeadKind::EffKan: collect_effkan(ek, out, prefix + ".ek"); break;
            case HeadKind::WavKan: collect_wavkan(wk, out, prefix + ".wk"); break;
        }
    }
};

// ---------------------------------------------------------------------------
// Full model: patchify -> encoder stack -> final norm -> CLS head.

template <typename T>
struct Model {
    ModelConfig cfg;
    Tensor<T> W_patch, b_patch;  // dim × (C·p²), dim
    Tensor<T> cls, pos;          // dim ; n_tokens × dim
    Tensor<T> gW_patch, gb_patch, gcls, gpos;
    std::vector<EncoderBlock<T>> blocks;
    Tensor<T> lnf_g, lnf_b, g_lnf_g, g_lnf_b;
    Head<T> head;
    bool use_pos = true;  // disabled only by equivariance tests

    struct Cache {
        Tensor<T> image;   // flattened C·H·W
        Tensor<T> patches; // n_patches × (C·p²)
        Tensor<T> tokens;  // pre-head features after the final block
        std::vector<typename EncoderBlock<T>::Cache> blocks;
        LayerNormCache<T> lnf;
        Tensor<T> cls_feat;  // 1 × dim, normalized CLS row
        typename Head<T>::Cache head;
    };

    void init(const ModelConfig& c, std::uint64_t seed) {
        cfg = c;
        cfg.validate();
        Rng rng(seed);
        const std::size_t pd = cfg.in_channels * cfg.patch_size * cfg.patch_size;
        W_patch = Tensor<T>({cfg.dim, pd});
        b_patch = Tensor<T>({cfg.dim});
        const double bound = std::sqrt(3.0) * std::sqrt(2.0 / static_cast<double>(pd));
        for (std::size_t i = 0; i < W_patch.size(); ++i)
            W_patch[i] = static_cast<T>(rng.uniform(-bound, bound));
        cls = Tensor<T>({cfg.dim});
        pos = Tensor<T>({cfg.n_tokens(), cfg.dim});
        for (std::size_t i = 0; i < cls.size(); ++i) cls[i] = static_cast<T>(0.02 * rng.normal());
        for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<T>(0.02 * rng.normal());
        blocks.resize(cfg.depth);
        for (auto& blk : blocks) blk.init(cfg, rng);
        lnf_g = Tensor<T>({cfg.dim});
        lnf_g.fill(T(1));
        lnf_b = Tensor<T>({cfg.dim});
        head.init(cfg, rng);
        zero_grads();
    }

    void zero_grads() {
        gW_patch = Tensor<T>(W_patch.shape());
        gb_patch = Tensor<T>(b_patch.shape());
        gcls = Tensor<T>(cls.shape());
        gpos = Tensor<T>(pos.shape());
        for (auto& blk : blocks) blk.zero_grads();
        g_lnf_g = Tensor<T>({cfg.dim});
        g_lnf_b = Tensor<T>({cfg.dim});
        head.zero_grads();
    }

    void set_training(bool on) {
        for (auto& blk : blocks)
            if (blk.ffn.kind == FfnKind::WavKan) {
                blk.ffn.wk1.training = on;
                blk.ffn.wk2.training = on;
            }
        if (head.kind == HeadKind::WavKan) head.wk.training = on;
    }

    void project_constraints() {
        for (auto& blk : blocks)
            if (blk.ffn.kind == FfnKind::WavKan) {
                blk.ffn.wk1.project_constraints();
                blk.ffn.wk2.project_constraints();
            }
        if (head.kind == HeadKind::WavKan) head.wk.project_constraints();
    }

    // image: flattened C·H·W values
    Tensor<T> patchify(const Tensor<T>& image) const {
        const std::size_t C = cfg.in_channels, H = cfg.image_size, W = cfg.image_size;
        if (image.size() != C * H * W) throw ConfigError("image size mismatch");
        const std::size_t p = cfg.patch_size, np = cfg.n_patches(), per_row = W / p;
        Tensor<T> patches({np, C * p * p});
        for (std::size_t pi = 0; pi < np; ++pi) {
            const std::size_t pr = pi / per_row, pc = pi % per_row;
            std::size_t idx = 0;
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t y = 0; y < p; ++y)
                    for (std::size_t x = 0; x < p; ++x)
                        patches.at(pi, idx++) = image[(c * H + pr * p + y) * W + pc * p + x];
        }
        return patches;
    }

    Tensor<T> forward(const Tensor<T>& image, Cache* cache = nullptr) {
        const std::size_t nt = cfg.n_tokens();
        Tensor<T> patches = patchify(image);
        Tensor<T> proj = matmul_nt(patches, W_patch);  // np × dim
        Tensor<T> tokens({nt, cfg.dim});
        for (std::size_t c = 0; c < cfg.dim; ++c)
            tokens.at(0, c) = cls[c] + (use_pos ? pos.at(0, c) : T(0));
        for (std::size_t i = 0; i < cfg.n_patches(); ++i)
            for (std::size_t c = 0; c < cfg.dim; ++c)
                tokens.at(i + 1, c) =
                    proj.at(i, c) + b_patch[c] + (use_pos ? pos.at(i + 1, c) : T(0));
        if (cache) {
            cache->image = image;
            cache->patches = std::move(patches);
            cache->blocks.resize(blocks.size());
        }
        for (std::size_t b = 0; b < blocks.size(); ++b)
            tokens = blocks[b].forward(tokens, cache ? &cache->blocks[b] : nullptr);
        if (cache) cache->tokens = tokens;
        LayerNormCache<T> lnfc;
        Tensor<T> normed = layer_norm(tokens, lnf_g, lnf_b, T(1e-5), &lnfc);
        Tensor<T> cls_feat({std::size_t(1), cfg.dim});
        for (std::size_t c = 0; c < cfg.dim; ++c) cls_feat.at(0, c) = normed.at(0, c);
        Tensor<T> logits = head.forward(cls_feat, cache ? &cache->head : nullptr);
        if (cache) {
            cache->lnf = std::move(lnfc);
            cache->cls_feat = std::move(cls_feat);
        }
        return logits;  // 1 × num_classes
    }

    void backward(Cache& cache, const Tensor<T>& dlogits) {
        Tensor<T> dcls_feat = head.backward(cache.head, dlogits);
        Tensor<T> dnormed({cfg.n_tokens(), cfg.dim});
        for (std::size_t c = 0; c < cfg.dim; ++c) dnormed.at(0, c) = dcls_feat.at(0, c);
        Tensor<T> dtokens = layer_norm_backward(cache.lnf, lnf_g, dnormed, g_lnf_g, g_lnf_b);
        for (std::size_t b = blocks.size(); b-- > 0;)
            dtokens = blocks[b].backward(cache.blocks[b], dtokens);
        // embedding gradients
        for (std::size_t c = 0; c < cfg.dim; ++c) {
            gcls[c] += dtokens.at(0, c);
            if (use_pos) gpos.at(0, c) += dtokens.at(0, c);
        }
        Tensor<T> dproj({cfg.n_patches(), cfg.dim});
        for (std::size_t i = 0; i < cfg.n_patches(); ++i)
            for (std::size_t c = 0; c < cfg.dim; ++c) {
                const T g = dtokens.at(i + 1, c);
                dproj.at(i, c) = g;
                gb_patch[c] += g;
                if (use_pos) gpos.at(i + 1, c) += g;
            }
        matmul_tn_acc(dproj, cache.patches, gW_patch);
    }

    std::vector<ParamRef<T>> parameters() {
        std::vector<ParamRef<T>> out;
        out.push_back({"embed.W_patch", W_patch.data(), gW_patch.data(), W_patch.size(), true});
        out.push_back({"embed.b_patch", b_patch.data(), gb_patch.data(), b_patch.size(), false});
        out.push_back({"embed.cls", cls.data(), gcls.data(), cls.size(), false});
        out.push_back({"embed.pos", pos.data(), gpos.data(), pos.size(), false});
        for (std::size_t b = 0; b < blocks.size(); ++b)
            blocks[b].collect_params(out, "block" + std::to_string(b));
        out.push_back({"lnf.g", lnf_g.data(), g_lnf_g.data(), lnf_g.size(), false});
        out.push_back({"lnf.b", lnf_b.data(), g_lnf_b.data(), lnf_b.size(), false});
        head.collect_params(out, "head");
        return out;
    }

    std::size_t count_params() {
        std::size_t n = 0;
        for (const auto& p : parameters()) n += p.len;
        return n;
    }
};

// ---------------------------------------------------------------------------
// Builders and accounting

template <typename T>
Model<T> build_model(Variant variant, SizePreset size, const ModelConfig& base,
                     std::uint64_t seed) {
    ModelConfig cfg = ModelConfig::preset(size);
    cfg.patch_size = base.patch_size;
    cfg.image_size = base.image_size;
    cfg.in_channels = base.in_channels;
    cfg.num_classes = base.num_classes;
    cfg.spline = base.spline;
    cfg.wavelet = base.wavelet;
    cfg.ffn_wavelet = base.ffn_wavelet;
    cfg.head_wavelet = base.head_wavelet;
    if (size == SizePreset::Custom) {
        cfg.depth = base.depth;
        cfg.heads = base.heads;
        cfg.dim = base.dim;
        cfg.ffn_width = base.ffn_width;
    }
    apply_variant(cfg, variant);
    Model<T> m;
    m.init(cfg, seed);
    return m;
}

inline std::size_t ffn_layer_param_count(const ModelConfig& cfg, std::size_t d_in,
                                         std::size_t d_out, FfnKind kind, WaveletKind wkind) {
    switch (kind) {
        case FfnKind::Mlp: return d_in * d_out + d_out;  // one linear layer incl. bias
        case FfnKind::EffKan: {
            const std::size_t k = static_cast<std::size_t>(cfg.spline.grid_size + cfg.spline.order);
            return (k + 2) * d_in * d_out + d_out;
        }
        case FfnKind::WavKan: {
            const std::size_t nb = static_cast<std::size_t>(cfg.wavelet.decomposition_levels) + 1;
            const std::size_t wp = (wkind == WaveletKind::Morlet) ? 3 : 2;
            return (nb + 1) * d_in * d_out + nb * d_out + d_out + nb * wp;
        }
    }
    return 0;
}

// Analytic per-layer sums; the tests assert exact agreement with runtime
// enumeration for every variant and size.
inline std::size_t count_params_analytic(const ModelConfig& cfg) {
    const std::size_t d = cfg.dim, w = cfg.ffn_width;
    std::size_t total = 0;
    total += d * cfg.in_channels * cfg.patch_size * cfg.patch_size + d;  // patch proj
    total += d;                  // cls
    total += cfg.n_tokens() * d;  // pos
    std::size_t block = 4 * d * d + 4 * d;  // attention + two norms
    block += ffn_layer_param_count(cfg, d, w, cfg.ffn_kind, cfg.ffn_wavelet);
    block += ffn_layer_param_count(cfg, w, d, cfg.ffn_kind, cfg.ffn_wavelet);
    total += cfg.depth * block;
    total += 2 * d;  // final norm
    switch (cfg.head_kind) {
        case HeadKind::Linear: total += d * cfg.num_classes + cfg.num_classes; break;
        case HeadKind::EffKan:
            total += ffn_layer_param_count(cfg, d, cfg.num_classes, FfnKind::EffKan,
                                           cfg.head_wavelet);
            break;
        case HeadKind::WavKan:
            total += ffn_layer_param_count(cfg, d, cfg.num_classes, FfnKind::WavKan,
                                           cfg.head_wavelet);
            break;
    }
    return total;
}

// FLOP accounting counts one fused multiply-add as a single operation, the
// convention used by vision-backbone comparison tables.
inline double ffn_layer_flops(const ModelConfig& cfg, std::size_t n, std::size_t d_in,
                              std::size_t d_out, FfnKind kind) {
    const double nd = static_cast<double>(n);
    switch (kind) {
        case FfnKind::Mlp:
            return nd * static_cast<double>(d_in) * static_cast<double>(d_out);
        case FfnKind::EffKan: {
            const double k = cfg.spline.grid_size + cfg.spline.order;
            const double basis_eval = 2.0 * cfg.spline.order * (cfg.spline.grid_size + 2.0 * cfg.spline.order);
            return nd * (static_cast<double>(d_in) * d_out * (1.0 + k) +
                         static_cast<double>(d_in) * basis_eval);
        }
        case FfnKind::WavKan: {
            const int L = cfg.wavelet.decomposition_levels;
            const double nb = L + 1;
            double conv = 0.0;
            for (int j = 0; j < static_cast<int>(nb); ++j) {
                const double sigma = cfg.wavelet.initial_scale * std::pow(2.0, std::min(j, std::max(0, L - 1)));
                const double width =
                    2.0 * std::min<double>(std::ceil(4.0 * sigma), static_cast<double>(d_in)) + 1.0;
                conv += static_cast<double>(d_in) * width;   // band wavelet conv
                if (j < L) conv += static_cast<double>(d_in) * width;  // fwt smoothing pass
            }
            return nd * (static_cast<double>(d_in) * d_out * (1.0 + nb) + conv + nb * d_out);
        }
    }
    return 0.0;
}

inline double count_flops(const ModelConfig& cfg) {
    const double n = static_cast<double>(cfg.n_tokens());
    const double d = static_cast<double>(cfg.dim);
    const double w = static_cast<double>(cfg.ffn_width);
    double total = 0.0;
    total += static_cast<double>(cfg.n_patches()) * d *
             static_cast<double>(cfg.in_channels * cfg.patch_size * cfg.patch_size);
    double block = 4.0 * n * d * d + 2.0 * n * n * d;  // projections + QK^T + AV
    block += ffn_layer_flops(cfg, cfg.n_tokens(), cfg.dim, cfg.ffn_width, cfg.ffn_kind);
    block += ffn_layer_flops(cfg, cfg.n_tokens(), cfg.ffn_width, cfg.dim, cfg.ffn_kind);
    total += cfg.depth * block;
    switch (cfg.head_kind) {
        case HeadKind::Linear: total += d * cfg.num_classes; break;
        case HeadKind::EffKan:
            total += ffn_layer_flops(cfg, 1, cfg.dim, cfg.num_classes, FfnKind::EffKan);
            break;
        case HeadKind::WavKan:
            total += ffn_layer_flops(cfg, 1, cfg.dim, cfg.num_classes, FfnKind::WavKan);
            break;
    }
    return total;
}

inline double count_gflops(const ModelConfig& cfg) { return count_flops(cfg) * 1e-9; }

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Vit: return "vit";
        case Variant::EffKanVit: return "effkan";
        case Variant::WavKanVit: return "wavkan";
        case Variant::Hybrid1: return "hybrid1";
        case Variant::Hybrid2: return "hybrid2";
    }
    return "?";
}

inline const char* size_name(SizePreset s) {
    switch (s) {
        case SizePreset::Tiny: return "tiny";
        case SizePreset::Small: return "small";
        case SizePreset::Base: return "base";
        case SizePreset::Custom: return "custom";
    }
    return "?";
}

}  // namespace hybkan
