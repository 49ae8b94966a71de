#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hybkan/train.hpp"
#include "hybkan/vit.hpp"

namespace hybkan {

// Everything a CLI run needs: model shape, optimizer recipe, dataset source,
// and benchmark sweep settings, all addressable as flat `key = value` text.
struct RunConfig {
    Variant variant = Variant::Vit;
    SizePreset size = SizePreset::Custom;
    ModelConfig model;
    TrainConfig train;
    // dataset
    std::string dataset = "synthetic";  // synthetic | mnist | cifar10
    std::uint64_t synthetic_seed = 7;
    std::size_t synthetic_train = 2048, synthetic_eval = 512;
    std::string mnist_train_images, mnist_train_labels, mnist_test_images, mnist_test_labels;
    std::vector<std::string> cifar_train_batches, cifar_test_batches;
    // bench
    std::vector<std::size_t> bench_dims = bench_unset();
    std::size_t bench_batch = 32;
    int bench_repeats = 5, bench_warmup = 5;
    std::string bench_format = "csv";

    static std::vector<std::size_t> bench_unset() { return {64, 128, 256, 512, 1024}; }
};

inline Variant parse_variant(const std::string& s) {
    if (s == "vit" || s == "mlp") return Variant::Vit;
    if (s == "effkan") return Variant::EffKanVit;
    if (s == "wavkan") return Variant::WavKanVit;
    if (s == "hybrid1") return Variant::Hybrid1;
    if (s == "hybrid2") return Variant::Hybrid2;
    throw ConfigError("unknown variant '" + s + "'");
}

inline SizePreset parse_size(const std::string& s) {
    if (s == "tiny") return SizePreset::Tiny;
    if (s == "small") return SizePreset::Small;
    if (s == "base") return SizePreset::Base;
    if (s == "custom") return SizePreset::Custom;
    throw ConfigError("unknown size '" + s + "'");
}

inline WaveletKind parse_wavelet(const std::string& s) {
    if (s == "dog") return WaveletKind::DoG;
    if (s == "mexican_hat" || s == "mexhat") return WaveletKind::MexicanHat;
    if (s == "morlet") return WaveletKind::Morlet;
    throw ConfigError("unknown wavelet '" + s + "'");
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

template <typename F>
F parse_num(const std::string& key, const std::string& val, F (*conv)(const std::string&)) {
    try {
        return conv(val);
    } catch (const std::exception&) {
        throw ConfigError("invalid value for key '" + key + "': " + val);
    }
}

inline double to_f(const std::string& s) { return std::stod(s); }
inline std::size_t to_u(const std::string& s) { return std::stoull(s); }
inline std::uint64_t to_u64(const std::string& s) { return std::stoull(s); }
inline int to_i(const std::string& s) { return std::stoi(s); }

inline std::vector<std::size_t> to_dims(const std::string& s) {
    std::vector<std::size_t> dims;
    std::istringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) dims.push_back(std::stoull(tok));
    }
    return dims;
}

}  // namespace detail

// Applies one key = value pair; unknown keys raise a named-key error.
inline void config_set(RunConfig& c, const std::string& key, const std::string& val) {
    using namespace detail;
    auto f = [&] { return parse_num<double>(key, val, to_f); };
    auto u = [&] { return parse_num<std::size_t>(key, val, to_u); };
    auto i = [&] { return parse_num<int>(key, val, to_i); };

    // run selection
    if (key == "variant") c.variant = parse_variant(val);
    else if (key == "size") c.size = parse_size(val);
    // model shape
    else if (key == "patch_size") c.model.patch_size = u();
    else if (key == "image_size") c.model.image_size = u();
    else if (key == "in_channels") c.model.in_channels = u();
    else if (key == "depth") c.model.depth = u();
    else if (key == "heads") c.model.heads = u();
    else if (key == "dim") c.model.dim = u();
    else if (key == "ffn_width") c.model.ffn_width = u();
    else if (key == "num_classes") c.model.num_classes = u();
    // spline hyperparameters
    else if (key == "grid_size") c.model.spline.grid_size = i();
    else if (key == "spline_order") c.model.spline.order = i();
    else if (key == "grid_range_lo") c.model.spline.range_lo = f();
    else if (key == "grid_range_hi") c.model.spline.range_hi = f();
    else if (key == "grid_eps") { c.model.spline.grid_eps = f(); c.model.wavelet.grid_eps = f(); }
    else if (key == "scale_noise") { c.model.spline.scale_noise = f(); c.model.wavelet.scale_noise = f(); }
    else if (key == "scale_base") { c.model.spline.scale_base = f(); c.model.wavelet.scale_base = f(); }
    else if (key == "scale_spline") c.model.spline.scale_spline = f();
    // wavelet hyperparameters
    else if (key == "wavelet") { c.model.ffn_wavelet = parse_wavelet(val); c.model.head_wavelet = parse_wavelet(val); c.model.wavelet.kind = parse_wavelet(val); }
    else if (key == "decomposition_levels") c.model.wavelet.decomposition_levels = i();
    else if (key == "num_scales") c.model.wavelet.num_scales = i();
    else if (key == "initial_scale") c.model.wavelet.initial_scale = f();
    else if (key == "central_frequency") c.model.wavelet.central_frequency = f();
    else if (key == "prune_ratio") c.model.wavelet.prune_ratio = f();
    // optimizer
    else if (key == "lr_base") c.train.opt.lr_base = f();
    else if (key == "beta1") c.train.opt.beta1 = f();
    else if (key == "beta2") c.train.opt.beta2 = f();
    else if (key == "eps") c.train.opt.eps = f();
    else if (key == "weight_decay") c.train.opt.weight_decay = f();
    else if (key == "clip_norm") c.train.opt.clip_norm = f();
    else if (key == "warmup_epochs") c.train.opt.warmup_epochs = u();
    else if (key == "total_epochs") c.train.opt.total_epochs = u();
    else if (key == "min_lr") c.train.opt.min_lr = f();
    else if (key == "label_smoothing") c.train.opt.label_smoothing = f();
    else if (key == "ema_decay") c.train.opt.ema_decay = f();
    else if (key == "batch_size") c.train.batch_size = u();
    // dataset
    else if (key == "dataset") c.dataset = val;
    else if (key == "synthetic_seed") c.synthetic_seed = parse_num<std::uint64_t>(key, val, to_u64);
    else if (key == "synthetic_train") c.synthetic_train = u();
    else if (key == "synthetic_eval") c.synthetic_eval = u();
    else if (key == "mnist_train_images") c.mnist_train_images = val;
    else if (key == "mnist_train_labels") c.mnist_train_labels = val;
    else if (key == "mnist_test_images") c.mnist_test_images = val;
    else if (key == "mnist_test_labels") c.mnist_test_labels = val;
    else if (key == "cifar_train_batches") { c.cifar_train_batches.clear(); std::istringstream ss(val); std::string t; while (std::getline(ss, t, ',')) c.cifar_train_batches.push_back(detail::trim(t)); }
    else if (key == "cifar_test_batches") { c.cifar_test_batches.clear(); std::istringstream ss(val); std::string t; while (std::getline(ss, t, ',')) c.cifar_test_batches.push_back(detail::trim(t)); }
    // bench
    else if (key == "bench_dims") c.bench_dims = to_dims(val);
    else if (key == "bench_batch") c.bench_batch = u();
    else if (key == "bench_repeats") c.bench_repeats = i();
    else if (key == "bench_warmup") c.bench_warmup = i();
    else if (key == "bench_format") c.bench_format = val;
    else throw ConfigError("unknown config key '" + key + "'");
}

// Flat `key = value` file: blank lines and '#' comments ignored.
inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + " has no '='");
        config_set(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return base;
}

// Final model config for a run: preset shape (when not custom) + variant wiring.
inline ModelConfig resolve_model_config(const RunConfig& rc) {
    ModelConfig cfg = rc.model;
    if (rc.size != SizePreset::Custom) {
        const ModelConfig p = ModelConfig::preset(rc.size);
        cfg.depth = p.depth;
        cfg.heads = p.heads;
        cfg.dim = p.dim;
        cfg.ffn_width = p.ffn_width;
    }
    apply_variant(cfg, rc.variant);
    cfg.validate();
    return cfg;
}

}  // namespace hybkan
