#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hybkan/bench.hpp"
#include "hybkan/config.hpp"
#include "hybkan/data.hpp"
#include "hybkan/train.hpp"
#include "hybkan/vit.hpp"

namespace hybkan {

namespace cli_detail {

struct GlobalOpts {
    std::string config_path;
    std::uint64_t seed = 42;
    bool seed_set = false;
    int threads = 1;
    int precision = 32;
    std::string out = ".";
};

inline std::uint64_t resolve_seed(const GlobalOpts& g) {
    if (g.seed_set) return g.seed;
    if (const char* env = std::getenv("HYBKAN_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("HYBKAN_SEED is not a valid unsigned integer");
        }
    }
    return g.seed;
}

template <typename T>
std::pair<Dataset<T>, Dataset<T>> load_datasets(const RunConfig& rc, std::size_t image_size) {
    if (rc.dataset == "synthetic") {
        return {make_synthetic<T>(rc.synthetic_seed, rc.synthetic_train, image_size),
                make_synthetic<T>(rc.synthetic_seed + 1, rc.synthetic_eval, image_size)};
    }
    if (rc.dataset == "mnist") {
        return {load_mnist<T>(rc.mnist_train_images, rc.mnist_train_labels),
                load_mnist<T>(rc.mnist_test_images, rc.mnist_test_labels)};
    }
    if (rc.dataset == "cifar10") {
        return {load_cifar10<T>(rc.cifar_train_batches), load_cifar10<T>(rc.cifar_test_batches)};
    }
    throw ConfigError("unknown dataset '" + rc.dataset + "'");
}

template <typename T>
int run_train(RunConfig rc, const GlobalOpts& g) {
    ModelConfig cfg = resolve_model_config(rc);
    auto [train_set, eval_set] = load_datasets<T>(rc, cfg.image_size);
    cfg.image_size = train_set.height;
    cfg.in_channels = train_set.channels;
    cfg.num_classes = train_set.num_classes;
    cfg.validate();

    Model<T> model;
    model.init(cfg, resolve_seed(g));
    TrainConfig tc = rc.train;
    tc.out_dir = g.out;
    std::filesystem::create_directories(g.out);
    auto history = train(model, train_set, eval_set, tc, resolve_seed(g));
    const auto& last_eval = history.back();
    std::cout << "trained " << variant_name(rc.variant) << " for " << tc.opt.total_epochs
              << " epochs: eval loss " << last_eval.loss << " top1 " << last_eval.top1 << " top5 "
              << last_eval.top5 << "\n"
              << "artifacts in " << g.out << "\n";
    return 0;
}

template <typename T>
int run_eval(RunConfig rc, const GlobalOpts& g, const std::string& ckpt_path) {
    ModelConfig cfg = resolve_model_config(rc);
    auto [train_set, eval_set] = load_datasets<T>(rc, cfg.image_size);
    (void)train_set;
    cfg.image_size = eval_set.height;
    cfg.in_channels = eval_set.channels;
    cfg.num_classes = eval_set.num_classes;
    cfg.validate();
    Model<T> model;
    model.init(cfg, resolve_seed(g));
    if (!ckpt_path.empty()) load_model_from_checkpoint(model, checkpoint_read(ckpt_path));
    EvalResult r = evaluate(model, eval_set);
    std::cout << "eval loss " << r.loss << " top1 " << r.top1 << " top5 " << r.top5 << "\n";
    return 0;
}

inline int run_count(const RunConfig& rc) {
    ModelConfig cfg = resolve_model_config(rc);
    std::cout << "variant " << variant_name(rc.variant) << " size " << size_name(rc.size)
              << " params " << count_params_analytic(cfg) << " gflops " << count_gflops(cfg)
              << "\n";
    return 0;
}

template <typename T>
int run_bench(const RunConfig& rc, const GlobalOpts& g) {
    std::filesystem::create_directories(g.out);
    BenchReport report = bench_layer_sweep<T>(rc.variant, rc.bench_dims, rc.bench_batch,
                                              rc.bench_repeats, rc.bench_warmup, resolve_seed(g));
    const std::string ext = rc.bench_format == "json" ? ".json" : ".csv";
    const std::string path = g.out + "/bench" + ext;
    emit_report(report, rc.bench_format, path);
    std::cout << bench_csv_header() << "\n";
    for (const auto& r : report.rows) std::cout << bench_row_csv(r) << "\n";
    std::cout << "report written to " << path << "\n";
    return 0;
}

// --- gradcheck ------------------------------------------------------------

inline double fd_slot(double& slot, const std::function<double()>& loss) {
    const double v0 = slot;
    const double h = 1e-5 * std::max(1.0, std::abs(v0));
    slot = v0 + h;
    const double fp = loss();
    slot = v0 - h;
    const double fm = loss();
    slot = v0;
    return (fp - fm) / (2.0 * h);
}

inline bool grad_ok(double analytic, double numeric, double& max_rel) {
    const double mag = std::max(std::abs(analytic), std::abs(numeric));
    if (mag < 1e-4) {
        max_rel = std::max(max_rel, std::abs(analytic - numeric));
        return std::abs(analytic - numeric) < 1e-7;
    }
    const double rel = std::abs(analytic - numeric) / mag;
    max_rel = std::max(max_rel, rel);
    return rel < 1e-4;
}

struct GradCheckResult {
    std::string component;
    std::size_t slots_checked = 0;
    std::size_t failures = 0;
    double max_rel = 0.0;
};

// Strided FD audit of every parameter tensor of one encoder block plus its
// input, for the given FFN kind; covers attention, norms, FFN, and heads.
inline GradCheckResult gradcheck_block(FfnKind kind, WaveletKind wkind,
                                       const std::string& label) {
    ModelConfig c;
    c.patch_size = 4;
    c.image_size = 8;
    c.in_channels = 1;
    c.depth = 1;
    c.heads = 2;
    c.dim = 8;
    c.ffn_width = 12;
    c.num_classes = 3;
    c.ffn_kind = kind;
    c.ffn_wavelet = wkind;
    c.wavelet.decomposition_levels = 2;
    c.wavelet.prune_ratio = 0.0;  // fixed mask so the loss is differentiable
    Rng rng(311);
    EncoderBlock<double> blk;
    blk.init(c, rng);

    Rng data_rng(7);
    Tensor<double> x({3, c.dim}), w({3, c.dim});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.7 * data_rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = data_rng.uniform(-1.0, 1.0);

    auto loss = [&]() {
        Tensor<double> y = blk.forward(x, nullptr);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
        return s;
    };

    typename EncoderBlock<double>::Cache cache;
    blk.zero_grads();
    (void)blk.forward(x, &cache);
    Tensor<double> dx = blk.backward(cache, w);

    GradCheckResult res;
    res.component = label;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double num = fd_slot(x[i], loss);
        ++res.slots_checked;
        if (!grad_ok(dx[i], num, res.max_rel)) ++res.failures;
    }
    std::vector<ParamRef<double>> params;
    blk.collect_params(params, label);
    for (auto& p : params) {
        const std::size_t stride = std::max<std::size_t>(1, p.len / 9);
        for (std::size_t i = 0; i < p.len; i += stride) {
            const double num = fd_slot(p.value[i], loss);
            ++res.slots_checked;
            if (!grad_ok(p.grad[i], num, res.max_rel)) ++res.failures;
        }
    }
    return res;
}

inline GradCheckResult gradcheck_head(HeadKind kind, const std::string& label) {
    ModelConfig c;
    c.dim = 8;
    c.heads = 2;
    c.num_classes = 4;
    c.head_kind = kind;
    c.wavelet.decomposition_levels = 2;
    c.wavelet.prune_ratio = 0.0;
    Rng rng(101);
    Head<double> head;
    head.init(c, rng);
    if (kind == HeadKind::WavKan) head.wk.training = true;

    Rng data_rng(5);
    Tensor<double> x({2, c.dim}), w({2, c.num_classes});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.8 * data_rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = data_rng.uniform(-1.0, 1.0);
    auto loss = [&]() {
        typename Head<double>::Cache cc;
        Tensor<double> y = head.forward(x, &cc);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
        return s;
    };
    typename Head<double>::Cache cache;
    head.zero_grads();
    (void)head.forward(x, &cache);
    Tensor<double> dx = head.backward(cache, w);
    GradCheckResult res;
    res.component = label;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double num = fd_slot(x[i], loss);
        ++res.slots_checked;
        if (!grad_ok(dx[i], num, res.max_rel)) ++res.failures;
    }
    std::vector<ParamRef<double>> params;
    head.collect_params(params, label);
    for (auto& p : params) {
        const std::size_t stride = std::max<std::size_t>(1, p.len / 9);
        for (std::size_t i = 0; i < p.len; i += stride) {
            const double num = fd_slot(p.value[i], loss);
            ++res.slots_checked;
            if (!grad_ok(p.grad[i], num, res.max_rel)) ++res.failures;
        }
    }
    return res;
}

inline GradCheckResult gradcheck_loss() {
    Rng rng(3);
    Tensor<double> logits({4, 10});
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = rng.uniform(-2.0, 2.0);
    std::vector<int> labels{0, 3, 9, 5};
    Tensor<double> dlogits;
    (void)loss_ce_smoothed(logits, labels, 0.1, &dlogits);
    auto loss = [&]() { return loss_ce_smoothed(logits, labels, 0.1); };
    GradCheckResult res;
    res.component = "loss_ce_smoothed";
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double num = fd_slot(logits[i], loss);
        ++res.slots_checked;
        if (!grad_ok(dlogits[i], num, res.max_rel)) ++res.failures;
    }
    return res;
}

inline int run_gradcheck(const GlobalOpts& g) {
    // Finite-difference arithmetic needs 64-bit headroom; the suite always
    // runs in double regardless of the run precision flag.
    std::vector<GradCheckResult> results;
    results.push_back(gradcheck_block(FfnKind::Mlp, WaveletKind::DoG, "block_mlp"));
    results.push_back(gradcheck_block(FfnKind::EffKan, WaveletKind::DoG, "block_effkan"));
    results.push_back(gradcheck_block(FfnKind::WavKan, WaveletKind::DoG, "block_wavkan_dog"));
    results.push_back(gradcheck_block(FfnKind::WavKan, WaveletKind::MexicanHat,
                                      "block_wavkan_mexhat"));
    results.push_back(gradcheck_block(FfnKind::WavKan, WaveletKind::Morlet, "block_wavkan_morlet"));
    results.push_back(gradcheck_head(HeadKind::Linear, "head_linear"));
    results.push_back(gradcheck_head(HeadKind::EffKan, "head_effkan"));
    results.push_back(gradcheck_head(HeadKind::WavKan, "head_wavkan"));
    results.push_back(gradcheck_loss());

    bool all_pass = true;
    for (const auto& r : results) {
        const bool ok = r.failures == 0;
        all_pass = all_pass && ok;
        std::cout << (ok ? "PASS" : "FAIL") << " " << r.component << " slots " << r.slots_checked
                  << " max_rel " << r.max_rel << "\n";
    }

    // Audit of the published closed-form wavelet gradients vs finite
    // differences of the kernel definitions.
    std::filesystem::create_directories(g.out);
    const std::string audit_path = g.out + "/gradient_audit.csv";
    std::ofstream audit(audit_path, std::ios::trunc);
    audit << "equation,max_dev_printed,max_dev_shipped,printed_agrees,shipped_agrees\n";
    for (const auto& row : gradient_audit()) {
        audit << row.equation << ',' << row.max_dev_printed << ',' << row.max_dev_shipped << ','
              << (row.printed_agrees ? "true" : "false") << ','
              << (row.shipped_agrees ? "true" : "false") << "\n";
        std::cout << (row.shipped_agrees ? "PASS" : "FAIL") << " shipped gradient for "
                  << row.equation << " (printed form "
                  << (row.printed_agrees ? "agrees" : "deviates, max dev ")
                  << (row.printed_agrees ? "" : std::to_string(row.max_dev_printed)) << ")\n";
        all_pass = all_pass && row.shipped_agrees;
    }
    std::cout << "audit written to " << audit_path << "\n";
    std::cout << (all_pass ? "gradcheck: all shipped gradients pass\n"
                           : "gradcheck: FAILURES detected\n");
    return all_pass ? 0 : 1;
}

}  // namespace cli_detail

// In-process CLI entry point (the binary's main forwards argv here).
inline int cli(int argc, const char* const* argv) {
    using namespace cli_detail;
    CLI::App app{"hybkan: spline/wavelet function-learning layers in a vision transformer"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may appear after the subcommand

    GlobalOpts g;
    app.add_option("--config", g.config_path, "flat key = value config file");
    auto* seed_opt = app.add_option("--seed", g.seed, "run seed (fallback: HYBKAN_SEED, then 42)");
    app.add_option("--threads", g.threads, "worker threads (1 = deterministic)");
    app.add_option("--precision", g.precision, "floating-point width")
        ->check(CLI::IsMember({32, 64}));
    app.add_option("--out", g.out, "output directory for artifacts");

    std::string variant_str, size_str, ckpt_path, format_str;
    std::vector<std::size_t> dims_override;

    auto* sc_train = app.add_subcommand("train", "train a model on the configured dataset");
    sc_train->add_option("--variant", variant_str, "vit|effkan|wavkan|hybrid1|hybrid2");
    sc_train->add_option("--size", size_str, "tiny|small|base|custom");

    auto* sc_eval = app.add_subcommand("eval", "evaluate a checkpoint on the eval split");
    sc_eval->add_option("--variant", variant_str, "vit|effkan|wavkan|hybrid1|hybrid2");
    sc_eval->add_option("--size", size_str, "tiny|small|base|custom");
    sc_eval->add_option("--checkpoint", ckpt_path, "checkpoint file to load");

    auto* sc_count = app.add_subcommand("count", "print parameter and GFLOP counts");
    sc_count->add_option("--variant", variant_str, "vit|effkan|wavkan|hybrid1|hybrid2");
    sc_count->add_option("--size", size_str, "tiny|small|base|custom");

    auto* sc_bench = app.add_subcommand("bench", "throughput / peak-memory layer sweep");
    sc_bench->add_option("--variant", variant_str, "vit|effkan|wavkan|hybrid1|hybrid2");
    sc_bench->add_option("--dims", dims_override, "input dimensions to sweep");
    sc_bench->add_option("--format", format_str, "csv|json");

    auto* sc_gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    (void)sc_gradcheck;

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }
    g.seed_set = seed_opt->count() > 0;

    try {
        RunConfig rc;
        if (!g.config_path.empty()) rc = load_config(g.config_path);
        if (!variant_str.empty()) rc.variant = parse_variant(variant_str);
        if (!size_str.empty()) rc.size = parse_size(size_str);
        if (!dims_override.empty()) rc.bench_dims = dims_override;
        if (!format_str.empty()) rc.bench_format = format_str;

        if (app.got_subcommand(sc_count)) return run_count(rc);
        if (app.got_subcommand(sc_gradcheck)) return run_gradcheck(g);
        if (app.got_subcommand(sc_train))
            return g.precision == 64 ? run_train<double>(rc, g) : run_train<float>(rc, g);
        if (app.got_subcommand(sc_eval))
            return g.precision == 64 ? run_eval<double>(rc, g, ckpt_path)
                                     : run_eval<float>(rc, g, ckpt_path);
        if (app.got_subcommand(sc_bench))
            return g.precision == 64 ? run_bench<double>(rc, g) : run_bench<float>(rc, g);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << app.help();
    return 2;
}

}  // namespace hybkan
