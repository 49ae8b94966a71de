// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Skips (with an explanation) are reported when required external
// data is absent from the environment.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hybkan/cli.hpp"

using namespace hybkan;

namespace {

int g_failures = 0;

void report(const std::string& id, bool pass, const std::string& detail) {
    std::cout << id << ": " << (pass ? "PASS" : "FAIL") << " — " << detail << std::endl;
    if (!pass) ++g_failures;
}

void report_skip(const std::string& id, const std::string& why) {
    std::cout << id << ": SKIP — " << why << std::endl;
}

std::filesystem::path work_dir() {
    auto p = std::filesystem::temp_directory_path() / "hybkan_acceptance";
    std::filesystem::create_directories(p);
    return p;
}

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

void a1_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    using cli_detail::GradCheckResult;
    std::vector<GradCheckResult> results;
    results.push_back(cli_detail::gradcheck_block(FfnKind::Mlp, WaveletKind::DoG, "mlp"));
    results.push_back(cli_detail::gradcheck_block(FfnKind::EffKan, WaveletKind::DoG, "effkan"));
    results.push_back(cli_detail::gradcheck_block(FfnKind::WavKan, WaveletKind::DoG, "wk_dog"));
    results.push_back(
        cli_detail::gradcheck_block(FfnKind::WavKan, WaveletKind::MexicanHat, "wk_mexhat"));
    results.push_back(
        cli_detail::gradcheck_block(FfnKind::WavKan, WaveletKind::Morlet, "wk_morlet"));
    results.push_back(cli_detail::gradcheck_head(HeadKind::Linear, "head_linear"));
    results.push_back(cli_detail::gradcheck_head(HeadKind::EffKan, "head_effkan"));
    results.push_back(cli_detail::gradcheck_head(HeadKind::WavKan, "head_wavkan"));
    results.push_back(cli_detail::gradcheck_loss());
    std::size_t slots = 0, fails = 0;
    double worst = 0.0;
    for (const auto& r : results) {
        slots += r.slots_checked;
        fails += r.failures;
        worst = std::max(worst, r.max_rel);
    }
    const double secs = elapsed_s(t0);
    std::ostringstream d;
    d << slots << " parameter slots across attention/MLP/EffKAN/WavKAN(3 kinds)/heads/loss, "
      << fails << " failures, worst rel dev " << worst << ", " << secs << " s";
    report("A1", fails == 0 && secs < 120.0, d.str());
}

void a2_audit() {
    auto rows = gradient_audit();
    bool shipped_ok = rows.size() == 4;
    double worst_shipped = 0.0;
    for (const auto& r : rows) {
        shipped_ok = shipped_ok && r.shipped_agrees && r.max_dev_shipped < 1e-6;
        worst_shipped = std::max(worst_shipped, r.max_dev_shipped);
    }
    const auto dir = work_dir();
    std::ofstream audit(dir / "gradient_audit.csv", std::ios::trunc);
    audit << "equation,max_dev_printed,max_dev_shipped,printed_agrees,shipped_agrees\n";
    std::ostringstream printed;
    for (const auto& r : rows) {
        audit << r.equation << ',' << r.max_dev_printed << ',' << r.max_dev_shipped << ','
              << (r.printed_agrees ? "true" : "false") << ','
              << (r.shipped_agrees ? "true" : "false") << '\n';
        if (!r.printed_agrees) printed << " [" << r.equation << " printed form deviates]";
    }
    std::ostringstream d;
    d << "shipped gradients within " << worst_shipped << " of finite differences;"
      << printed.str() << " report at " << (dir / "gradient_audit.csv").string();
    report("A2", shipped_ok, d.str());
}

void a3_roundtrip() {
    Rng rng(29);
    double worst = 0.0;
    for (int L = 0; L <= 6; ++L) {
        for (int it = 0; it < 100; ++it) {
            Tensor<double> x({std::size_t(2), std::size_t(48)});
            for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-2.0, 2.0);
            Tensor<double> back = iwt(fwt(x, L));
            for (std::size_t i = 0; i < x.size(); ++i)
                worst = std::max(worst, std::abs(back[i] - x[i]));
        }
    }
    std::ostringstream d;
    d << "iwt(fwt(x,L)) max abs error " << worst << " over L in 0..6, 100 inputs each";
    report("A3", worst < 1e-12, d.str());
}

void a4_spline() {
    const SplineGrid g = SplineGrid::make(-1.5, 1.5, 5, 3, 0.02);
    std::vector<double> basis(static_cast<std::size_t>(g.basis_count()));
    // Partition of unity on 10^4 points.
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double x = -1.5 + 3.0 * i / 9999.0;
        bspline_basis_at(x, g, basis.data());
        double s = 0.0;
        for (double b : basis) s += b;
        worst = std::max(worst, std::abs(s - 1.0));
    }
    // Local support: each basis function vanishes exactly outside its knot span.
    bool support_ok = true;
    const double h = 3.0 / 5.0;
    for (int j = 0; j < g.basis_count(); ++j) {
        const double lo = -1.5 + (j - 3) * h, hi = lo + 4.0 * h;
        for (int i = 0; i < 2000; ++i) {
            const double x = -1.5 + 3.0 * i / 1999.0;
            bspline_basis_at(x, g, basis.data());
            if ((x < lo - 1e-12 || x > hi + 1e-12) && basis[static_cast<std::size_t>(j)] != 0.0)
                support_ok = false;
        }
    }
    // Cubic central value: a cardinal cubic B-spline evaluated at the middle
    // knot of its support equals 2/3 (hand-evaluated Cox-de Boor oracle).
    // With grid [-1.5, 1.5] and G = 5, interior knots sit at -1.5 + i*0.6;
    // x = -0.3 is the support center of one basis function.
    bspline_basis_at(-0.3, g, basis.data());
    double central = 0.0;
    for (double b : basis) central = std::max(central, b);
    const double central_err = std::abs(central - 2.0 / 3.0);
    std::ostringstream d;
    d << "partition-of-unity dev " << worst << ", local support "
      << (support_ok ? "exact" : "violated") << ", central-value dev " << central_err;
    report("A4", worst < 1e-10 && support_ok && central_err < 1e-12, d.str());
}

void a5_pruning() {
    Rng rng(31);
    bool ok = true;
    std::ostringstream d;
    // Table-1 defaults: rho = 0.4, L = 4 -> exactly one band zeroed per row.
    {
        std::vector<Tensor<double>> details(4);
        for (auto& t : details) {
            t = Tensor<double>({std::size_t(6), std::size_t(9)});
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
        }
        Tensor<double> mask = prune_mask(details, 0.4);
        for (std::size_t r = 0; r < 6; ++r) {
            int zeroed = 0;
            for (std::size_t j = 0; j < 4; ++j)
                if (mask.at(r, j) == 0.0) ++zeroed;
            if (zeroed != 1) ok = false;
        }
    }
    // Sweep: pruned count == floor(rho * L) for every rho and L.
    for (int L = 1; L <= 6 && ok; ++L) {
        std::vector<Tensor<double>> details(static_cast<std::size_t>(L));
        for (auto& t : details) {
            t = Tensor<double>({std::size_t(3), std::size_t(7)});
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
        }
        for (double rho : {0.0, 0.1, 0.25, 0.4, 0.5, 0.75, 0.99, 1.0}) {
            Tensor<double> mask = prune_mask(details, rho);
            const int expect = static_cast<int>(std::floor(rho * L));
            for (std::size_t r = 0; r < 3; ++r) {
                int zeroed = 0;
                for (int j = 0; j < L; ++j)
                    if (mask.at(r, static_cast<std::size_t>(j)) == 0.0) ++zeroed;
                if (zeroed != expect) ok = false;
            }
        }
    }
    d << "floor(rho*L) bands zeroed per row across rho grid and L in 1..6";
    report("A5", ok, d.str());
}

void a6_params() {
    std::ostringstream d;
    bool ok = true;
    const std::vector<Variant> variants{Variant::Vit, Variant::EffKanVit, Variant::WavKanVit,
                                        Variant::Hybrid1, Variant::Hybrid2};
    // Exact analytic == enumeration for every variant at Tiny and Small (and
    // ViT at Base; KAN variants at Base exceed the memory budget of this
    // container, and the formulas are dimension-generic).
    ModelConfig base;
    base.num_classes = 1000;
    for (SizePreset size : {SizePreset::Tiny, SizePreset::Small}) {
        for (Variant v : variants) {
            auto m = build_model<float>(v, size, base, 1);
            if (m.count_params() != count_params_analytic(m.cfg)) {
                ok = false;
                d << " mismatch " << variant_name(v) << "/" << size_name(size);
            }
        }
    }
    {
        auto m = build_model<float>(Variant::Vit, SizePreset::Base, base, 1);
        if (m.count_params() != count_params_analytic(m.cfg)) ok = false;
    }
    // Published baselines within 5%.
    ModelConfig small = ModelConfig::preset(SizePreset::Small);
    small.num_classes = 1000;
    apply_variant(small, Variant::Vit);
    const double ps = static_cast<double>(count_params_analytic(small));
    ModelConfig tiny = ModelConfig::preset(SizePreset::Tiny);
    tiny.num_classes = 1000;
    apply_variant(tiny, Variant::Vit);
    const double pt = static_cast<double>(count_params_analytic(tiny));
    const bool targets = std::abs(ps - 22.4e6) / 22.4e6 < 0.05 &&
                         std::abs(pt - 5.7e6) / 5.7e6 < 0.05;
    // Small-size ordering: wavkan < hybrid1 < hybrid2 < effkan.
    std::vector<std::size_t> counts;
    for (Variant v : {Variant::WavKanVit, Variant::Hybrid1, Variant::Hybrid2, Variant::EffKanVit}) {
        ModelConfig c = ModelConfig::preset(SizePreset::Small);
        c.num_classes = 1000;
        apply_variant(c, v);
        counts.push_back(count_params_analytic(c));
    }
    const bool ordering = counts[0] < counts[1] && counts[1] < counts[2] && counts[2] < counts[3];
    d << "enumeration==analytic (5 variants x tiny/small, vit/base); ViT-S "
      << ps / 1e6 << "M vs 22.4M, ViT-T " << pt / 1e6 << "M vs 5.7M; small ordering "
      << counts[0] / 1e6 << " < " << counts[1] / 1e6 << " < " << counts[2] / 1e6 << " < "
      << counts[3] / 1e6 << " (M)";
    report("A6", ok && targets && ordering, d.str());
}

void a7_flops() {
    ModelConfig small = ModelConfig::preset(SizePreset::Small);
    small.num_classes = 1000;
    apply_variant(small, Variant::Vit);
    const double g_vit = count_gflops(small);
    ModelConfig eff = ModelConfig::preset(SizePreset::Small);
    eff.num_classes = 1000;
    apply_variant(eff, Variant::EffKanVit);
    const double g_eff = count_gflops(eff);
    ModelConfig wav = ModelConfig::preset(SizePreset::Small);
    wav.num_classes = 1000;
    apply_variant(wav, Variant::WavKanVit);
    const double g_wav = count_gflops(wav);
    const bool in_band = g_vit > 4.25 * 0.85 && g_vit < 4.25 * 1.15;
    std::ostringstream d;
    d << "ViT-S " << g_vit << " GFLOPs (target 4.25 +/- 15%); WavKAN-S " << g_wav
      << " < EffKAN-S " << g_eff;
    report("A7", in_band && g_wav < g_eff, d.str());
}

struct A8Run {
    std::string name;
    bool ok = false;
    double top1 = 0.0, ratio = 1.0, secs = 0.0;
};

template <typename T>
A8Run a8_one_synthetic(Variant v) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig c;
    c.patch_size = 4;
    c.image_size = 16;
    c.in_channels = 1;
    c.depth = 2;
    c.heads = 2;
    c.dim = 32;
    c.ffn_width = 64;
    c.num_classes = 2;
    c.wavelet.decomposition_levels = 2;
    auto model = build_model<T>(v, SizePreset::Custom, c, 11);
    Dataset<T> tr = make_synthetic<T>(101, 1024, c.image_size);
    Dataset<T> ev = make_synthetic<T>(202, 256, c.image_size);
    const double initial = evaluate(model, tr).loss;  // pre-training CE
    TrainConfig tc;
    tc.opt.warmup_epochs = 1;
    tc.opt.total_epochs = 3;
    tc.opt.lr_base = 2e-3;
    tc.opt.label_smoothing = 0.0;
    tc.batch_size = 16;
    auto hist = train(model, tr, ev, tc, 13);
    A8Run r;
    r.name = variant_name(v);
    r.top1 = hist.back().top1;
    const double final_loss = hist[hist.size() - 2].loss;
    r.ratio = final_loss / initial;
    r.ok = r.top1 >= 0.95 && r.ratio < 0.2;
    r.secs = elapsed_s(t0);
    return r;
}

void a8_learning() {
    // MNIST half: requires the IDX files on disk (HYBKAN_MNIST_DIR or
    // ./data/mnist). The container has no route to fetch them.
    std::string mnist_dir = "data/mnist";
    if (const char* env = std::getenv("HYBKAN_MNIST_DIR")) mnist_dir = env;
    const bool mnist_present =
        std::filesystem::exists(mnist_dir + "/train-images-idx3-ubyte") &&
        std::filesystem::exists(mnist_dir + "/train-labels-idx1-ubyte") &&
        std::filesystem::exists(mnist_dir + "/t10k-images-idx3-ubyte") &&
        std::filesystem::exists(mnist_dir + "/t10k-labels-idx1-ubyte");
    if (!mnist_present) {
        report_skip("A8-mnist",
                    "MNIST IDX files not found in '" + mnist_dir +
                        "' (set HYBKAN_MNIST_DIR); this environment has no network route to "
                        "download them, so the MNIST half cannot run here");
    } else {
        bool all_ok = true;
        std::ostringstream d;
        Dataset<float> tr = load_mnist<float>(mnist_dir + "/train-images-idx3-ubyte",
                                              mnist_dir + "/train-labels-idx1-ubyte");
        Dataset<float> ev = load_mnist<float>(mnist_dir + "/t10k-images-idx3-ubyte",
                                              mnist_dir + "/t10k-labels-idx1-ubyte");
        for (Variant v : {Variant::Vit, Variant::EffKanVit, Variant::WavKanVit, Variant::Hybrid1}) {
            const auto t0 = std::chrono::steady_clock::now();
            ModelConfig c;
            c.patch_size = 4;
            c.image_size = 28;
            c.in_channels = 1;
            c.depth = 4;
            c.heads = 4;
            c.dim = 64;
            c.ffn_width = 128;
            c.num_classes = 10;
            c.wavelet.decomposition_levels = 2;
            auto model = build_model<float>(v, SizePreset::Custom, c, 11);
            TrainConfig tc;
            tc.opt.warmup_epochs = 1;
            tc.opt.total_epochs = 3;
            tc.opt.lr_base = 1e-3;
            tc.batch_size = 64;
            auto hist = train(model, tr, ev, tc, 13);
            const double top1 = hist.back().top1;
            const double secs = elapsed_s(t0);
            const bool ok = top1 >= 0.95 && secs < 1200.0;
            all_ok = all_ok && ok;
            d << " " << variant_name(v) << " top1 " << top1 << " (" << secs << " s)";
        }
        report("A8-mnist", all_ok, d.str());
    }

    // Synthetic half: every variant.
    bool all_ok = true;
    std::ostringstream d;
    for (Variant v : {Variant::Vit, Variant::EffKanVit, Variant::WavKanVit, Variant::Hybrid1,
                      Variant::Hybrid2}) {
        A8Run r = a8_one_synthetic<float>(v);
        all_ok = all_ok && r.ok;
        d << " " << r.name << " top1 " << r.top1 << " loss x" << r.ratio << " (" << r.secs
          << " s)";
    }
    report("A8-synthetic", all_ok, "every variant, 3 epochs:" + d.str());
}

void a9_determinism() {
    const auto dir = work_dir();
    auto run = [&](const std::string& tag) {
        const auto out = dir / ("det_" + tag);
        std::filesystem::remove_all(out);
        std::filesystem::create_directories(out);
        ModelConfig c;
        c.patch_size = 4;
        c.image_size = 16;
        c.in_channels = 1;
        c.depth = 2;
        c.heads = 2;
        c.dim = 16;
        c.ffn_width = 32;
        c.num_classes = 2;
        c.wavelet.decomposition_levels = 2;
        auto model = build_model<double>(Variant::Hybrid1, SizePreset::Custom, c, 47);
        Dataset<double> tr = make_synthetic<double>(301, 96, c.image_size);
        TrainConfig tc;
        tc.opt.warmup_epochs = 1;
        tc.opt.total_epochs = 2;
        tc.batch_size = 16;
        tc.out_dir = out.string();
        return std::make_pair(train(model, tr, tr, tc, 47), out);
    };
    auto [h1, o1] = run("a");
    auto [h2, o2] = run("b");
    bool traces = h1.size() == h2.size();
    for (std::size_t i = 0; traces && i < h1.size(); ++i)
        traces = h1[i].loss == h2[i].loss && h1[i].top1 == h2[i].top1;
    bool files = true;
    for (int e = 0; e < 2; ++e) {
        std::ifstream a(o1 / ("checkpoint_epoch" + std::to_string(e) + ".ckpt"),
                        std::ios::binary);
        std::ifstream b(o2 / ("checkpoint_epoch" + std::to_string(e) + ".ckpt"),
                        std::ios::binary);
        std::vector<char> ba((std::istreambuf_iterator<char>(a)),
                             std::istreambuf_iterator<char>());
        std::vector<char> bb((std::istreambuf_iterator<char>(b)),
                             std::istreambuf_iterator<char>());
        files = files && !ba.empty() && ba == bb;
    }
    report("A9", traces && files,
           "two seeded single-threaded runs: loss traces bitwise equal, checkpoints "
           "byte-identical");
}

void a10_bench_cli() {
    const auto dir = work_dir();
    bool ok = true;
    std::ostringstream d;

    // Default-dim sweeps per variant: schema CSV + monotone peak memory.
    for (Variant v : {Variant::Vit, Variant::EffKanVit, Variant::WavKanVit}) {
        BenchReport r = bench_layer_sweep<float>(v, bench_default_dims(), 8, 3, 5, 3);
        const auto path = dir / (std::string("bench_") + variant_name(v) + ".csv");
        emit_report(r, "csv", path.string());
        BenchReport parsed = parse_report_csv(path.string());
        if (parsed.rows.size() != bench_default_dims().size()) ok = false;
        for (std::size_t i = 1; i < parsed.rows.size(); ++i)
            if (parsed.rows[i].peak_mem_bytes < parsed.rows[i - 1].peak_mem_bytes) {
                ok = false;
                d << " [peak mem not monotone for " << variant_name(v) << "]";
            }
    }

    // End-to-end smoke of all five subcommands, each < 60 s.
    const auto cfg_path = dir / "toy.cfg";
    {
        std::ofstream f(cfg_path);
        f << "variant = vit\nsize = custom\nimage_size = 16\npatch_size = 4\n"
          << "in_channels = 1\ndepth = 2\nheads = 2\ndim = 16\nffn_width = 32\n"
          << "num_classes = 2\ndataset = synthetic\nsynthetic_train = 96\n"
          << "synthetic_eval = 48\ntotal_epochs = 2\nwarmup_epochs = 1\n"
          << "lr_base = 1e-3\nbatch_size = 16\ndecomposition_levels = 2\n"
          << "bench_dims = 16, 32\n";
    }
    const auto out = dir / "cli_out";
    std::filesystem::remove_all(out);
    struct Cmd {
        std::string label;
        std::vector<std::string> args;
    };
    const std::vector<Cmd> cmds{
        {"train", {"train", "--config", cfg_path.string(), "--out", out.string(), "--seed", "5"}},
        {"eval",
         {"eval", "--config", cfg_path.string(), "--checkpoint",
          (out / "checkpoint_epoch1.ckpt").string(), "--seed", "5"}},
        {"count", {"count", "--variant", "hybrid1", "--size", "small"}},
        {"bench",
         {"bench", "--config", cfg_path.string(), "--variant", "wavkan", "--out", out.string()}},
        {"gradcheck", {"gradcheck", "--precision", "64", "--out", out.string()}},
    };
    for (const auto& cmd : cmds) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<const char*> argv{"hybkan"};
        for (const auto& a : cmd.args) argv.push_back(a.c_str());
        const int rc = cli(static_cast<int>(argv.size()), argv.data());
        const double secs = elapsed_s(t0);
        if (rc != 0 || secs >= 60.0) {
            ok = false;
            d << " [" << cmd.label << " rc " << rc << " in " << secs << " s]";
        }
    }
    report("A10", ok,
           "default-dim sweeps schema-conformant with monotone peak memory; five subcommands "
           "end-to-end" +
               d.str());
}

}  // namespace

int main() {
    std::cout.setf(std::ios::fixed);
    std::cout.precision(4);
    a1_gradients();
    a2_audit();
    a3_roundtrip();
    a4_spline();
    a5_pruning();
    a6_params();
    a7_flops();
    a8_learning();
    a9_determinism();
    a10_bench_cli();
    std::cout << (g_failures == 0 ? "acceptance: all criteria pass"
                                  : "acceptance: " + std::to_string(g_failures) + " failure(s)")
              << std::endl;
    return g_failures == 0 ? 0 : 1;
}
