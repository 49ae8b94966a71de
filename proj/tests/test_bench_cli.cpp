#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hybkan/bench.hpp"
#include "hybkan/cli.hpp"
#include "hybkan/config.hpp"

using namespace hybkan;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
    auto p = std::filesystem::temp_directory_path() / ("hybkan_cli_" + tag);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"hybkan"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli(static_cast<int>(argv.size()), argv.data());
}

std::string toy_config(const std::filesystem::path& dir) {
    const auto path = dir / "toy.cfg";
    std::ofstream f(path);
    f << "variant = vit\nsize = custom\nimage_size = 16\npatch_size = 4\n"
      << "in_channels = 1\ndepth = 2\nheads = 2\ndim = 16\nffn_width = 32\n"
      << "num_classes = 2\ndataset = synthetic\nsynthetic_train = 96\n"
      << "synthetic_eval = 48\ntotal_epochs = 2\nwarmup_epochs = 1\n"
      << "lr_base = 1e-3\nbatch_size = 16\ndecomposition_levels = 2\n";
    return path.string();
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("bench sweep: row shape, monotone memory, argument validation") {
    const std::vector<std::size_t> dims{8, 16, 32};
    BenchReport r = bench_layer_sweep<float>(Variant::WavKanVit, dims, 8, 3, 5, 1);
    REQUIRE(r.rows.size() == dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) {
        CHECK(r.rows[i].input_dim == dims[i]);
        CHECK(r.rows[i].samples_per_s > 0.0);
        CHECK(r.rows[i].repeats >= 3);
        CHECK(r.rows[i].warmup >= 5);
        CHECK(r.rows[i].params > 0);
    }
    // Peak transient allocation grows (weakly) with the input dimension.
    for (std::size_t i = 1; i < r.rows.size(); ++i)
        CHECK(r.rows[i].peak_mem_bytes >= r.rows[i - 1].peak_mem_bytes);

    CHECK_THROWS_AS((void)bench_layer_sweep<float>(Variant::Vit, dims, 8, 2, 5), ConfigError);
    CHECK_THROWS_AS((void)bench_layer_sweep<float>(Variant::Vit, dims, 8, 3, 4), ConfigError);
    CHECK_THROWS_AS((void)bench_layer_sweep<float>(Variant::Vit, {0}, 8, 3, 5), ConfigError);
}

TEST_CASE("bench sweep: doubling the batch keeps throughput within a 3x envelope") {
    BenchReport a = bench_layer_sweep<float>(Variant::Vit, {64}, 16, 5, 5, 1);
    BenchReport b = bench_layer_sweep<float>(Variant::Vit, {64}, 32, 5, 5, 1);
    const double ratio = b.rows[0].samples_per_s / a.rows[0].samples_per_s;
    CHECK(ratio < 3.0);
    CHECK(ratio > 1.0 / 3.0);
}

TEST_CASE("emit_report: csv header, empty boundary, csv/json round trip") {
    auto dir = temp_dir("report");

    // Empty report -> header-only CSV.
    BenchReport empty;
    emit_report(empty, "csv", (dir / "empty.csv").string());
    CHECK(slurp(dir / "empty.csv") ==
          "variant,size,input_dim,params,gflops,samples_per_s,peak_mem_bytes,repeats,warmup\n");

    BenchReport r = bench_layer_sweep<float>(Variant::Hybrid1, {8, 16}, 4, 3, 5, 2);
    emit_report(r, "csv", (dir / "bench.csv").string());
    BenchReport from_csv = parse_report_csv((dir / "bench.csv").string());
    emit_report(from_csv, "json", (dir / "bench.json").string());
    BenchReport from_json = parse_report_json((dir / "bench.json").string());
    REQUIRE(from_json.rows.size() == r.rows.size());
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        CHECK(from_json.rows[i].variant == r.rows[i].variant);
        CHECK(from_json.rows[i].input_dim == r.rows[i].input_dim);
        CHECK(from_json.rows[i].params == r.rows[i].params);
        CHECK(from_json.rows[i].peak_mem_bytes == r.rows[i].peak_mem_bytes);
        CHECK(from_json.rows[i].repeats == r.rows[i].repeats);
    }

    // Numeric fields are bare numbers in the JSON, never quoted strings.
    const std::string js = slurp(dir / "bench.json");
    CHECK(js.find("\"input_dim\": 8") != std::string::npos);
    CHECK(js.find("\"input_dim\": \"") == std::string::npos);

    CHECK_THROWS_AS(emit_report(r, "xml", (dir / "bench.xml").string()), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("config parser: values, overrides, and named-key errors") {
    auto dir = temp_dir("config");
    {
        std::ofstream f(dir / "a.cfg");
        f << "# comment line\n\nvariant = hybrid2\nsize= tiny\nlr_base =2e-3\n"
          << "wavelet = morlet\nprune_ratio = 0.25\nbench_dims = 8, 16,32\n";
    }
    RunConfig rc = load_config((dir / "a.cfg").string());
    CHECK(rc.variant == Variant::Hybrid2);
    CHECK(rc.size == SizePreset::Tiny);
    CHECK(rc.train.opt.lr_base == doctest::Approx(2e-3));
    CHECK(rc.model.ffn_wavelet == WaveletKind::Morlet);
    CHECK(rc.model.wavelet.prune_ratio == doctest::Approx(0.25));
    CHECK(rc.bench_dims == std::vector<std::size_t>{8, 16, 32});

    {
        std::ofstream f(dir / "bad_key.cfg");
        f << "no_such_knob = 1\n";
    }
    CHECK_THROWS_WITH_AS((void)load_config((dir / "bad_key.cfg").string()),
                         doctest::Contains("no_such_knob"), ConfigError);
    {
        std::ofstream f(dir / "bad_val.cfg");
        f << "depth = twelve\n";
    }
    CHECK_THROWS_WITH_AS((void)load_config((dir / "bad_val.cfg").string()),
                         doctest::Contains("depth"), ConfigError);

    // Preset resolution: tiny preset shapes plus hybrid2 wiring.
    ModelConfig m = resolve_model_config(rc);
    CHECK(m.dim == 192);
    CHECK(m.depth == 12);
    CHECK(m.ffn_kind == FfnKind::EffKan);
    CHECK(m.head_kind == HeadKind::WavKan);
    std::filesystem::remove_all(dir);
}

TEST_CASE("cli: count and gradcheck subcommands") {
    CHECK(run_cli({"count", "--variant", "hybrid1", "--size", "small"}) == 0);
    CHECK(run_cli({"count", "--variant", "vit", "--size", "tiny"}) == 0);

    auto dir = temp_dir("gradout");
    CHECK(run_cli({"gradcheck", "--precision", "64", "--out", dir.string()}) == 0);
    const std::string audit = slurp(dir / "gradient_audit.csv");
    CHECK(audit.rfind("equation,max_dev_printed,max_dev_shipped,printed_agrees,shipped_agrees",
                      0) == 0);
    // Four audited equations, shipped gradients always agree.
    CHECK(std::count(audit.begin(), audit.end(), '\n') == 5);
    CHECK(audit.find(",false\n") == std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("cli: unknown subcommand and bad flags exit 2 with usage") {
    CHECK(run_cli({"frobnicate"}) == 2);
    CHECK(run_cli({}) == 2);
    CHECK(run_cli({"count", "--no-such-flag"}) == 2);
    CHECK(run_cli({"count", "--precision", "16", "--variant", "vit"}) == 2);
}

TEST_CASE("cli: train, eval, and bench round trip on the toy config") {
    auto dir = temp_dir("train");
    const std::string cfg = toy_config(dir);
    const std::string out = (dir / "run").string();
    CHECK(run_cli({"train", "--config", cfg, "--out", out, "--seed", "5"}) == 0);
    CHECK(std::filesystem::exists(out + "/metrics.csv"));
    CHECK(std::filesystem::exists(out + "/checkpoint_epoch1.ckpt"));
    {
        std::ifstream mf(out + "/metrics.csv");
        std::string header;
        std::getline(mf, header);
        CHECK(header == "epoch,split,loss,top1,top5,lr,seconds");
    }
    CHECK(run_cli({"eval", "--config", cfg, "--checkpoint", out + "/checkpoint_epoch1.ckpt",
                   "--seed", "5"}) == 0);

    const std::string bout = (dir / "bench").string();
    CHECK(run_cli({"bench", "--variant", "effkan", "--dims", "8", "16", "--out", bout}) == 0);
    BenchReport rep = parse_report_csv(bout + "/bench.csv");
    CHECK(rep.rows.size() == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("cli: HYBKAN_SEED fallback matches an explicit --seed run") {
    auto d1 = temp_dir("seed1"), d2 = temp_dir("seed2");
    const std::string cfg = toy_config(d1);
    CHECK(run_cli({"train", "--config", cfg, "--out", (d1 / "run").string(), "--seed", "77"}) == 0);
    setenv("HYBKAN_SEED", "77", 1);
    CHECK(run_cli({"train", "--config", cfg, "--out", (d2 / "run").string()}) == 0);
    unsetenv("HYBKAN_SEED");
    // Identical traces up to the wall-clock column.
    auto strip_seconds = [](const std::string& csv) {
        std::istringstream ss(csv);
        std::string line, out;
        while (std::getline(ss, line)) {
            const std::size_t cut = line.rfind(',');
            out += line.substr(0, cut);
            out += '\n';
        }
        return out;
    };
    CHECK(strip_seconds(slurp(d1 / "run" / "metrics.csv")) ==
          strip_seconds(slurp(d2 / "run" / "metrics.csv")));
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}
