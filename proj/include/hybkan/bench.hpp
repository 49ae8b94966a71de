#pragma once

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybkan/vit.hpp"

namespace hybkan {

struct BenchRow {
    std::string variant;
    std::string size;
    std::size_t input_dim = 0;
    std::size_t params = 0;
    double gflops = 0.0;
    double samples_per_s = 0.0;
    std::size_t peak_mem_bytes = 0;
    int repeats = 0;
    int warmup = 0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
};

inline const std::vector<std::size_t>& bench_default_dims() {
    static const std::vector<std::size_t> dims{64, 128, 256, 512, 1024};
    return dims;
}

// Times forward passes of the variant's FFN stack (d -> d, the Fig.-3 style
// layer sweep) for each input dimension. Median of `repeats` timed runs after
// `warmup` untimed ones; peak transient allocation from the tensor-buffer
// accounting in AllocStats.
template <typename T>
BenchReport bench_layer_sweep(Variant variant, const std::vector<std::size_t>& input_dims,
                              std::size_t batch, int repeats = 5, int warmup = 5,
                              std::uint64_t seed = 1) {
    if (repeats < 3) throw ConfigError("bench repeats must be >= 3");
    if (warmup < 5) throw ConfigError("bench warmup must be >= 5");
    BenchReport report;
    for (std::size_t d : input_dims) {
        if (d == 0) throw ConfigError("bench input dim must be positive");
        ModelConfig cfg;
        cfg.dim = d;
        cfg.ffn_width = d;
        cfg.heads = 1;
        cfg.wavelet.decomposition_levels = 4;
        apply_variant(cfg, variant);
        Rng rng(seed);
        Ffn<T> ffn;
        ffn.init(cfg, rng);
        Tensor<T> x({batch, d});
        Rng data_rng(seed + 1);
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = static_cast<T>(data_rng.uniform(-1.0, 1.0));

        // Warmup runs stay in training mode so wavelet layers accumulate their
        // frozen eval-mode prune threshold; timed runs then use eval mode.
        for (int i = 0; i < warmup; ++i) (void)ffn.forward(x, nullptr);
        if (cfg.ffn_kind == FfnKind::WavKan) {
            ffn.wk1.training = false;
            ffn.wk2.training = false;
        }

        AllocStats::reset_peak();
        const std::size_t base_mem = AllocStats::current().load();
        std::vector<double> times;
        times.reserve(static_cast<std::size_t>(repeats));
        for (int r = 0; r < repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            (void)ffn.forward(x, nullptr);
            const auto t1 = std::chrono::steady_clock::now();
            times.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        std::sort(times.begin(), times.end());
        const double median = times[times.size() / 2];
        const std::size_t peak = AllocStats::peak().load();

        BenchRow row;
        row.variant = variant_name(variant);
        row.size = "layer";
        row.input_dim = d;
        switch (cfg.ffn_kind) {
            case FfnKind::Mlp:
                row.params = ffn.mlp.W1.size() + ffn.mlp.b1.size() + ffn.mlp.W2.size() +
                             ffn.mlp.b2.size();
                break;
            case FfnKind::EffKan: row.params = ffn.ek1.param_count() + ffn.ek2.param_count(); break;
            case FfnKind::WavKan: row.params = ffn.wk1.param_count() + ffn.wk2.param_count(); break;
        }
        row.gflops = (ffn_layer_flops(cfg, 1, d, d, cfg.ffn_kind) +
                      ffn_layer_flops(cfg, 1, d, d, cfg.ffn_kind)) *
                     1e-9;
        row.samples_per_s = static_cast<double>(batch) / std::max(median, 1e-12);
        row.peak_mem_bytes = peak > base_mem ? peak - base_mem : 0;
        row.repeats = repeats;
        row.warmup = warmup;
        report.rows.push_back(std::move(row));
    }
    return report;
}

inline const char* bench_csv_header() {
    return "variant,size,input_dim,params,gflops,samples_per_s,peak_mem_bytes,repeats,warmup";
}

inline std::string bench_row_csv(const BenchRow& r) {
    std::ostringstream os;
    os << r.variant << ',' << r.size << ',' << r.input_dim << ',' << r.params << ','
       << std::setprecision(12) << r.gflops << ',' << r.samples_per_s << ',' << r.peak_mem_bytes
       << ',' << r.repeats << ',' << r.warmup;
    return os.str();
}

inline void emit_report(const BenchReport& report, const std::string& format,
                        const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report to " + path);
    if (format == "csv") {
        out << bench_csv_header() << '\n';
        for (const auto& r : report.rows) out << bench_row_csv(r) << '\n';
    } else if (format == "json") {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : report.rows)
            arr.push_back({{"variant", r.variant},
                           {"size", r.size},
                           {"input_dim", r.input_dim},
                           {"params", r.params},
                           {"gflops", r.gflops},
                           {"samples_per_s", r.samples_per_s},
                           {"peak_mem_bytes", r.peak_mem_bytes},
                           {"repeats", r.repeats},
                           {"warmup", r.warmup}});
        out << arr.dump(2) << '\n';
    } else {
        throw ConfigError("unknown report format " + format);
    }
    if (!out) throw std::runtime_error("I/O failure writing " + path);
}

inline BenchReport parse_report_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read report " + path);
    std::string line;
    if (!std::getline(in, line) || line != bench_csv_header())
        throw FormatError("bad bench CSV header in " + path);
    BenchReport report;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        BenchRow r;
        std::getline(ss, r.variant, ',');
        std::getline(ss, r.size, ',');
        std::getline(ss, field, ',');
        r.input_dim = std::stoull(field);
        std::getline(ss, field, ',');
        r.params = std::stoull(field);
        std::getline(ss, field, ',');
        r.gflops = std::stod(field);
        std::getline(ss, field, ',');
        r.samples_per_s = std::stod(field);
        std::getline(ss, field, ',');
        r.peak_mem_bytes = std::stoull(field);
        std::getline(ss, field, ',');
        r.repeats = std::stoi(field);
        std::getline(ss, field, ',');
        r.warmup = std::stoi(field);
        report.rows.push_back(std::move(r));
    }
    return report;
}

inline BenchReport parse_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read report " + path);
    nlohmann::json arr = nlohmann::json::parse(in);
    BenchReport report;
    for (const auto& o : arr) {
        BenchRow r;
        r.variant = o.at("variant").get<std::string>();
        r.size = o.at("size").get<std::string>();
        r.input_dim = o.at("input_dim").get<std::size_t>();
        r.params = o.at("params").get<std::size_t>();
        r.gflops = o.at("gflops").get<double>();
        r.samples_per_s = o.at("samples_per_s").get<double>();
        r.peak_mem_bytes = o.at("peak_mem_bytes").get<std::size_t>();
        r.repeats = o.at("repeats").get<int>();
        r.warmup = o.at("warmup").get<int>();
        report.rows.push_back(std::move(r));
    }
    return report;
}

}  // namespace hybkan
