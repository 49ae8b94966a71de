#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hybkan/checkpoint.hpp"
#include "hybkan/data.hpp"
#include "hybkan/vit.hpp"

namespace hybkan {

struct OptimizerConfig {
    double lr_base = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-8;
    double weight_decay = 0.05;
    double clip_norm = 1.0;
    std::size_t warmup_epochs = 10;
    std::size_t total_epochs = 300;
    double min_lr = 1e-5;
    double label_smoothing = 0.1;
    double ema_decay = 0.9998;

    void validate() const {
        if (!(0.0 < beta1 && beta1 < beta2 && beta2 < 1.0))
            throw ConfigError("betas must satisfy 0 < beta1 < beta2 < 1");
        if (clip_norm <= 0.0) throw ConfigError("clip_norm must be positive");
        if (label_smoothing < 0.0 || label_smoothing >= 1.0)
            throw ConfigError("label_smoothing must lie in [0, 1)");
    }
};

struct TrainConfig {
    OptimizerConfig opt;
    std::size_t batch_size = 32;
    std::string out_dir;  // metrics.csv + per-epoch checkpoints land here when non-empty
};

// Smoothed cross-entropy, mean over the batch: target q = (1-eps)·onehot + eps/K.
// Returns the loss and writes d(loss)/d(logits) into dlogits.
template <typename T>
double loss_ce_smoothed(const Tensor<T>& logits, const std::vector<int>& labels, double eps,
                        Tensor<T>* dlogits = nullptr) {
    const std::size_t n = logits.rows(), K = logits.cols();
    if (labels.size() != n) throw DimensionError("label count mismatch");
    if (dlogits) *dlogits = Tensor<T>({n, K});
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= K)
            throw ConfigError("label " + std::to_string(labels[r]) + " out of range for K=" +
                              std::to_string(K));
        // log-softmax with max subtraction for stability
        double mx = logits.at(r, 0);
        for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, static_cast<double>(logits.at(r, k)));
        double z = 0.0;
        for (std::size_t k = 0; k < K; ++k) z += std::exp(static_cast<double>(logits.at(r, k)) - mx);
        const double logz = std::log(z) + mx;
        double row_loss = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double q = eps / static_cast<double>(K) +
                             ((static_cast<int>(k) == labels[r]) ? (1.0 - eps) : 0.0);
            const double logp = static_cast<double>(logits.at(r, k)) - logz;
            row_loss -= q * logp;
            if (dlogits) {
                const double p = std::exp(logp);
                dlogits->at(r, k) = static_cast<T>((p - q) / static_cast<double>(n));
            }
        }
        total += row_loss;
    }
    return total / static_cast<double>(n);
}

// Linear warmup to lr_base over the first warmup_epochs of steps, then cosine
// decay to exactly min_lr at the final step.
inline double lr_at(std::size_t step, std::size_t steps_per_epoch, const OptimizerConfig& cfg) {
    const std::size_t W = cfg.warmup_epochs * steps_per_epoch;
    const std::size_t S = cfg.total_epochs * steps_per_epoch;
    if (W > 0 && step < W)
        return cfg.lr_base * static_cast<double>(step + 1) / static_cast<double>(W);
    if (S <= W + 1) return cfg.lr_base;  // degenerate schedule: no room to decay
    const double progress =
        static_cast<double>(step - W) / static_cast<double>(S - 1 - W);
    const double clamped = std::min(1.0, std::max(0.0, progress));
    return cfg.min_lr + 0.5 * (cfg.lr_base - cfg.min_lr) * (1.0 + std::cos(3.14159265358979323846 * clamped));
}

// Adam moments plus the EMA shadow, flat-packed in parameters() order.
template <typename T>
struct OptimizerState {
    std::vector<double> m, v;  // per-slot first/second moments
    std::vector<T> ema;
    std::size_t t = 0;  // completed steps

    template <typename ParamList>
    void init(const ParamList& params) {
        std::size_t total = 0;
        for (const auto& p : params) total += p.len;
        m.assign(total, 0.0);
        v.assign(total, 0.0);
        ema.resize(total);
        std::size_t off = 0;
        for (const auto& p : params) {
            for (std::size_t i = 0; i < p.len; ++i) ema[off + i] = p.value[i];
            off += p.len;
        }
    }
};

// AdamW with global-norm clipping, decoupled decay on decayable weights only,
// and an EMA update after the parameter step.
template <typename T>
void optimizer_step(std::vector<ParamRef<T>>& params, OptimizerState<T>& state,
                    const OptimizerConfig& cfg, double lr) {
    // Global gradient norm; non-finite gradients abort the step with the
    // offending parameter named.
    double sq = 0.0;
    for (const auto& p : params)
        for (std::size_t i = 0; i < p.len; ++i) {
            const double g = static_cast<double>(p.grad[i]);
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + p.name);
            sq += g * g;
        }
    const double norm = std::sqrt(sq);
    const double clip_scale = (norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;

    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    std::size_t off = 0;
    for (const auto& p : params) {
        for (std::size_t i = 0; i < p.len; ++i) {
            const double g = static_cast<double>(p.grad[i]) * clip_scale;
            double& m = state.m[off + i];
            double& v = state.v[off + i];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            const double mhat = m / bc1, vhat = v / bc2;
            double theta = static_cast<double>(p.value[i]);
            if (p.decay) theta *= 1.0 - lr * cfg.weight_decay;
            theta -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
            p.value[i] = static_cast<T>(theta);
            state.ema[off + i] = static_cast<T>(cfg.ema_decay * state.ema[off + i] +
                                                (1.0 - cfg.ema_decay) * p.value[i]);
        }
        off += p.len;
    }
}

struct EvalResult {
    double loss = 0.0;
    double top1 = 0.0;
    double top5 = 0.0;
};

// Top-1 = argmax match rate; Top-5 = true label within the five best scores.
// With fewer than five classes Top-5 is 1.0 by definition.
template <typename T>
EvalResult evaluate_logits(const Tensor<T>& logits, const std::vector<int>& labels,
                           double label_smoothing = 0.0) {
    const std::size_t n = logits.rows(), K = logits.cols();
    EvalResult r;
    r.loss = loss_ce_smoothed<T>(logits, labels, label_smoothing, nullptr);
    std::size_t hit1 = 0, hit5 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        const double own = static_cast<double>(logits.at(i, static_cast<std::size_t>(y)));
        std::size_t better = 0;
        for (std::size_t k = 0; k < K; ++k)
            if (static_cast<int>(k) != y && static_cast<double>(logits.at(i, k)) > own) ++better;
        if (better == 0) ++hit1;
        if (K < 5 || better < 5) ++hit5;
    }
    r.top1 = static_cast<double>(hit1) / static_cast<double>(n);
    r.top5 = static_cast<double>(hit5) / static_cast<double>(n);
    return r;
}

template <typename T>
EvalResult evaluate(Model<T>& model, const Dataset<T>& ds, double label_smoothing = 0.0) {
    model.set_training(false);
    const std::size_t n = ds.size();
    Tensor<T> logits({n, model.cfg.num_classes});
    for (std::size_t i = 0; i < n; ++i) {
        Tensor<T> row = model.forward(ds.images[i]);
        for (std::size_t k = 0; k < model.cfg.num_classes; ++k) logits.at(i, k) = row.at(0, k);
    }
    return evaluate_logits(logits, ds.labels, label_smoothing);
}

// ---------------------------------------------------------------------------
// Model <-> checkpoint bridging

template <typename T>
CheckpointData model_checkpoint(Model<T>& model, const OptimizerState<T>* state,
                                const std::vector<std::pair<std::string, std::string>>& manifest) {
    CheckpointData ckpt;
    ckpt.manifest = manifest;
    auto params = model.parameters();
    for (const auto& p : params) {
        TensorRecord rec;
        rec.name = p.name;
        rec.dtype = dtype_code<T>();
        rec.shape = {static_cast<std::uint64_t>(p.len)};
        detail::encode_payload(p.value, p.len, rec.payload);
        ckpt.tensors.push_back(std::move(rec));
    }
    if (state) {
        std::size_t off = 0;
        for (const auto& p : params) {
            TensorRecord rec;
            rec.name = "ema." + p.name;
            rec.dtype = dtype_code<T>();
            rec.shape = {static_cast<std::uint64_t>(p.len)};
            detail::encode_payload(state->ema.data() + off, p.len, rec.payload);
            ckpt.tensors.push_back(std::move(rec));
            off += p.len;
        }
    }
    return ckpt;
}

template <typename T>
void load_model_from_checkpoint(Model<T>& model, const CheckpointData& ckpt,
                                OptimizerState<T>* state = nullptr) {
    auto params = model.parameters();
    std::size_t off = 0;
    for (const auto& p : params) {
        const TensorRecord* rec = ckpt.find_tensor(p.name);
        if (!rec) throw CheckpointShapeError("checkpoint missing tensor " + p.name);
        if (rec->dtype != dtype_code<T>())
            throw CheckpointShapeError("dtype mismatch for tensor " + p.name);
        if (rec->element_count() != p.len)
            throw CheckpointShapeError("shape mismatch for tensor " + p.name + ": checkpoint has " +
                                       std::to_string(rec->element_count()) + ", model expects " +
                                       std::to_string(p.len));
        detail::decode_payload(rec->payload, p.value, p.len);
        if (state) {
            const TensorRecord* erec = ckpt.find_tensor("ema." + p.name);
            if (erec) {
                if (erec->element_count() != p.len)
                    throw CheckpointShapeError("shape mismatch for tensor ema." + p.name);
                detail::decode_payload(erec->payload, state->ema.data() + off, p.len);
            }
        }
        off += p.len;
    }
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochMetrics {
    std::size_t epoch = 0;
    std::string split;
    double loss = 0.0, top1 = 0.0, top5 = 0.0, lr = 0.0, seconds = 0.0;
};

inline std::string metrics_csv_header() { return "epoch,split,loss,top1,top5,lr,seconds"; }

inline std::string metrics_csv_row(const EpochMetrics& m) {
    std::ostringstream os;
    os << m.epoch << ',' << m.split << ',' << std::setprecision(17) << m.loss << ',' << m.top1
       << ',' << m.top5 << ',' << m.lr << ',' << m.seconds;
    return os.str();
}

// Epoch loop: seeded shuffle, minibatch forward/backward, AdamW step with the
// warmup+cosine schedule, per-epoch metrics rows and checkpoint. A non-finite
// loss aborts, keeping the last epoch's checkpoint on disk.
template <typename T>
std::vector<EpochMetrics> train(Model<T>& model, const Dataset<T>& train_set,
                                const Dataset<T>& eval_set, const TrainConfig& tcfg,
                                std::uint64_t seed) {
    const OptimizerConfig& cfg = tcfg.opt;
    cfg.validate();
    if (train_set.image_dim() !=
        model.cfg.in_channels * model.cfg.image_size * model.cfg.image_size)
        throw DimensionError("dataset image size does not match the model config");

    auto params = model.parameters();
    OptimizerState<T> state;
    state.init(params);
    Rng shuffle_rng(seed);
    const std::size_t n = train_set.size();
    const std::size_t steps_per_epoch = (n + tcfg.batch_size - 1) / tcfg.batch_size;

    std::ofstream metrics;
    if (!tcfg.out_dir.empty()) {
        metrics.open(tcfg.out_dir + "/metrics.csv", std::ios::trunc);
        if (!metrics) throw std::runtime_error("cannot write metrics.csv in " + tcfg.out_dir);
        metrics << metrics_csv_header() << '\n';
    }

    std::vector<EpochMetrics> history;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < cfg.total_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(order);
        model.set_training(true);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        double last_lr = 0.0;

        for (std::size_t b0 = 0; b0 < n; b0 += tcfg.batch_size) {
            const std::size_t bs = std::min(tcfg.batch_size, n - b0);
            model.zero_grads();
            params = model.parameters();  // zero_grads reallocates gradient storage
            double batch_loss = 0.0;
            for (std::size_t i = 0; i < bs; ++i) {
                const std::size_t idx = order[b0 + i];
                typename Model<T>::Cache cache;
                Tensor<T> logits = model.forward(train_set.images[idx], &cache);
                Tensor<T> dlogits;
                batch_loss += loss_ce_smoothed<T>(
                    logits, {train_set.labels[idx]}, cfg.label_smoothing, &dlogits);
                for (std::size_t k = 0; k < dlogits.size(); ++k)
                    dlogits[k] /= static_cast<T>(bs);  // mean over the minibatch
                model.backward(cache, dlogits);
            }
            batch_loss /= static_cast<double>(bs);
            if (!std::isfinite(batch_loss))
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                                   " (last good checkpoint retained)");
            last_lr = lr_at(step, steps_per_epoch, cfg);
            optimizer_step(params, state, cfg, last_lr);
            model.project_constraints();
            epoch_loss += batch_loss * static_cast<double>(bs);
            seen += bs;
            ++step;
        }

        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        EpochMetrics tr{epoch, "train", epoch_loss / static_cast<double>(seen), 0.0, 0.0, last_lr,
                        secs};
        EvalResult ev = evaluate(model, eval_set);
        EpochMetrics va{epoch, "eval", ev.loss, ev.top1, ev.top5, last_lr, 0.0};
        history.push_back(tr);
        history.push_back(va);
        if (metrics) metrics << metrics_csv_row(tr) << '\n' << metrics_csv_row(va) << '\n' << std::flush;

        if (!tcfg.out_dir.empty()) {
            std::vector<std::pair<std::string, std::string>> manifest{
                {"epoch", std::to_string(epoch)},
                {"step", std::to_string(step)},
                {"seed", std::to_string(seed)},
                {"train_loss", std::to_string(tr.loss)},
                {"eval_top1", std::to_string(va.top1)},
            };
            checkpoint_write(tcfg.out_dir + "/checkpoint_epoch" + std::to_string(epoch) + ".ckpt",
                             model_checkpoint(model, &state, manifest));
        }
    }
    return history;
}

}  // namespace hybkan
