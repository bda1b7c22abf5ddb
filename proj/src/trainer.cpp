#include "rdm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rdm/errors.hpp"
#include "rdm/io.hpp"
#include "rdm/parallel.hpp"
#include "rdm/rng.hpp"

namespace rdm {

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
    if (!(lr > 0)) throw ConfigError("train: lr must be positive");
    if (!(grad_clip_norm > 0)) throw ConfigError("train: grad_clip_norm must be positive");
    if (weight_decay < 0) throw ConfigError("train: weight_decay must be nonnegative");
    if (!(t_min > 0 && t_min < 1)) throw ConfigError("train: t_min must lie in (0,1)");
    if (threads < 1) throw ConfigError("train: threads must be >= 1");
}

double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps) {
    if (total_steps <= 1) return base_lr;
    const double x = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return base_lr * 0.5 * (1.0 + std::cos(3.1415926535897932384626433832795 * x));
}

namespace {

// residual of one perturbed sample: raw(z(t), t[, c]) + eps
void sample_residual(ScoreNetTrainEval& ev, ActivationTape& tape, const SdeSpec& spec,
                     std::span<const double> z0, double t, std::optional<std::uint32_t> c,
                     std::span<const double> eps, std::vector<double>& zt,
                     std::vector<double>& residual) {
    const Kernel k = kernel(spec, t);
    for (std::size_t j = 0; j < z0.size(); ++j) zt[j] = k.mean_coeff * z0[j] + k.std * eps[j];
    ev.forward_acts(zt, t, c, tape);
    for (std::size_t j = 0; j < z0.size(); ++j) residual[j] = tape.raw[j] + eps[j];
}

std::optional<std::uint32_t> label_for(const std::vector<std::int32_t>* labels, bool conditional,
                                       std::size_t i) {
    if (!conditional) return std::nullopt;
    return static_cast<std::uint32_t>((*labels)[i]);
}

}  // namespace

double dsm_loss(const ScoreModel& model, const SdeSpec& spec, const MatrixD& batch,
                const std::vector<std::int32_t>* labels, std::span<const double> t_draws,
                const MatrixD& noise) {
    const std::size_t B = batch.rows, D = batch.cols;
    if (B == 0) throw DataError("dsm_loss: empty batch");
    if (noise.rows != B || noise.cols != D || t_draws.size() != B)
        throw DataError("dsm_loss: draw shapes do not match the batch");
    const bool cond = model.config.conditional();
    if (cond && (!labels || labels->size() != B))
        throw DataError("dsm_loss: conditional model requires one label per row");

    ScoreNetTrainEval ev(model);
    ActivationTape tape;
    std::vector<double> zt(D), residual(D);
    double total = 0;
    for (std::size_t i = 0; i < B; ++i) {
        sample_residual(ev, tape, spec, batch.row_span(i), t_draws[i], label_for(labels, cond, i),
                        noise.row_span(i), zt, residual);
        const double li = squared_norm(residual);
        if (!std::isfinite(li))
            throw NumericError("dsm_loss: non-finite loss at batch index " + std::to_string(i));
        total += li;
    }
    return total / static_cast<double>(B);
}

TrainResult fit(const RepresentationSet& reps, const SdeSpec& spec, ScoreNetConfig net_cfg,
                const TrainConfig& cfg) {
    cfg.validate();
    spec.validate();
    const std::size_t N = reps.data.rows, D = reps.data.cols;
    if (N == 0) throw DataError("fit: empty representation set");
    if (net_cfg.input_dim == 0) net_cfg.input_dim = static_cast<std::uint32_t>(D);
    if (net_cfg.input_dim != D)
        throw DataError("fit: representation dim " + std::to_string(D) +
                        " does not match net input_dim " + std::to_string(net_cfg.input_dim));
    const bool cond = net_cfg.conditional();
    if (cond) {
        if (reps.labels.size() != N)
            throw DataError("fit: conditional training requires a label for every row");
        for (auto l : reps.labels)
            if (l < 0 || static_cast<std::uint32_t>(l) >= net_cfg.num_classes)
                throw DataError("fit: label outside [0, num_classes)");
    }

    TrainResult res;
    res.normalizer = cfg.normalize_inputs ? Normalizer::fit(reps.data) : Normalizer::identity(D);
    MatrixD X(N, D);
    for (std::size_t i = 0; i < N; ++i) res.normalizer.normalize(reps.data.row_span(i), X.row_span(i));

    res.model = init_score_model(net_cfg, spec, split_seed(cfg.seed, seed_stream::model_init));
    ScoreModel& model = res.model;
    const std::size_t P = model.param_count();

    const std::size_t B = std::min(cfg.batch_size, N);
    const std::size_t steps_per_pass = (N + B - 1) / B;
    const std::size_t total_steps =
        cfg.iterations > 0 ? cfg.iterations : cfg.epochs * steps_per_pass;
    if (total_steps == 0) return res;

    Rng rng(split_seed(cfg.seed, seed_stream::train));
    std::vector<std::size_t> perm(N);
    std::iota(perm.begin(), perm.end(), 0);

    std::vector<double> adam_m(P, 0.0), adam_v(P, 0.0), grad(P);
    std::vector<double> t_draws(B);
    MatrixD noise(B, D);
    const int T = std::min<std::size_t>(std::max(1, cfg.threads), B);
    std::vector<std::vector<double>> gbuf(T);
    for (auto& g : gbuf) g.assign(P, 0.0);
    std::vector<double> chunk_loss(T, 0.0);

    double beta1_t = 1.0, beta2_t = 1.0;
    std::size_t step = 0;
    while (step < total_steps) {
        // one pass in random order without replacement; last short batch kept
        for (std::size_t i = N - 1; i > 0; --i)
            std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
        double pass_loss = 0;
        std::size_t pass_batches = 0;

        for (std::size_t start = 0; start < N && step < total_steps; start += B) {
            const std::size_t bsz = std::min(B, N - start);
            for (std::size_t i = 0; i < bsz; ++i) {
                t_draws[i] = rng.uniform(cfg.t_min, 1.0);
                double* e = noise.row(i);
                for (std::size_t j = 0; j < D; ++j) e[j] = rng.normal();
            }

            const double dscale = 2.0 / static_cast<double>(bsz);
            const int tw = static_cast<int>(std::min<std::size_t>(T, bsz));
#pragma omp parallel num_threads(tw) if (tw > 1)
            {
                const int tid = tw > 1 ? omp_get_thread_num() : 0;
                auto [i0, i1] = chunk_range(bsz, tw, tid);
                auto& G = gbuf[tid];
                std::fill(G.begin(), G.end(), 0.0);
                double local_loss = 0;
                ScoreNetTrainEval ev(model);
                ActivationTape tape;
                std::vector<double> zt(D), residual(D), draw(D);
                for (std::size_t i = i0; i < i1; ++i) {
                    const std::size_t row = perm[start + i];
                    sample_residual(ev, tape, spec, X.row_span(row), t_draws[i],
                                    label_for(cond ? &reps.labels : nullptr, cond, row),
                                    noise.row_span(i), zt, residual);
                    local_loss += squared_norm(residual);
                    for (std::size_t j = 0; j < D; ++j) draw[j] = dscale * residual[j];
                    ev.backward_sample(tape, draw, G);
                }
                chunk_loss[tid] = local_loss;
            }
            // reduce in worker order: deterministic for a fixed thread count
            double loss = 0;
            std::copy(gbuf[0].begin(), gbuf[0].end(), grad.begin());
            loss += chunk_loss[0];
            for (int c = 1; c < tw; ++c) {
                const auto& G = gbuf[c];
                for (std::size_t p = 0; p < P; ++p) grad[p] += G[p];
                loss += chunk_loss[c];
            }
            loss /= static_cast<double>(bsz);
            if (!std::isfinite(loss))
                throw NumericError("fit: non-finite loss at step " + std::to_string(step));

            // global gradient-norm clipping
            double gnorm = std::sqrt(squared_norm(grad));
            if (gnorm > cfg.grad_clip_norm) {
                const double s = cfg.grad_clip_norm / gnorm;
                for (auto& g : grad) g *= s;
                gnorm = cfg.grad_clip_norm;
            }

            const double lr = cosine_lr(cfg.lr, step, total_steps);
            beta1_t *= kAdamBeta1;
            beta2_t *= kAdamBeta2;
            const double mc = 1.0 / (1.0 - beta1_t);
            const double vc = 1.0 / (1.0 - beta2_t);
            double* m = adam_m.data();
            double* v = adam_v.data();
            double* g = grad.data();
            double* w = model.params.data();
            const double wd = cfg.weight_decay;
            parallel_for(P, cfg.threads, [&](std::size_t p) {
                m[p] = kAdamBeta1 * m[p] + (1.0 - kAdamBeta1) * g[p];
                v[p] = kAdamBeta2 * v[p] + (1.0 - kAdamBeta2) * g[p] * g[p];
                const double mhat = m[p] * mc;
                const double vhat = v[p] * vc;
                w[p] -= lr * (mhat / (std::sqrt(vhat) + kAdamEps) + wd * w[p]);
            });

            res.step_grad_norms.push_back(gnorm);
            res.step_lrs.push_back(lr);
            pass_loss += loss;
            ++pass_batches;
            ++step;
        }
        if (pass_batches > 0)
            res.epoch_losses.push_back(pass_loss / static_cast<double>(pass_batches));
    }
    res.steps_run = step;
    return res;
}

std::uint32_t predict_condition(const MatrixD& W, std::span<const double> b,
                                std::span<const double> z) {
    const std::size_t K = W.rows, D = W.cols;
    if (b.size() != K || z.size() != D)
        throw DataError("predict_condition: inconsistent shapes");
    if (K == 0) throw DataError("predict_condition: empty head");
    std::uint32_t best = 0;
    double best_logit = dot(W.row(0), z.data(), D) + b[0];
    for (std::size_t k = 1; k < K; ++k) {
        const double logit = dot(W.row(k), z.data(), D) + b[k];
        if (logit > best_logit) {
            best_logit = logit;
            best = static_cast<std::uint32_t>(k);
        }
    }
    return best;
}

}  // namespace rdm
