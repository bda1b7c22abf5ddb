#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rdm/normalizer.hpp"
#include "rdm/score_net.hpp"
#include "rdm/sde.hpp"

namespace rdm {

struct RepresentationSet;

struct TrainConfig {
    std::size_t batch_size = 4096;
    double lr = 2e-3;
    std::size_t epochs = 200;
    std::size_t iterations = 0;  // > 0 switches to a fixed step budget
    double grad_clip_norm = 1.0;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    double t_min = 1e-5;
    bool normalize_inputs = true;
    int threads = 1;  // > 1 enables the parallel batch-gradient path, which can
                      // differ from the serial reference in low-order bits

    void validate() const;
};

// AdamW constants (fixed project-wide)
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// lr * 0.5 * (1 + cos(pi * step/(total-1))): full lr at step 0, exactly 0 at
// the last step.
double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps);

// Denoising score matching objective with the variance weighting folded in:
// mean over the batch of || std(t) s_theta(z(t), t[,c]) + eps ||^2 where
// z(t) = mean_coeff(t) z(0) + std(t) eps. Since the head output is the score
// pre-divided by std(t), the residual is computed as raw + eps exactly.
double dsm_loss(const ScoreModel& model, const SdeSpec& spec, const MatrixD& batch,
                const std::vector<std::int32_t>* labels, std::span<const double> t_draws,
                const MatrixD& noise);

struct TrainResult {
    ScoreModel model;
    Normalizer normalizer;
    std::vector<double> epoch_losses;     // mean loss per pass over the data
    std::vector<double> step_grad_norms;  // post-clip global gradient norms
    std::vector<double> step_lrs;
    std::size_t steps_run = 0;
};

// Denoising score matching training (unconditional or class-conditioned).
// Epoch = one full pass in random order without replacement, last short batch
// kept. With cfg.iterations > 0 passes repeat until the step budget is spent.
TrainResult fit(const RepresentationSet& reps, const SdeSpec& spec, ScoreNetConfig net_cfg,
                const TrainConfig& cfg);

// argmax(W z + b); ties break toward the lowest index. W is K x D row-major.
std::uint32_t predict_condition(const MatrixD& W, std::span<const double> b,
                                std::span<const double> z);

}  // namespace rdm
