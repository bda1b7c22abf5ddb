#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rdm/sde.hpp"

namespace rdm {

// Sin/cos features of a scalar with frequencies frozen at model creation.
// Output layout: [sin(2 pi f_k v) for k] ++ [cos(2 pi f_k v) for k].
struct FourierEmbedding {
    std::vector<double> freqs;  // dim/2 entries

    // Frequencies ~ N(0, scale^2) from mt19937_64(seed) via Box-Muller (Rng).
    static FourierEmbedding make(std::uint32_t dim, double scale, std::uint64_t seed);

    std::uint32_t dim() const { return static_cast<std::uint32_t>(2 * freqs.size()); }
    void embed(double v, std::span<double> out) const;
};

std::vector<double> fourier_embed(double v, std::uint32_t dim, double scale, std::uint64_t seed);

struct ScoreNetConfig {
    std::uint32_t input_dim = 0;
    std::uint32_t hidden_dim = 1024;
    std::uint32_t num_blocks = 12;
    std::uint32_t time_embed_dim = 128;
    std::uint32_t class_embed_dim = 256;
    std::uint32_t num_classes = 0;  // 0 = unconditional

    bool conditional() const { return num_classes > 0; }
    void validate() const;
    std::size_t param_count() const;
};

// Frequency scales for the frozen embeddings (project-wide constants).
constexpr double kTimeEmbedScale = 16.0;
constexpr double kClassEmbedScale = 1.0;

// Flat-parameter offsets. Layout, in order:
//   w_in [D x H], b_in [H],
//   per block k: w1 [H x H], b1 [H], p_t [T x H], (p_c [C x H] if conditional),
//                w2 [H x H], b2 [H],
//   w_out [H x D], b_out [D].
// All weight matrices are stored in-major ([in][out] row-major).
struct ParamLayout {
    std::size_t w_in = 0, b_in = 0;
    struct Block {
        std::size_t w1, b1, p_t, p_c, w2, b2;
    };
    std::vector<Block> blocks;
    std::size_t w_out = 0, b_out = 0;
    std::size_t total = 0;

    static ParamLayout make(const ScoreNetConfig& cfg);
};

// Time-conditioned (optionally class-conditioned) residual MLP approximating
// the score of the diffused data distribution. The raw head output is divided
// by kernel(sde, t).std, so the network learns the normalized score.
struct ScoreModel {
    ScoreNetConfig config;
    SdeSpec sde;
    std::uint64_t time_embed_seed = 0;
    std::uint64_t class_embed_seed = 0;
    std::vector<double> params;

    ParamLayout layout;             // derived from config
    FourierEmbedding time_embed;    // derived from time_embed_seed
    FourierEmbedding class_embed;   // derived from class_embed_seed

    std::size_t param_count() const { return layout.total; }
    // Rebuilds layout and frozen embeddings after config/seeds change.
    void finalize();
    void check_finite_params() const;
};

// Reproducible initialization: per-tensor seed streams so that models sharing
// a seed share every tensor they have in common; output head starts at zero.
ScoreModel init_score_model(const ScoreNetConfig& cfg, const SdeSpec& sde, std::uint64_t seed);

// Per-thread evaluation scratch. forward() is read-only on the model, so one
// Evaluator per thread gives lock-free concurrent evaluation.
class ScoreNetEval {
public:
    explicit ScoreNetEval(const ScoreModel& model);

    // s_theta(z, t[, c]); t in (0,1]
    void forward(std::span<const double> z, double t, std::optional<std::uint32_t> c,
                 std::span<double> out);

    // head output before the 1/std(t) scaling (equals std(t) * score)
    void forward_raw(std::span<const double> z, double t, std::optional<std::uint32_t> c,
                     std::span<double> out);

    // score plus its directional derivative w.r.t. z along dir (forward mode)
    void forward_jvp(std::span<const double> z, double t, std::optional<std::uint32_t> c,
                     std::span<const double> dir, std::span<double> out, std::span<double> jvp);

    const ScoreModel& model() const { return *model_; }

private:
    void run(std::span<const double> z, double t, std::optional<std::uint32_t> c,
             std::span<double> raw_out, const double* dir, double* raw_jvp);

    const ScoreModel* model_;
    std::vector<double> h_, u_, w_, et_, ec_, dh_, du_, dw_;
};

// Stored activations for one sample, produced by forward_acts and consumed by
// backward_sample during training.
struct ActivationTape {
    double t = 0;
    std::optional<std::uint32_t> c;
    std::vector<double> z;
    std::vector<double> et, ec;
    std::vector<double> h;      // (num_blocks + 1) x hidden: block inputs
    std::vector<double> u, vv;  // num_blocks x hidden: pre/post nonlinearity
    std::vector<double> raw;    // head output before scaling
};

class ScoreNetTrainEval {
public:
    explicit ScoreNetTrainEval(const ScoreModel& model);

    void forward_acts(std::span<const double> z, double t, std::optional<std::uint32_t> c,
                      ActivationTape& tape);

    // Accumulates d(loss)/d(params) into grad given d(loss)/d(raw head output).
    void backward_sample(const ActivationTape& tape, std::span<const double> draw,
                         std::span<double> grad);

private:
    const ScoreModel* model_;
    std::vector<double> dh_, du_, dv_, dwv_;
};

// Gradient of a scalar loss over a batch w.r.t. every parameter; exact
// reverse-mode. loss_fn maps per-sample raw head output to (loss contribution,
// d contribution/d raw). Returned gradient has params layout. Used by the
// trainer; exposed for gradient checking.
struct BatchLossGrad {
    double loss = 0;
    std::vector<double> grad;
};

}  // namespace rdm
