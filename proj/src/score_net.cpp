#include "rdm/score_net.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "rdm/errors.hpp"
#include "rdm/linalg.hpp"
#include "rdm/rng.hpp"

namespace rdm {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;
constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

// exact GELU and its derivative
inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
inline double gelu_deriv(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return cdf + x * pdf;
}

}  // namespace

FourierEmbedding FourierEmbedding::make(std::uint32_t dim, double scale, std::uint64_t seed) {
    if (dim == 0 || dim % 2 != 0) throw ConfigError("fourier embedding dim must be even and > 0");
    if (!(scale > 0.0)) throw ConfigError("fourier embedding scale must be positive");
    FourierEmbedding e;
    e.freqs.resize(dim / 2);
    Rng rng(seed);
    for (auto& f : e.freqs) f = scale * rng.normal();
    return e;
}

void FourierEmbedding::embed(double v, std::span<double> out) const {
    const std::size_t half = freqs.size();
    for (std::size_t k = 0; k < half; ++k) {
        const double a = kTwoPi * freqs[k] * v;
        out[k] = std::sin(a);
        out[half + k] = std::cos(a);
    }
}

std::vector<double> fourier_embed(double v, std::uint32_t dim, double scale, std::uint64_t seed) {
    auto e = FourierEmbedding::make(dim, scale, seed);
    std::vector<double> out(dim);
    e.embed(v, out);
    return out;
}

void ScoreNetConfig::validate() const {
    if (input_dim == 0) throw ConfigError("score net: input_dim must be positive");
    if (hidden_dim == 0 || num_blocks == 0) throw ConfigError("score net: empty architecture");
    if (time_embed_dim == 0 || time_embed_dim % 2 != 0)
        throw ConfigError("score net: time_embed_dim must be even and positive");
    if (class_embed_dim == 0 || class_embed_dim % 2 != 0 || class_embed_dim > 256)
        throw ConfigError("score net: class_embed_dim must be even, positive and <= 256");
}

std::size_t ScoreNetConfig::param_count() const {
    return ParamLayout::make(*this).total;
}

ParamLayout ParamLayout::make(const ScoreNetConfig& cfg) {
    ParamLayout L;
    const std::size_t D = cfg.input_dim, H = cfg.hidden_dim;
    const std::size_t T = cfg.time_embed_dim, C = cfg.class_embed_dim;
    std::size_t off = 0;
    L.w_in = off; off += D * H;
    L.b_in = off; off += H;
    L.blocks.resize(cfg.num_blocks);
    for (auto& b : L.blocks) {
        b.w1 = off; off += H * H;
        b.b1 = off; off += H;
        b.p_t = off; off += T * H;
        if (cfg.conditional()) { b.p_c = off; off += C * H; } else { b.p_c = 0; }
        b.w2 = off; off += H * H;
        b.b2 = off; off += H;
    }
    L.w_out = off; off += H * D;
    L.b_out = off; off += D;
    L.total = off;
    return L;
}

void ScoreModel::finalize() {
    config.validate();
    sde.validate();
    layout = ParamLayout::make(config);
    time_embed = FourierEmbedding::make(config.time_embed_dim, kTimeEmbedScale, time_embed_seed);
    if (config.conditional())
        class_embed = FourierEmbedding::make(config.class_embed_dim, kClassEmbedScale, class_embed_seed);
    if (params.size() != layout.total)
        throw DataError("score net: parameter array size " + std::to_string(params.size()) +
                        " does not match config (" + std::to_string(layout.total) + ")");
}

void ScoreModel::check_finite_params() const {
    for (double p : params)
        if (!std::isfinite(p)) throw NumericError("score net: non-finite parameter");
}

namespace {

// Stable per-tensor stream ids: models of the same seed share every tensor
// they have in common, conditional or not.
constexpr std::uint64_t kStreamWIn = 100;
constexpr std::uint64_t kStreamBlockBase = 1000;   // + 10*k + slot
constexpr std::uint64_t kSlotW1 = 0, kSlotPT = 1, kSlotPC = 2, kSlotW2 = 3;

void fill_gaussian(std::span<double> w, double stddev, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& x : w) x = stddev * rng.normal();
}

}  // namespace

ScoreModel init_score_model(const ScoreNetConfig& cfg, const SdeSpec& sde, std::uint64_t seed) {
    cfg.validate();
    sde.validate();
    ScoreModel m;
    m.config = cfg;
    m.sde = sde;
    m.time_embed_seed = split_seed(seed, seed_stream::time_embed);
    m.class_embed_seed = split_seed(seed, seed_stream::class_embed);
    m.params.assign(ParamLayout::make(cfg).total, 0.0);
    m.finalize();

    const auto& L = m.layout;
    const std::size_t D = cfg.input_dim, H = cfg.hidden_dim;
    const std::size_t T = cfg.time_embed_dim, C = cfg.class_embed_dim;
    auto p = [&](std::size_t off, std::size_t n) { return std::span<double>(m.params).subspan(off, n); };

    fill_gaussian(p(L.w_in, D * H), 1.0 / std::sqrt(static_cast<double>(D)),
                  split_seed(seed, kStreamWIn));
    for (std::uint32_t k = 0; k < cfg.num_blocks; ++k) {
        const auto& b = L.blocks[k];
        const std::uint64_t base = kStreamBlockBase + 10ULL * k;
        fill_gaussian(p(b.w1, H * H), 1.0 / std::sqrt(static_cast<double>(H)),
                      split_seed(seed, base + kSlotW1));
        fill_gaussian(p(b.p_t, T * H), 1.0 / std::sqrt(static_cast<double>(T)),
                      split_seed(seed, base + kSlotPT));
        if (cfg.conditional())
            fill_gaussian(p(b.p_c, C * H), 1.0 / std::sqrt(static_cast<double>(C)),
                          split_seed(seed, base + kSlotPC));
        fill_gaussian(p(b.w2, H * H), 1.0 / std::sqrt(static_cast<double>(H)),
                      split_seed(seed, base + kSlotW2));
    }
    // biases and the output head stay zero: the initial score is identically 0
    return m;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

namespace {

void check_inputs(const ScoreModel& m, std::span<const double> z, double t,
                  std::optional<std::uint32_t> c) {
    if (z.size() != m.config.input_dim)
        throw DataError("score net: input dimension " + std::to_string(z.size()) +
                        " does not match config input_dim " + std::to_string(m.config.input_dim));
    if (!(t > 0.0 && t <= 1.0)) throw NumericError("score net: t must lie in (0,1]");
    if (m.config.conditional()) {
        if (!c) throw DataError("score net: conditional model requires a class id");
        if (*c >= m.config.num_classes) throw DataError("score net: class id out of range");
    } else if (c) {
        throw DataError("score net: unconditional model given a class id");
    }
}

}  // namespace

ScoreNetEval::ScoreNetEval(const ScoreModel& model) : model_(&model) {
    const auto& cfg = model.config;
    h_.resize(cfg.hidden_dim);
    u_.resize(cfg.hidden_dim);
    w_.resize(cfg.hidden_dim);
    et_.resize(cfg.time_embed_dim);
    ec_.resize(cfg.conditional() ? cfg.class_embed_dim : 0);
    dh_.resize(cfg.hidden_dim);
    du_.resize(cfg.hidden_dim);
    dw_.resize(cfg.hidden_dim);
}

void ScoreNetEval::run(std::span<const double> z, double t, std::optional<std::uint32_t> c,
                       std::span<double> raw_out, const double* dir, double* raw_jvp) {
    const auto& m = *model_;
    const auto& L = m.layout;
    const std::size_t D = m.config.input_dim, H = m.config.hidden_dim;
    const double* P = m.params.data();

    m.time_embed.embed(t, et_);
    if (m.config.conditional()) m.class_embed.embed(static_cast<double>(*c), ec_);

    // h = W_in z + b_in
    std::memcpy(h_.data(), P + L.b_in, H * sizeof(double));
    affine_accum(P + L.w_in, z.data(), h_.data(), D, H);
    if (dir) {
        std::fill(dh_.begin(), dh_.end(), 0.0);
        affine_accum(P + L.w_in, dir, dh_.data(), D, H);
    }

    for (const auto& b : L.blocks) {
        // u = W1 h + b1 + P_t et (+ P_c ec)
        std::memcpy(u_.data(), P + b.b1, H * sizeof(double));
        affine_accum(P + b.w1, h_.data(), u_.data(), H, H);
        affine_accum(P + b.p_t, et_.data(), u_.data(), m.config.time_embed_dim, H);
        if (m.config.conditional())
            affine_accum(P + b.p_c, ec_.data(), u_.data(), m.config.class_embed_dim, H);

        if (dir) {
            std::fill(du_.begin(), du_.end(), 0.0);
            affine_accum(P + b.w1, dh_.data(), du_.data(), H, H);
            for (std::size_t i = 0; i < H; ++i) du_[i] *= gelu_deriv(u_[i]);
            std::fill(dw_.begin(), dw_.end(), 0.0);
            affine_accum(P + b.w2, du_.data(), dw_.data(), H, H);
        }

        for (std::size_t i = 0; i < H; ++i) u_[i] = gelu(u_[i]);
        // h += W2 v + b2
        std::memcpy(w_.data(), P + b.b2, H * sizeof(double));
        affine_accum(P + b.w2, u_.data(), w_.data(), H, H);
        for (std::size_t i = 0; i < H; ++i) h_[i] += w_[i];
        if (dir)
            for (std::size_t i = 0; i < H; ++i) dh_[i] += dw_[i];
    }

    std::memcpy(raw_out.data(), P + L.b_out, D * sizeof(double));
    affine_accum(P + L.w_out, h_.data(), raw_out.data(), H, D);
    if (dir) {
        std::fill(raw_jvp, raw_jvp + D, 0.0);
        affine_accum(P + L.w_out, dh_.data(), raw_jvp, H, D);
    }
}

void ScoreNetEval::forward_raw(std::span<const double> z, double t,
                               std::optional<std::uint32_t> c, std::span<double> out) {
    check_inputs(*model_, z, t, c);
    run(z, t, c, out, nullptr, nullptr);
}

void ScoreNetEval::forward(std::span<const double> z, double t, std::optional<std::uint32_t> c,
                           std::span<double> out) {
    forward_raw(z, t, c, out);
    const double s = kernel(model_->sde, t).std;
    if (!(s > 0.0)) throw NumericError("score net: kernel std is zero at t=" + std::to_string(t));
    for (auto& x : out) x /= s;
}

void ScoreNetEval::forward_jvp(std::span<const double> z, double t,
                               std::optional<std::uint32_t> c, std::span<const double> dir,
                               std::span<double> out, std::span<double> jvp) {
    check_inputs(*model_, z, t, c);
    run(z, t, c, out, dir.data(), jvp.data());
    const double s = kernel(model_->sde, t).std;
    if (!(s > 0.0)) throw NumericError("score net: kernel std is zero at t=" + std::to_string(t));
    for (auto& x : out) x /= s;
    for (auto& x : jvp) x /= s;
}

// ---------------------------------------------------------------------------
// training path
// ---------------------------------------------------------------------------

ScoreNetTrainEval::ScoreNetTrainEval(const ScoreModel& model) : model_(&model) {
    const std::size_t H = model.config.hidden_dim;
    dh_.resize(H);
    du_.resize(H);
    dv_.resize(H);
    dwv_.resize(H);
}

void ScoreNetTrainEval::forward_acts(std::span<const double> z, double t,
                                     std::optional<std::uint32_t> c, ActivationTape& tape) {
    const auto& m = *model_;
    check_inputs(m, z, t, c);
    const auto& L = m.layout;
    const std::size_t D = m.config.input_dim, H = m.config.hidden_dim;
    const std::size_t nb = m.config.num_blocks;
    const double* P = m.params.data();

    tape.t = t;
    tape.c = c;
    tape.z.assign(z.begin(), z.end());
    tape.et.resize(m.config.time_embed_dim);
    m.time_embed.embed(t, tape.et);
    if (m.config.conditional()) {
        tape.ec.resize(m.config.class_embed_dim);
        m.class_embed.embed(static_cast<double>(*c), tape.ec);
    }
    tape.h.resize((nb + 1) * H);
    tape.u.resize(nb * H);
    tape.vv.resize(nb * H);
    tape.raw.resize(D);

    double* h0 = tape.h.data();
    std::memcpy(h0, P + L.b_in, H * sizeof(double));
    affine_accum(P + L.w_in, z.data(), h0, D, H);

    for (std::size_t k = 0; k < nb; ++k) {
        const auto& b = L.blocks[k];
        const double* hk = tape.h.data() + k * H;
        double* u = tape.u.data() + k * H;
        double* v = tape.vv.data() + k * H;
        double* hn = tape.h.data() + (k + 1) * H;

        std::memcpy(u, P + b.b1, H * sizeof(double));
        affine_accum(P + b.w1, hk, u, H, H);
        affine_accum(P + b.p_t, tape.et.data(), u, m.config.time_embed_dim, H);
        if (m.config.conditional())
            affine_accum(P + b.p_c, tape.ec.data(), u, m.config.class_embed_dim, H);

        for (std::size_t i = 0; i < H; ++i) v[i] = gelu(u[i]);

        std::memcpy(hn, P + b.b2, H * sizeof(double));
        affine_accum(P + b.w2, v, hn, H, H);
        for (std::size_t i = 0; i < H; ++i) hn[i] += hk[i];
    }

    std::memcpy(tape.raw.data(), P + L.b_out, D * sizeof(double));
    affine_accum(P + L.w_out, tape.h.data() + nb * H, tape.raw.data(), H, D);
}

void ScoreNetTrainEval::backward_sample(const ActivationTape& tape, std::span<const double> draw,
                                        std::span<double> grad) {
    const auto& m = *model_;
    const auto& L = m.layout;
    const std::size_t D = m.config.input_dim, H = m.config.hidden_dim;
    const std::size_t nb = m.config.num_blocks;
    const double* P = m.params.data();
    double* G = grad.data();

    // head
    const double* h_last = tape.h.data() + nb * H;
    outer_accum(G + L.w_out, h_last, draw.data(), H, D);
    for (std::size_t j = 0; j < D; ++j) G[L.b_out + j] += draw[j];
    affine_transpose_apply(P + L.w_out, draw.data(), dh_.data(), H, D);

    for (std::size_t k = nb; k-- > 0;) {
        const auto& b = L.blocks[k];
        const double* hk = tape.h.data() + k * H;
        const double* u = tape.u.data() + k * H;
        const double* v = tape.vv.data() + k * H;

        // dh is d loss / d h_{k+1}; the skip passes it through unchanged
        outer_accum(G + b.w2, v, dh_.data(), H, H);
        for (std::size_t i = 0; i < H; ++i) G[b.b2 + i] += dh_[i];
        affine_transpose_apply(P + b.w2, dh_.data(), dv_.data(), H, H);
        for (std::size_t i = 0; i < H; ++i) du_[i] = dv_[i] * gelu_deriv(u[i]);

        outer_accum(G + b.w1, hk, du_.data(), H, H);
        for (std::size_t i = 0; i < H; ++i) G[b.b1 + i] += du_[i];
        outer_accum(G + b.p_t, tape.et.data(), du_.data(), m.config.time_embed_dim, H);
        if (m.config.conditional())
            outer_accum(G + b.p_c, tape.ec.data(), du_.data(), m.config.class_embed_dim, H);

        affine_transpose_apply(P + b.w1, du_.data(), dwv_.data(), H, H);
        for (std::size_t i = 0; i < H; ++i) dh_[i] += dwv_[i];
    }

    outer_accum(G + L.w_in, tape.z.data(), dh_.data(), D, H);
    for (std::size_t i = 0; i < H; ++i) G[L.b_in + i] += dh_[i];
}

}  // namespace rdm
