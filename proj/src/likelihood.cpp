#include "rdm/likelihood.hpp"

#include <cmath>
#include <cstring>

#include "rdm/errors.hpp"
#include "rdm/parallel.hpp"
#include "rdm/rng.hpp"

namespace rdm {

void OdeConfig::validate() const {
    if (!(atol > 0) || !(rtol > 0)) throw ConfigError("ode: tolerances must be positive");
    if (!(t_min > 0 && t_min < t_max && t_max <= 1.0))
        throw ConfigError("ode: requires 0 < t_min < t_max <= 1");
    if (probe_count < 1) throw ConfigError("ode: probe_count must be >= 1");
    if (max_steps < 1) throw ConfigError("ode: max_steps must be >= 1");
}

// ---------------------------------------------------------------------------
// fields
// ---------------------------------------------------------------------------

ModelFlowField::ModelFlowField(const ScoreModel& model, std::optional<std::uint32_t> class_id)
    : model_(&model), class_id_(class_id), eval_(model) {
    score_.resize(model.config.input_dim);
    sjvp_.resize(model.config.input_dim);
}

std::size_t ModelFlowField::dim() const { return model_->config.input_dim; }

void ModelFlowField::eval(double t, std::span<const double> z, std::span<double> out) const {
    eval_.forward(z, t, class_id_, score_);
    const auto& spec = model_->sde;
    const double g = diffusion(spec, t);
    const double gg = 0.5 * g * g;
    if (spec.kind == SdeKind::VE) {
        for (std::size_t i = 0; i < z.size(); ++i) out[i] = -gg * score_[i];
    } else {
        const double c = -0.5 * spec.beta(t);
        for (std::size_t i = 0; i < z.size(); ++i) out[i] = c * z[i] - gg * score_[i];
    }
}

void ModelFlowField::eval_with_jvp(double t, std::span<const double> z,
                                   std::span<const double> dir, std::span<double> out,
                                   std::span<double> jvp) const {
    eval_.forward_jvp(z, t, class_id_, dir, score_, sjvp_);
    const auto& spec = model_->sde;
    const double g = diffusion(spec, t);
    const double gg = 0.5 * g * g;
    if (spec.kind == SdeKind::VE) {
        for (std::size_t i = 0; i < z.size(); ++i) {
            out[i] = -gg * score_[i];
            jvp[i] = -gg * sjvp_[i];
        }
    } else {
        const double c = -0.5 * spec.beta(t);
        for (std::size_t i = 0; i < z.size(); ++i) {
            out[i] = c * z[i] - gg * score_[i];
            jvp[i] = c * dir[i] - gg * sjvp_[i];
        }
    }
}

double GaussianOracleField::coeff(double t) const {
    const Kernel k = kernel(spec_, t);
    const double v = k.mean_coeff * k.mean_coeff * data_var_ + k.std * k.std;
    const double g = diffusion(spec_, t);
    double c = 0.5 * g * g / v;  // -1/2 g^2 * (-1/v)
    if (spec_.kind != SdeKind::VE) c -= 0.5 * spec_.beta(t);
    return c;
}

void GaussianOracleField::eval(double t, std::span<const double> z, std::span<double> out) const {
    const double c = coeff(t);
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = c * z[i];
}

void GaussianOracleField::eval_with_jvp(double t, std::span<const double> z,
                                        std::span<const double> dir, std::span<double> out,
                                        std::span<double> jvp) const {
    const double c = coeff(t);
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = c * z[i];
        jvp[i] = c * dir[i];
    }
}

// ---------------------------------------------------------------------------
// Hutchinson divergence
// ---------------------------------------------------------------------------

double divergence_estimate(const FlowField& field, std::span<const double> z, double t,
                           const MatrixD& probes) {
    const std::size_t D = field.dim();
    if (probes.cols != D || probes.rows == 0)
        throw DataError("divergence_estimate: probe shape mismatch");
    std::vector<double> out(D), jvp(D);
    double acc = 0;
    for (std::size_t p = 0; p < probes.rows; ++p) {
        field.eval_with_jvp(t, z, probes.row_span(p), out, jvp);
        acc += dot(probes.row(p), jvp.data(), D);
    }
    return acc / static_cast<double>(probes.rows);
}

std::uint64_t probe_seed_for(std::uint64_t probe_seed, std::span<const double> z) {
    // content hash: batch results stay independent of row order and threading
    std::uint64_t h = mix64(probe_seed);
    for (double x : z) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof(bits));
        h = mix64(h ^ bits);
    }
    return h;
}

MatrixD draw_probes(const OdeConfig& cfg, std::span<const double> z) {
    MatrixD probes(static_cast<std::size_t>(cfg.probe_count), z.size());
    Rng rng(probe_seed_for(cfg.probe_seed, z));
    for (auto& v : probes.v)
        v = (cfg.probe_kind == ProbeKind::Rademacher) ? rng.rademacher() : rng.normal();
    return probes;
}

// ---------------------------------------------------------------------------
// log-likelihood
// ---------------------------------------------------------------------------

LikelihoodResult log_likelihood(const FlowField& field, const SdeSpec& spec,
                                const Normalizer& norm, std::span<const double> z,
                                const OdeConfig& cfg) {
    cfg.validate();
    const std::size_t D = field.dim();
    if (z.size() != D || norm.dim() != D)
        throw DataError("log_likelihood: dimension mismatch");
    LikelihoodResult res;
    for (double x : z)
        if (!std::isfinite(x)) {
            res.error = "non-finite input";
            return res;
        }

    std::vector<double> zn(D);
    norm.normalize(z, zn);
    const MatrixD probes = draw_probes(cfg, zn);

    std::vector<double> fout(D), jvp(D);
    auto rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
        const auto zz = y.first(D);
        double div = 0;
        for (std::size_t p = 0; p < probes.rows; ++p) {
            field.eval_with_jvp(t, zz, probes.row_span(p), fout, jvp);
            div += dot(probes.row(p), jvp.data(), D);
        }
        std::memcpy(dy.data(), fout.data(), D * sizeof(double));
        dy[D] = div / static_cast<double>(probes.rows);
    };

    std::vector<double> y0(D + 1, 0.0);
    std::memcpy(y0.data(), zn.data(), D * sizeof(double));
    OdeOptions opt{cfg.atol, cfg.rtol, cfg.max_steps};
    OdeSolution sol = rkf45(rhs, y0, cfg.t_min, cfg.t_max, opt);
    res.t_reached = sol.t_reached;
    if (!sol.ok) {
        res.error = "ode solve failed: " + sol.error + " (t reached " +
                    std::to_string(sol.t_reached) + ")";
        return res;
    }

    auto& rec = res.rec;
    rec.nfe = sol.nfe;
    rec.prior_term = prior_logpdf(spec, std::span<const double>(sol.y).first(D));
    rec.divergence_term = sol.y[D];
    rec.jacobian_term = norm.log_jacobian();
    rec.logp = rec.prior_term + rec.divergence_term + rec.jacobian_term;
    rec.bpd = -rec.logp / (static_cast<double>(D) * std::log(2.0));
    if (!std::isfinite(rec.logp)) {
        res.error = "non-finite log-likelihood";
        return res;
    }
    res.ok = true;
    return res;
}

LikelihoodResult log_likelihood(const ScoreModel& model, const Normalizer& norm,
                                std::span<const double> z, const OdeConfig& cfg,
                                std::optional<std::uint32_t> c) {
    ModelFlowField field(model, c);
    return log_likelihood(field, model.sde, norm, z, cfg);
}

std::vector<LikelihoodResult> log_likelihood_batch(const FieldFactory& make_field,
                                                   const SdeSpec& spec, const Normalizer& norm,
                                                   const MatrixD& reps, const OdeConfig& cfg,
                                                   const std::vector<std::int32_t>* labels,
                                                   int threads) {
    if (labels && labels->size() != reps.rows)
        throw DataError("log_likelihood_batch: label count does not match row count");
    std::vector<LikelihoodResult> out(reps.rows);
    const int nthreads = std::max(1, threads);

    // one field per thread; per-sample results depend only on the sample, so
    // the output is identical for any thread count

#pragma omp parallel num_threads(nthreads)
    {
        auto field = make_field();
#pragma omp for schedule(dynamic, 1)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(reps.rows); ++i) {
            if (labels) {
                if (auto* mf = dynamic_cast<ModelFlowField*>(field.get()))
                    mf->set_class(static_cast<std::uint32_t>((*labels)[i]));
            }
            try {
                out[i] = log_likelihood(*field, spec, norm, reps.row_span(i), cfg);
            } catch (const std::exception& e) {
                out[i].ok = false;
                out[i].error = e.what();
            }
        }
    }
    return out;
}

std::vector<LikelihoodResult> log_likelihood_batch(const ScoreModel& model, const Normalizer& norm,
                                                   const MatrixD& reps, const OdeConfig& cfg,
                                                   const std::vector<std::int32_t>* labels,
                                                   int threads) {
    if (model.config.conditional() && !labels)
        throw DataError("log_likelihood_batch: conditional model requires labels");
    FieldFactory factory = [&model]() -> std::unique_ptr<FlowField> {
        return std::make_unique<ModelFlowField>(model, std::nullopt);
    };
    return log_likelihood_batch(factory, model.sde, norm, reps, cfg, labels, threads);
}

FlowIntegration integrate_flow(const FlowField& field, std::span<const double> z0, double t0,
                               double t1, const OdeConfig& cfg) {
    const std::size_t D = field.dim();
    if (z0.size() != D) throw DataError("integrate_flow: dimension mismatch");
    auto rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
        field.eval(t, y, dy);
    };
    OdeOptions opt{cfg.atol, cfg.rtol, cfg.max_steps};
    OdeSolution sol = rkf45(rhs, z0, t0, t1, opt);
    FlowIntegration res;
    res.ok = sol.ok;
    res.z = std::move(sol.y);
    res.nfe = sol.nfe;
    res.t_reached = sol.t_reached;
    res.error = sol.error;
    return res;
}

}  // namespace rdm
