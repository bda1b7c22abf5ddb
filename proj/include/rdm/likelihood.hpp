#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdm/normalizer.hpp"
#include "rdm/ode.hpp"
#include "rdm/score_net.hpp"
#include "rdm/sde.hpp"

namespace rdm {

enum class ProbeKind : std::uint8_t { Rademacher = 0, Gaussian = 1 };

struct OdeConfig {
    double atol = 1e-5;
    double rtol = 1e-5;
    double t_min = 1e-5;
    double t_max = 1.0;
    int probe_count = 1;
    ProbeKind probe_kind = ProbeKind::Rademacher;
    std::uint64_t probe_seed = 0;
    long max_steps = 100000;

    void validate() const;
};

struct LikelihoodRecord {
    double logp = 0;             // nats, input space
    double bpd = 0;              // -logp / (D ln 2)
    int nfe = 0;                 // vector-field evaluations
    double prior_term = 0;       // log p_1(z(t_max))
    double divergence_term = 0;  // int_{t_min}^{t_max} div f_theta dt
    double jacobian_term = 0;    // normalizer constant
};

struct LikelihoodResult {
    bool ok = false;
    LikelihoodRecord rec;
    std::string error;
    double t_reached = 0;
};

// Probability flow ODE vector field f_theta(z,t) = f(z,t) - 1/2 g(t)^2 s(z,t),
// with an exact directional derivative for Hutchinson probes.
class FlowField {
public:
    virtual ~FlowField() = default;
    virtual std::size_t dim() const = 0;
    virtual void eval(double t, std::span<const double> z, std::span<double> out) const = 0;
    virtual void eval_with_jvp(double t, std::span<const double> z, std::span<const double> dir,
                               std::span<double> out, std::span<double> jvp) const = 0;
};

// Field backed by a trained score model. Holds evaluation scratch: create one
// instance per thread.
class ModelFlowField : public FlowField {
public:
    ModelFlowField(const ScoreModel& model, std::optional<std::uint32_t> class_id);
    std::size_t dim() const override;
    void eval(double t, std::span<const double> z, std::span<double> out) const override;
    void eval_with_jvp(double t, std::span<const double> z, std::span<const double> dir,
                       std::span<double> out, std::span<double> jvp) const override;
    void set_class(std::optional<std::uint32_t> c) { class_id_ = c; }

private:
    const ScoreModel* model_;
    std::optional<std::uint32_t> class_id_;
    mutable ScoreNetEval eval_;
    mutable std::vector<double> score_, sjvp_;
};

// Analytic field for N(0, data_std^2 I) data: the diffused marginal stays
// Gaussian, so the exact score is -z / v(t) with
// v(t) = mean_coeff(t)^2 data_std^2 + std(t)^2. Stands in for a perfectly
// trained model in oracle tests.
class GaussianOracleField : public FlowField {
public:
    GaussianOracleField(const SdeSpec& spec, std::size_t dim, double data_std = 1.0)
        : spec_(spec), dim_(dim), data_var_(data_std * data_std) {}
    std::size_t dim() const override { return dim_; }
    void eval(double t, std::span<const double> z, std::span<double> out) const override;
    void eval_with_jvp(double t, std::span<const double> z, std::span<const double> dir,
                       std::span<double> out, std::span<double> jvp) const override;

private:
    double coeff(double t) const;  // field is coeff(t) * z
    SdeSpec spec_;
    std::size_t dim_;
    double data_var_;
};

// Mean over the probe rows of e^T J_field(z,t) e, each Jacobian-vector product
// computed by exact directional differentiation of the field.
double divergence_estimate(const FlowField& field, std::span<const double> z, double t,
                           const MatrixD& probes);

// Draws probe_count probe rows for one sample. The per-sample seed is derived
// from the probe seed and the sample content (bit pattern), so batch results
// are independent of row order and of the degree of parallelism.
MatrixD draw_probes(const OdeConfig& cfg, std::span<const double> z);
std::uint64_t probe_seed_for(std::uint64_t probe_seed, std::span<const double> z);

// Exact log-likelihood via the instantaneous change of variables along the
// probability flow ODE: logp = log p_1(z(t_max)) + int div f_theta dt + the
// normalizer Jacobian. The input z is in input space; the field operates in
// normalized space.
LikelihoodResult log_likelihood(const FlowField& field, const SdeSpec& spec,
                                const Normalizer& norm, std::span<const double> z,
                                const OdeConfig& cfg);

LikelihoodResult log_likelihood(const ScoreModel& model, const Normalizer& norm,
                                std::span<const double> z, const OdeConfig& cfg,
                                std::optional<std::uint32_t> c = std::nullopt);

// Factory returning a per-thread field; set_class is applied per row when
// labels are present.
using FieldFactory = std::function<std::unique_ptr<FlowField>()>;

std::vector<LikelihoodResult> log_likelihood_batch(const FieldFactory& make_field,
                                                   const SdeSpec& spec, const Normalizer& norm,
                                                   const MatrixD& reps, const OdeConfig& cfg,
                                                   const std::vector<std::int32_t>* labels,
                                                   int threads);

std::vector<LikelihoodResult> log_likelihood_batch(const ScoreModel& model, const Normalizer& norm,
                                                   const MatrixD& reps, const OdeConfig& cfg,
                                                   const std::vector<std::int32_t>* labels,
                                                   int threads);

// Integrates z alone (no divergence accumulator) between arbitrary times;
// used by the sampler and the invertibility checks.
struct FlowIntegration {
    bool ok = false;
    std::vector<double> z;
    int nfe = 0;
    double t_reached = 0;
    std::string error;
};
FlowIntegration integrate_flow(const FlowField& field, std::span<const double> z0, double t0,
                               double t1, const OdeConfig& cfg);

}  // namespace rdm
