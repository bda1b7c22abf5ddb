#include "rdm/sde.hpp"

#include <cmath>
#include <string>

#include "rdm/errors.hpp"
#include "rdm/linalg.hpp"
#include "rdm/rng.hpp"

namespace rdm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_time(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw NumericError("sde: t outside [0,1]: " + std::to_string(t));
}

void check_finite(std::span<const double> z) {
    for (double x : z)
        if (!std::isfinite(x)) throw NumericError("sde: non-finite input component");
}

}  // namespace

const char* sde_kind_name(SdeKind k) {
    switch (k) {
        case SdeKind::VE: return "ve";
        case SdeKind::VP: return "vp";
        case SdeKind::SubVP: return "subvp";
    }
    return "?";
}

SdeKind sde_kind_from_name(const std::string& name) {
    if (name == "ve") return SdeKind::VE;
    if (name == "vp") return SdeKind::VP;
    if (name == "subvp") return SdeKind::SubVP;
    throw ConfigError("unknown sde kind: '" + name + "' (expected ve|vp|subvp)");
}

void SdeSpec::validate() const {
    if (!(sigma_min > 0.0) || !(sigma_max > 0.0) || !(beta_min > 0.0) || !(beta_max > 0.0))
        throw ConfigError("sde: schedule parameters must be strictly positive");
    if (!(sigma_min < sigma_max)) throw ConfigError("sde: requires sigma_min < sigma_max");
    if (!(beta_min < beta_max)) throw ConfigError("sde: requires beta_min < beta_max");
}

double SdeSpec::sigma(double t) const {
    return sigma_min * std::pow(sigma_max / sigma_min, t);
}

void drift(const SdeSpec& spec, std::span<const double> z, double t, std::span<double> out) {
    check_time(t);
    check_finite(z);
    if (spec.kind == SdeKind::VE) {
        for (auto& x : out) x = 0.0;
        return;
    }
    const double c = -0.5 * spec.beta(t);
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = c * z[i];
}

double diffusion(const SdeSpec& spec, double t) {
    check_time(t);
    switch (spec.kind) {
        case SdeKind::VE:
            return spec.sigma(t) * std::sqrt(2.0 * std::log(spec.sigma_max / spec.sigma_min));
        case SdeKind::VP:
            return std::sqrt(spec.beta(t));
        case SdeKind::SubVP: {
            const double b = spec.beta(t);
            return std::sqrt(b * (1.0 - std::exp(-2.0 * spec.beta_integral(t))));
        }
    }
    return 0.0;
}

Kernel kernel(const SdeSpec& spec, double t) {
    check_time(t);
    Kernel k;
    switch (spec.kind) {
        case SdeKind::VE:
            k.mean_coeff = 1.0;
            k.std = spec.sigma(t);
            break;
        case SdeKind::VP: {
            const double B = spec.beta_integral(t);
            k.mean_coeff = std::exp(-0.5 * B);
            k.std = std::sqrt(1.0 - std::exp(-B));
            break;
        }
        case SdeKind::SubVP: {
            const double B = spec.beta_integral(t);
            k.mean_coeff = std::exp(-0.5 * B);
            k.std = 1.0 - std::exp(-B);
            break;
        }
    }
    return k;
}

double prior_logpdf(const SdeSpec& spec, std::span<const double> z) {
    check_finite(z);
    const double d = static_cast<double>(z.size());
    if (spec.kind == SdeKind::VE) {
        const double s2 = spec.sigma_max * spec.sigma_max;
        return -0.5 * d * (kLog2Pi + std::log(s2)) - 0.5 * squared_norm(z) / s2;
    }
    return -0.5 * d * kLog2Pi - 0.5 * squared_norm(z);
}

void prior_sample(const SdeSpec& spec, Rng& rng, std::span<double> out) {
    const double s = (spec.kind == SdeKind::VE) ? spec.sigma_max : 1.0;
    for (auto& x : out) x = s * rng.normal();
}

}  // namespace rdm
