#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rdm {

enum class SdeKind : std::uint8_t { VE = 0, VP = 1, SubVP = 2 };

const char* sde_kind_name(SdeKind k);
SdeKind sde_kind_from_name(const std::string& name);

// One of the three diffusion SDE families with its noise-schedule parameters.
//   VE:    dz = sqrt(d[sigma^2(t)]/dt) dw,        sigma(t) = sigma_min * (sigma_max/sigma_min)^t
//   VP:    dz = -1/2 beta(t) z dt + sqrt(beta(t)) dw
//   SubVP: dz = -1/2 beta(t) z dt + sqrt(beta(t) (1 - e^{-2 int beta})) dw
// with beta(t) = beta_min + t (beta_max - beta_min).
struct SdeSpec {
    SdeKind kind = SdeKind::SubVP;
    double sigma_min = 0.01;
    double sigma_max = 50.0;
    double beta_min = 0.2;
    double beta_max = 20.0;

    void validate() const;  // throws ConfigError on bad parameters

    double beta(double t) const { return beta_min + t * (beta_max - beta_min); }
    // int_0^t beta(s) ds
    double beta_integral(double t) const {
        return beta_min * t + 0.5 * t * t * (beta_max - beta_min);
    }
    double sigma(double t) const;
};

// Gaussian perturbation kernel p_{0t}(z(t)|z(0)) = N(mean_coeff * z(0), std^2 I).
struct Kernel {
    double mean_coeff = 1.0;
    double std = 0.0;
};

// Drift f(z,t) of the forward SDE. VE has no drift; VP/SubVP give -1/2 beta(t) z.
void drift(const SdeSpec& spec, std::span<const double> z, double t, std::span<double> out);

// Scalar diffusion coefficient g(t).
double diffusion(const SdeSpec& spec, double t);

Kernel kernel(const SdeSpec& spec, double t);

// Log-density of the terminal prior p_1: N(0, I) for VP/SubVP, N(0, sigma_max^2 I) for VE.
double prior_logpdf(const SdeSpec& spec, std::span<const double> z);

// Draw from the terminal prior.
class Rng;
void prior_sample(const SdeSpec& spec, Rng& rng, std::span<double> out);

}  // namespace rdm
