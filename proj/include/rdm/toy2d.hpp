#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdm/likelihood.hpp"
#include "rdm/linalg.hpp"

namespace rdm {

enum class ToyName : std::uint8_t { EightGaussians = 0, Spiral = 1, Checkerboard = 2, Rings = 3 };

const char* toy_name_str(ToyName n);
ToyName toy_name_from_str(const std::string& s);

// Generator constants, fixed and version-pinned here. Divergence values depend
// on them, so changing any constant invalidates recorded baselines.
struct ToyGenParams {
    // EightGaussians: centers at radius 2, angles k*45deg, isotropic noise
    double eight_radius = 2.0;
    double eight_noise = 0.1;
    // Spiral: Archimedean r = a*theta, theta ~ U[0, 3pi], a = 4/(3pi), radial noise
    double spiral_theta_max = 3.0 * 3.1415926535897932384626433832795;
    double spiral_noise = 0.1;
    // Checkerboard: 4x4 alternating cells on [-4,4]^2
    double checker_extent = 4.0;
    // Rings: concentric radii with radial jitter
    std::vector<double> ring_radii{0.8, 1.6, 2.4, 3.2};
    double ring_jitter = 0.08;
};

struct ToyDataset {
    ToyName name;
    MatrixD points;  // N x 2
};

ToyDataset sample_toy(ToyName name, std::size_t n, std::uint64_t seed,
                      const ToyGenParams& params = {});

// Fixed 2-D histogram over [-extent, extent]^2; out-of-range points are
// clamped into the edge bins so counts always sum to the sample count.
struct HistogramGrid {
    double extent = 4.5;
    std::size_t bins_per_axis = 100;

    std::size_t bin_count() const { return bins_per_axis * bins_per_axis; }
    std::vector<double> bin_counts(const MatrixD& pts) const;
};

struct DivergenceResult {
    double kl_nats = 0;   // KL(reference || generated)
    double jsd_nats = 0;  // midpoint-mixture JSD, bounded by ln 2
};

// Histogram both sets, add eps = 1e-10 per bin before renormalization, then
// KL(reference||generated) and JSD in nats.
DivergenceResult kl_jsd(const MatrixD& reference, const MatrixD& generated,
                        const HistogramGrid& grid = {});

// Draw z(t_max) from the prior and integrate the probability flow ODE down to
// t_min, then denormalize. Per-sample seeds derive from (seed, sample index);
// failed rows are dropped and reported.
struct OdeSampleResult {
    MatrixD samples;
    std::size_t requested = 0;
    std::size_t failed = 0;
    long total_nfe = 0;
};

OdeSampleResult ode_sample(const FieldFactory& make_field, const SdeSpec& spec,
                           const Normalizer& norm, std::size_t dim, std::size_t n,
                           const OdeConfig& cfg, std::uint64_t seed, int threads = 1);

OdeSampleResult ode_sample(const ScoreModel& model, const Normalizer& norm, std::size_t n,
                           const OdeConfig& cfg, std::uint64_t seed, int threads = 1);

}  // namespace rdm
