#include "rdm/toy2d.hpp"

#include <algorithm>
#include <cmath>

#include "rdm/errors.hpp"
#include "rdm/parallel.hpp"
#include "rdm/rng.hpp"

namespace rdm {

namespace {
constexpr double kPi = 3.1415926535897932384626433832795;
}

const char* toy_name_str(ToyName n) {
    switch (n) {
        case ToyName::EightGaussians: return "eight_gaussians";
        case ToyName::Spiral: return "spiral";
        case ToyName::Checkerboard: return "checkerboard";
        case ToyName::Rings: return "rings";
    }
    return "?";
}

ToyName toy_name_from_str(const std::string& s) {
    if (s == "eight_gaussians") return ToyName::EightGaussians;
    if (s == "spiral") return ToyName::Spiral;
    if (s == "checkerboard") return ToyName::Checkerboard;
    if (s == "rings") return ToyName::Rings;
    throw ConfigError("unknown toy dataset '" + s +
                      "' (expected eight_gaussians|spiral|checkerboard|rings)");
}

ToyDataset sample_toy(ToyName name, std::size_t n, std::uint64_t seed,
                      const ToyGenParams& params) {
    if (n == 0) throw ConfigError("sample_toy: n must be >= 1");
    ToyDataset ds;
    ds.name = name;
    ds.points = MatrixD(n, 2);
    Rng rng(split_seed(seed, seed_stream::toy_data));

    switch (name) {
        case ToyName::EightGaussians:
            for (std::size_t i = 0; i < n; ++i) {
                const double ang = static_cast<double>(rng.uniform_int(8)) * (kPi / 4.0);
                ds.points.at(i, 0) = params.eight_radius * std::cos(ang) + params.eight_noise * rng.normal();
                ds.points.at(i, 1) = params.eight_radius * std::sin(ang) + params.eight_noise * rng.normal();
            }
            break;
        case ToyName::Spiral: {
            const double a = 4.0 / params.spiral_theta_max;
            for (std::size_t i = 0; i < n; ++i) {
                const double theta = rng.uniform(0.0, params.spiral_theta_max);
                const double r = a * theta + params.spiral_noise * rng.normal();
                ds.points.at(i, 0) = r * std::cos(theta);
                ds.points.at(i, 1) = r * std::sin(theta);
            }
            break;
        }
        case ToyName::Checkerboard: {
            // 4x4 cells; the 8 cells with even (i+j) carry the mass
            const double cell = params.checker_extent / 2.0;  // cell side
            for (std::size_t i = 0; i < n; ++i) {
                const std::uint64_t pick = rng.uniform_int(8);
                const std::size_t ci = pick / 2;
                const std::size_t cj = 2 * (pick % 2) + (ci % 2);  // parity keeps (ci+cj) even
                const double x0 = -params.checker_extent + static_cast<double>(ci) * cell;
                const double y0 = -params.checker_extent + static_cast<double>(cj) * cell;
                ds.points.at(i, 0) = x0 + cell * rng.uniform();
                ds.points.at(i, 1) = y0 + cell * rng.uniform();
            }
            break;
        }
        case ToyName::Rings:
            for (std::size_t i = 0; i < n; ++i) {
                const double base = params.ring_radii[rng.uniform_int(params.ring_radii.size())];
                const double r = base + params.ring_jitter * rng.normal();
                const double ang = rng.uniform(0.0, 2.0 * kPi);
                ds.points.at(i, 0) = r * std::cos(ang);
                ds.points.at(i, 1) = r * std::sin(ang);
            }
            break;
    }
    return ds;
}

std::vector<double> HistogramGrid::bin_counts(const MatrixD& pts) const {
    if (pts.cols != 2) throw DataError("histogram grid expects 2-D points");
    std::vector<double> counts(bin_count(), 0.0);
    const double L = extent;
    const double w = 2.0 * L / static_cast<double>(bins_per_axis);
    const auto clamp_bin = [&](double x) {
        auto b = static_cast<std::ptrdiff_t>(std::floor((x + L) / w));
        b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins_per_axis) - 1);
        return static_cast<std::size_t>(b);
    };
    for (std::size_t i = 0; i < pts.rows; ++i) {
        const std::size_t bx = clamp_bin(pts.at(i, 0));
        const std::size_t by = clamp_bin(pts.at(i, 1));
        counts[bx * bins_per_axis + by] += 1.0;
    }
    return counts;
}

DivergenceResult kl_jsd(const MatrixD& reference, const MatrixD& generated,
                        const HistogramGrid& grid) {
    if (reference.rows == 0 || generated.rows == 0)
        throw DataError("kl_jsd: both sample sets must be non-empty");
    constexpr double kEps = 1e-10;
    std::vector<double> p = grid.bin_counts(reference);
    std::vector<double> q = grid.bin_counts(generated);
    double psum = 0, qsum = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] += kEps;
        q[i] += kEps;
        psum += p[i];
        qsum += q[i];
    }
    DivergenceResult res;
    double kl = 0, jp = 0, jq = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = p[i] / psum, qi = q[i] / qsum;
        kl += pi * std::log(pi / qi);
        const double mi = 0.5 * (pi + qi);
        jp += pi * std::log(pi / mi);
        jq += qi * std::log(qi / mi);
    }
    res.kl_nats = kl;
    res.jsd_nats = 0.5 * (jp + jq);
    return res;
}

OdeSampleResult ode_sample(const FieldFactory& make_field, const SdeSpec& spec,
                           const Normalizer& norm, std::size_t dim, std::size_t n,
                           const OdeConfig& cfg, std::uint64_t seed, int threads) {
    cfg.validate();
    const std::size_t D = dim;
    if (norm.dim() != D) throw DataError("ode_sample: normalizer dimension mismatch");

    OdeSampleResult res;
    res.requested = n;
    MatrixD raw(n, D);
    std::vector<char> ok(n, 0);
    std::vector<long> nfes(n, 0);
    const std::uint64_t base = split_seed(seed, seed_stream::ode_sample);

    const int T = std::max(1, threads);
#pragma omp parallel num_threads(T) if (T > 1)
    {
        auto field = make_field();
        std::vector<double> z1(D);
#pragma omp for schedule(dynamic, 16)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
            Rng rng(mix64(base ^ mix64(static_cast<std::uint64_t>(i))));
            prior_sample(spec, rng, z1);
            FlowIntegration fl = integrate_flow(*field, z1, cfg.t_max, cfg.t_min, cfg);
            if (fl.ok) {
                norm.denormalize(fl.z, raw.row_span(i));
                ok[i] = 1;
                nfes[i] = fl.nfe;
            }
        }
    }

    std::size_t kept = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (ok[i]) ++kept;
    res.samples = MatrixD(kept, D);
    std::size_t r = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!ok[i]) continue;
        std::copy_n(raw.row(i), D, res.samples.row(r++));
        res.total_nfe += nfes[i];
    }
    res.failed = n - kept;
    return res;
}

OdeSampleResult ode_sample(const ScoreModel& model, const Normalizer& norm, std::size_t n,
                           const OdeConfig& cfg, std::uint64_t seed, int threads) {
    if (model.config.conditional())
        throw DataError("ode_sample: sampling is implemented for unconditional models");
    FieldFactory factory = [&model]() -> std::unique_ptr<FlowField> {
        return std::make_unique<ModelFlowField>(model, std::nullopt);
    };
    return ode_sample(factory, model.sde, norm, model.config.input_dim, n, cfg, seed, threads);
}

}  // namespace rdm
