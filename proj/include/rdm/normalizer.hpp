#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "rdm/linalg.hpp"

namespace rdm {

// Per-dimension standardization fitted on the training representations.
// Likelihoods computed in the normalized space pick up the constant Jacobian
// term -sum_i log(scale_i) when reported in input space.
struct Normalizer {
    std::vector<double> mean;
    std::vector<double> scale;  // per-dimension std, floored

    static constexpr double kScaleFloor = 1e-6;

    static Normalizer identity(std::size_t dim) {
        Normalizer n;
        n.mean.assign(dim, 0.0);
        n.scale.assign(dim, 1.0);
        return n;
    }

    static Normalizer fit(const MatrixD& data) {
        Normalizer n;
        const std::size_t N = data.rows, D = data.cols;
        n.mean.assign(D, 0.0);
        n.scale.assign(D, 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            const double* r = data.row(i);
            for (std::size_t j = 0; j < D; ++j) n.mean[j] += r[j];
        }
        for (auto& m : n.mean) m /= static_cast<double>(N);
        for (std::size_t i = 0; i < N; ++i) {
            const double* r = data.row(i);
            for (std::size_t j = 0; j < D; ++j) {
                const double d = r[j] - n.mean[j];
                n.scale[j] += d * d;
            }
        }
        for (auto& s : n.scale) s = std::max(std::sqrt(s / static_cast<double>(N)), kScaleFloor);
        return n;
    }

    std::size_t dim() const { return mean.size(); }

    void normalize(std::span<const double> z, std::span<double> out) const {
        for (std::size_t j = 0; j < z.size(); ++j) out[j] = (z[j] - mean[j]) / scale[j];
    }

    void denormalize(std::span<const double> z, std::span<double> out) const {
        for (std::size_t j = 0; j < z.size(); ++j) out[j] = z[j] * scale[j] + mean[j];
    }

    // log|det d(normalized)/d(input)| = -sum_i log scale_i
    double log_jacobian() const {
        double s = 0;
        for (double v : scale) s -= std::log(v);
        return s;
    }
};

}  // namespace rdm
