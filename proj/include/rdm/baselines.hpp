#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rdm/linalg.hpp"

namespace rdm {

// Exhaustive k-th-nearest-neighbor OOD score over the ID training
// representations. Higher = more in-distribution.
struct KnnIndex {
    MatrixD reference;
    std::size_t k = 50;
    bool normalized = false;  // rows were l2-normalized at build time

    // normalize=true applies the l2 convention to reference rows (and later to
    // queries); raw features with normalize=false.
    static KnnIndex build(const MatrixD& reference, std::size_t k, bool normalize = true);
};

// negative Euclidean distance to the k-th nearest reference row
double knn_score(const KnnIndex& index, std::span<const double> query);
std::vector<double> knn_score_batch(const KnnIndex& index, const MatrixD& queries, int threads);

// Principal-subspace residual score: negative norm of the projection of
// (query - mean - offset) onto the trailing (D - num_principal) eigenvector
// directions of the training covariance. offset stays 0 by default.
struct ResidualProjector {
    MatrixD eigvecs;  // D x D, rows ordered by descending eigenvalue
    std::vector<double> eigvals;
    std::vector<double> mean;
    std::vector<double> offset;
    std::size_t num_principal = 0;

    std::size_t dim() const { return mean.size(); }
};

// default num_principal convention: D - ceil(D/3)
std::size_t default_num_principal(std::size_t dim);

ResidualProjector fit_residual(const MatrixD& train, std::size_t num_principal);

double residual_score(const ResidualProjector& proj, std::span<const double> query);
std::vector<double> residual_score_batch(const ResidualProjector& proj, const MatrixD& queries,
                                         int threads);

struct ResidualSweepRow {
    std::size_t num_principal;
    double auroc_pct;
    double fpr95_pct;
};

// Metrics over num_principal in {0, stride, 2*stride, ..., D}; reproduces the
// residual-unit sweep shape.
std::vector<ResidualSweepRow> residual_sweep(const MatrixD& train, const MatrixD& id_eval,
                                             const MatrixD& ood_eval, std::size_t stride = 1,
                                             int threads = 1);

}  // namespace rdm
