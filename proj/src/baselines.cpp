#include "rdm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "rdm/errors.hpp"
#include "rdm/evaluator.hpp"
#include "rdm/parallel.hpp"

namespace rdm {

namespace {

void l2_normalize_row(double* r, std::size_t d) {
    double n = std::sqrt(dot(r, r, d));
    if (n < 1e-12) return;  // zero rows are left untouched
    for (std::size_t j = 0; j < d; ++j) r[j] /= n;
}

}  // namespace

KnnIndex KnnIndex::build(const MatrixD& reference, std::size_t k, bool normalize) {
    if (reference.rows == 0) throw DataError("knn: empty reference set");
    if (k == 0 || k > reference.rows)
        throw ConfigError("knn: k must satisfy 1 <= k <= N (k=" + std::to_string(k) +
                          ", N=" + std::to_string(reference.rows) + ")");
    KnnIndex idx;
    idx.reference = reference;
    idx.k = k;
    idx.normalized = normalize;
    if (normalize)
        for (std::size_t i = 0; i < idx.reference.rows; ++i)
            l2_normalize_row(idx.reference.row(i), idx.reference.cols);
    return idx;
}

namespace {

double knn_score_prepared(const KnnIndex& index, const double* q, std::vector<double>& dist2) {
    const std::size_t N = index.reference.rows, D = index.reference.cols;
    dist2.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        const double* r = index.reference.row(i);
        double s = 0;
        for (std::size_t j = 0; j < D; ++j) {
            const double d = q[j] - r[j];
            s += d * d;
        }
        dist2[i] = s;
    }
    std::nth_element(dist2.begin(), dist2.begin() + (index.k - 1), dist2.end());
    return -std::sqrt(dist2[index.k - 1]);
}

}  // namespace

double knn_score(const KnnIndex& index, std::span<const double> query) {
    if (query.size() != index.reference.cols) throw DataError("knn: query dimension mismatch");
    std::vector<double> q(query.begin(), query.end());
    if (index.normalized) l2_normalize_row(q.data(), q.size());
    std::vector<double> dist2;
    return knn_score_prepared(index, q.data(), dist2);
}

std::vector<double> knn_score_batch(const KnnIndex& index, const MatrixD& queries, int threads) {
    if (queries.cols != index.reference.cols) throw DataError("knn: query dimension mismatch");
    std::vector<double> out(queries.rows);
    const int T = std::max(1, threads);
#pragma omp parallel num_threads(T) if (T > 1)
    {
        std::vector<double> dist2, q(queries.cols);
#pragma omp for schedule(static)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(queries.rows); ++i) {
            std::copy_n(queries.row(i), queries.cols, q.begin());
            if (index.normalized) l2_normalize_row(q.data(), q.size());
            out[i] = knn_score_prepared(index, q.data(), dist2);
        }
    }
    return out;
}

std::size_t default_num_principal(std::size_t dim) {
    return dim - (dim + 2) / 3;  // D - ceil(D/3)
}

ResidualProjector fit_residual(const MatrixD& train, std::size_t num_principal) {
    const std::size_t N = train.rows, D = train.cols;
    if (N < 2) throw DataError("residual: need at least 2 training rows");
    if (num_principal > D) throw ConfigError("residual: num_principal exceeds dimension");

    ResidualProjector proj;
    proj.num_principal = num_principal;
    proj.mean.assign(D, 0.0);
    proj.offset.assign(D, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        const double* r = train.row(i);
        for (std::size_t j = 0; j < D; ++j) proj.mean[j] += r[j];
    }
    for (auto& m : proj.mean) m /= static_cast<double>(N);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(D, D);
    {
        Eigen::MatrixXd centered(N, D);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < D; ++j) centered(i, j) = train.at(i, j) - proj.mean[j];
        cov = (centered.transpose() * centered) / static_cast<double>(N - 1);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericError("residual: eigendecomposition failed");

    // Eigen returns ascending order; we store descending. Eigenvalues below
    // 1e-10 * max are treated as degenerate and keep their solver order at the
    // tail, which is deterministic for a given input.
    const Eigen::VectorXd& w = solver.eigenvalues();
    const Eigen::MatrixXd& V = solver.eigenvectors();
    std::vector<std::size_t> order(D);
    std::iota(order.begin(), order.end(), 0);
    const double wmax = std::max(w.maxCoeff(), 0.0);
    const double cutoff = 1e-10 * std::max(wmax, 1e-300);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double wa = w(a) < cutoff ? 0.0 : w(a);
        const double wb = w(b) < cutoff ? 0.0 : w(b);
        return wa > wb;
    });

    proj.eigvecs = MatrixD(D, D);
    proj.eigvals.resize(D);
    for (std::size_t r = 0; r < D; ++r) {
        proj.eigvals[r] = w(order[r]);
        for (std::size_t j = 0; j < D; ++j) proj.eigvecs.at(r, j) = V(j, order[r]);
    }
    return proj;
}

double residual_score(const ResidualProjector& proj, std::span<const double> query) {
    const std::size_t D = proj.dim();
    if (query.size() != D) throw DataError("residual: query dimension mismatch");
    std::vector<double> centered(D);
    for (std::size_t j = 0; j < D; ++j) centered[j] = query[j] - proj.mean[j] - proj.offset[j];
    double s = 0;
    for (std::size_t r = proj.num_principal; r < D; ++r) {
        const double c = dot(proj.eigvecs.row(r), centered.data(), D);
        s += c * c;
    }
    return -std::sqrt(s);
}

std::vector<double> residual_score_batch(const ResidualProjector& proj, const MatrixD& queries,
                                         int threads) {
    std::vector<double> out(queries.rows);
    parallel_for(queries.rows, threads,
                 [&](std::size_t i) { out[i] = residual_score(proj, queries.row_span(i)); });
    return out;
}

std::vector<ResidualSweepRow> residual_sweep(const MatrixD& train, const MatrixD& id_eval,
                                             const MatrixD& ood_eval, std::size_t stride,
                                             int threads) {
    if (train.cols != id_eval.cols || train.cols != ood_eval.cols)
        throw DataError("residual sweep: dimension mismatch");
    if (stride == 0) throw ConfigError("residual sweep: stride must be positive");
    const std::size_t D = train.cols;
    ResidualProjector proj = fit_residual(train, 0);
    std::vector<std::size_t> points;
    for (std::size_t np = 0; np <= D; np += stride) points.push_back(np);
    if (points.back() != D) points.push_back(D);

    std::vector<ResidualSweepRow> rows;
    rows.reserve(points.size());
    for (std::size_t np : points) {
        proj.num_principal = np;
        ScoreSet id{residual_score_batch(proj, id_eval, threads), "id"};
        ScoreSet ood{residual_score_batch(proj, ood_eval, threads), "ood"};
        rows.push_back({np, auroc(id, ood), fpr_at_tpr(id, ood)});
    }
    return rows;
}

}  // namespace rdm
