#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rdm/baselines.hpp"
#include "rdm/errors.hpp"
#include "rdm/evaluator.hpp"
#include "rdm/rng.hpp"

using namespace rdm;

namespace {

// naive oracle: full sort of exact distances
double knn_oracle(const MatrixD& ref, std::span<const double> q, std::size_t k) {
    std::vector<double> d(ref.rows);
    for (std::size_t i = 0; i < ref.rows; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < ref.cols; ++j) {
            const double diff = q[j] - ref.at(i, j);
            s += diff * diff;
        }
        d[i] = std::sqrt(s);
    }
    std::sort(d.begin(), d.end());
    return -d[k - 1];
}

MatrixD random_matrix(std::size_t n, std::size_t d, Rng& rng, double scale = 1.0) {
    MatrixD m(n, d);
    for (auto& v : m.v) v = scale * rng.normal();
    return m;
}

// random rotation via Gram-Schmidt of a gaussian matrix
MatrixD random_rotation(std::size_t d, Rng& rng) {
    MatrixD q(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) q.at(i, j) = rng.normal();
        for (std::size_t p = 0; p < i; ++p) {
            const double c = dot(q.row(i), q.row(p), d);
            for (std::size_t j = 0; j < d; ++j) q.at(i, j) -= c * q.at(p, j);
        }
        const double n = std::sqrt(dot(q.row(i), q.row(i), d));
        for (std::size_t j = 0; j < d; ++j) q.at(i, j) /= n;
    }
    return q;
}

MatrixD rotate(const MatrixD& x, const MatrixD& q) {
    MatrixD out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t r = 0; r < q.rows; ++r)
            out.at(i, r) = dot(q.row(r), x.row(i), x.cols);
    return out;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("knn worked examples") {
    MatrixD ref(3, 1);
    ref.at(0, 0) = 0.0;
    ref.at(1, 0) = 1.0;
    ref.at(2, 0) = 4.0;
    auto idx = KnnIndex::build(ref, 2, /*normalize=*/false);
    std::vector<double> q{2.0};
    CHECK(knn_score(idx, q) == -2.0);  // distances {2,1,2}

    auto idx1 = KnnIndex::build(ref, 1, false);
    std::vector<double> q2{1.0};
    CHECK(knn_score(idx1, q2) == 0.0);

    // reference row order does not matter
    MatrixD shuffled(3, 1);
    shuffled.at(0, 0) = 4.0;
    shuffled.at(1, 0) = 0.0;
    shuffled.at(2, 0) = 1.0;
    auto idx_s = KnnIndex::build(shuffled, 2, false);
    CHECK(knn_score(idx_s, q) == knn_score(idx, q));
}

TEST_CASE("knn validation") {
    MatrixD ref(3, 2);
    CHECK_THROWS_AS(KnnIndex::build(ref, 4, false), ConfigError);
    CHECK_THROWS_AS(KnnIndex::build(ref, 0, false), ConfigError);
    CHECK_THROWS_AS(KnnIndex::build(MatrixD(0, 2), 1, false), DataError);
    auto idx = KnnIndex::build(ref, 1, false);
    std::vector<double> bad{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(knn_score(idx, bad), DataError);
}

TEST_CASE("knn equals the exhaustive oracle on random instances") {
    Rng rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 2 + rng.uniform_int(511);
        const std::size_t d = 1 + rng.uniform_int(32);
        const std::size_t k = 1 + rng.uniform_int(n);
        MatrixD ref = random_matrix(n, d, rng);
        if (n > 2) std::copy_n(ref.row(0), d, ref.row(1));  // force a duplicate
        auto idx = KnnIndex::build(ref, k, false);
        std::vector<double> q(d);
        for (auto& v : q) v = rng.normal();
        CHECK(knn_score(idx, q) == knn_oracle(ref, q, k));
    }
}

TEST_CASE("knn l2 convention matches normalized oracle") {
    Rng rng(12);
    MatrixD ref = random_matrix(64, 8, rng);
    auto idx = KnnIndex::build(ref, 5, true);
    std::vector<double> q(8);
    for (auto& v : q) v = rng.normal();
    // oracle on pre-normalized copies
    MatrixD refn = ref;
    for (std::size_t i = 0; i < refn.rows; ++i) {
        double n = std::sqrt(dot(refn.row(i), refn.row(i), 8));
        for (std::size_t j = 0; j < 8; ++j) refn.at(i, j) /= n;
    }
    std::vector<double> qn = q;
    double n2 = std::sqrt(dot(qn.data(), qn.data(), 8));
    for (auto& v : qn) v /= n2;
    CHECK(knn_score(idx, q) == knn_oracle(refn, qn, 5));
}

TEST_CASE("residual projector on axis-aligned data") {
    // all training points on the x axis: the principal direction is +-e_x
    Rng rng(13);
    MatrixD train(64, 2);
    for (std::size_t i = 0; i < 64; ++i) train.at(i, 0) = 3.0 * rng.normal();
    auto proj = fit_residual(train, 1);
    CHECK(std::abs(std::abs(proj.eigvecs.at(0, 0)) - 1.0) <= 1e-8);
    CHECK(std::abs(proj.eigvecs.at(0, 1)) <= 1e-8);

    // query (0,1): residual = e_y component = 1
    std::vector<double> q{0.0, 1.0};
    const double mean_y = proj.mean[1];  // ~0
    CHECK(residual_score(proj, q) == doctest::Approx(-(1.0 - mean_y)).epsilon(1e-9));

    // query at the training mean scores 0
    CHECK(residual_score(proj, proj.mean) == doctest::Approx(0.0).epsilon(1e-12));

    // moving within the principal subspace leaves the score unchanged
    std::vector<double> q2{17.5, 1.0};
    CHECK(residual_score(proj, q2) == doctest::Approx(residual_score(proj, q)).epsilon(1e-9));
}

TEST_CASE("empty residual subspace scores zero") {
    Rng rng(14);
    MatrixD train = random_matrix(32, 3, rng);
    auto proj = fit_residual(train, 3);
    std::vector<double> q{9.0, -2.0, 4.0};
    CHECK(residual_score(proj, q) == 0.0);
}

TEST_CASE("projector orthonormality and reconstruction") {
    Rng rng(15);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t d = 2 + rng.uniform_int(10);
        MatrixD train = random_matrix(40 + rng.uniform_int(50), d, rng, 2.0);
        auto proj = fit_residual(train, d / 2);
        // Gram deviation
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) {
                const double g = dot(proj.eigvecs.row(a), proj.eigvecs.row(b), d);
                CHECK(std::abs(g - (a == b ? 1.0 : 0.0)) <= 1e-8);
            }
        // principal + residual projections reconstruct (query - mean)
        std::vector<double> q(d), recon(d, 0.0);
        for (auto& v : q) v = rng.normal();
        for (std::size_t r = 0; r < d; ++r) {
            std::vector<double> centered(d);
            for (std::size_t j = 0; j < d; ++j) centered[j] = q[j] - proj.mean[j];
            const double c = dot(proj.eigvecs.row(r), centered.data(), d);
            for (std::size_t j = 0; j < d; ++j) recon[j] += c * proj.eigvecs.at(r, j);
        }
        for (std::size_t j = 0; j < d; ++j)
            CHECK(recon[j] == doctest::Approx(q[j] - proj.mean[j]).epsilon(1e-8));
        // eigenvalues descend
        for (std::size_t r = 1; r < d; ++r) CHECK(proj.eigvals[r] <= proj.eigvals[r - 1] + 1e-12);
    }
}

TEST_CASE("residual score is rotation-invariant") {
    Rng rng(16);
    const std::size_t d = 6;
    MatrixD train = random_matrix(128, d, rng);
    // stretch a few directions so the spectrum is distinct
    for (std::size_t i = 0; i < train.rows; ++i) {
        train.at(i, 0) *= 5.0;
        train.at(i, 1) *= 3.0;
        train.at(i, 2) *= 2.0;
    }
    MatrixD q = random_matrix(10, d, rng);
    MatrixD rot = random_rotation(d, rng);
    MatrixD train_r = rotate(train, rot), q_r = rotate(q, rot);
    auto pa = fit_residual(train, 3);
    auto pb = fit_residual(train_r, 3);
    for (std::size_t i = 0; i < q.rows; ++i) {
        const double a = residual_score(pa, q.row_span(i));
        const double b = residual_score(pb, q_r.row_span(i));
        CHECK(a == doctest::Approx(b).epsilon(1e-6));
    }
}

TEST_CASE("default principal count follows the one-third convention") {
    CHECK(default_num_principal(768) == 512);
    CHECK(default_num_principal(384) == 256);
    CHECK(default_num_principal(8) == 5);
    CHECK(default_num_principal(3) == 2);
}

TEST_CASE("residual sweep shape and edge rows") {
    Rng rng(17);
    const std::size_t d = 6;
    MatrixD train = random_matrix(200, d, rng);
    MatrixD id_eval = random_matrix(48, d, rng);
    MatrixD ood_eval = random_matrix(48, d, rng, 1.4);
    auto rows = residual_sweep(train, id_eval, ood_eval, 1, 2);
    REQUIRE(rows.size() == d + 1);
    CHECK(rows.front().num_principal == 0);
    CHECK(rows.back().num_principal == d);
    CHECK(rows.back().auroc_pct == 50.0);  // constant scores

    auto strided = residual_sweep(train, id_eval, ood_eval, 4, 2);
    REQUIRE(strided.size() == 3);  // 0, 4, 6
    CHECK(strided[1].num_principal == 4);
    CHECK(strided.back().num_principal == d);
}

TEST_CASE("least-significant direction separates a crafted shift") {
    // anisotropic ID; OOD shifted along the smallest-variance axis
    Rng rng(18);
    const std::size_t d = 4;
    MatrixD train(512, d), id_eval(128, d), ood_eval(128, d);
    auto fill = [&](MatrixD& m, bool shifted) {
        for (std::size_t i = 0; i < m.rows; ++i) {
            m.at(i, 0) = 8.0 * rng.normal();
            m.at(i, 1) = 4.0 * rng.normal();
            m.at(i, 2) = 2.0 * rng.normal();
            m.at(i, 3) = 0.5 * rng.normal() + (shifted ? 3.0 : 0.0);
        }
    };
    fill(train, false);
    fill(id_eval, false);
    fill(ood_eval, true);
    auto rows = residual_sweep(train, id_eval, ood_eval, 1, 2);
    CHECK(rows[d - 1].auroc_pct > rows[0].auroc_pct);
    CHECK(rows[d - 1].auroc_pct > 95.0);
}

}  // TEST_SUITE
