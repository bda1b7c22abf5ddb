#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rdm/errors.hpp"
#include "rdm/rng.hpp"
#include "rdm/score_net.hpp"
#include "rdm/trainer.hpp"

using namespace rdm;

namespace {

ScoreNetConfig small_cfg(std::uint32_t d = 3, std::uint32_t classes = 0) {
    ScoreNetConfig c;
    c.input_dim = d;
    c.hidden_dim = 8;
    c.num_blocks = 2;
    c.time_embed_dim = 4;
    c.class_embed_dim = 4;
    c.num_classes = classes;
    return c;
}

SdeSpec subvp() { return SdeSpec{}; }

void randomize_params(ScoreModel& m, std::uint64_t seed, double scale = 0.3) {
    Rng rng(seed);
    for (auto& p : m.params) p = scale * rng.normal();
}

}  // namespace

TEST_SUITE("score_net") {

TEST_CASE("fourier embedding basics") {
    auto e = fourier_embed(0.0, 4, 1.0, 42);
    REQUIRE(e.size() == 4);
    CHECK(e[0] == 0.0);
    CHECK(e[1] == 0.0);
    CHECK(e[2] == 1.0);
    CHECK(e[3] == 1.0);

    CHECK(fourier_embed(0.37, 10, 16.0, 9).size() == 10);
    CHECK_THROWS_AS(fourier_embed(0.0, 5, 1.0, 1), ConfigError);
}

TEST_CASE("fourier embedding matches an independent re-derivation") {
    // generator spec: freqs[k] = scale * normal_k, normals from mt19937_64(seed)
    // via Box-Muller on (u1, u2) = ((x>>11)+1, y>>11) * 2^-53 pairs
    const std::uint64_t seed = 7;
    const double scale = 16.0;
    const std::uint32_t dim = 8;

    std::mt19937_64 eng(seed);
    std::vector<double> freqs;
    while (freqs.size() < dim / 2) {
        const double u1 = static_cast<double>((eng() >> 11) + 1) * 0x1.0p-53;
        const double u2 = static_cast<double>(eng() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.1415926535897932384626433832795 * u2;
        freqs.push_back(scale * (r * std::cos(a)));
        if (freqs.size() < dim / 2) freqs.push_back(scale * (r * std::sin(a)));
    }
    const double v = 0.5;
    auto got = fourier_embed(v, dim, scale, seed);
    for (std::size_t k = 0; k < dim / 2; ++k) {
        const double ang = 2.0 * 3.1415926535897932384626433832795 * freqs[k] * v;
        CHECK(got[k] == doctest::Approx(std::sin(ang)).epsilon(1e-15));
        CHECK(got[dim / 2 + k] == doctest::Approx(std::cos(ang)).epsilon(1e-15));
    }
}

TEST_CASE("init is reproducible and zero-headed") {
    auto cfg = small_cfg();
    auto m1 = init_score_model(cfg, subvp(), 1);
    auto m2 = init_score_model(cfg, subvp(), 1);
    CHECK(m1.params == m2.params);
    auto m3 = init_score_model(cfg, subvp(), 2);
    CHECK(m1.params != m3.params);
    CHECK(m1.param_count() == cfg.param_count());

    // zero output head forces a zero score
    ScoreNetEval ev(m1);
    std::vector<double> z{0.4, -1.0, 2.0}, out(3);
    ev.forward(z, 0.5, std::nullopt, out);
    for (double x : out) CHECK(x == 0.0);
}

TEST_CASE("forward determinism and zero model") {
    auto cfg = small_cfg();
    auto m = init_score_model(cfg, subvp(), 3);
    std::fill(m.params.begin(), m.params.end(), 0.0);
    ScoreNetEval ev(m);
    std::vector<double> z{1.0, 2.0, 3.0}, out(3);
    ev.forward(z, 0.9, std::nullopt, out);
    for (double x : out) CHECK(x == 0.0);

    randomize_params(m, 99);
    std::vector<double> a(3), b(3);
    ev.forward(z, 0.3, std::nullopt, a);
    ev.forward(z, 0.3, std::nullopt, b);
    CHECK(a == b);
}

TEST_CASE("batch forward equals per-sample forward") {
    auto cfg = small_cfg();
    auto m = init_score_model(cfg, subvp(), 5);
    randomize_params(m, 17);
    ScoreNetEval ev1(m), ev2(m);
    std::vector<double> z1{0.1, 0.2, 0.3}, z2{-1.0, 0.5, 2.0};
    std::vector<double> a(3), b(3), c(3);
    ev1.forward(z1, 0.42, std::nullopt, a);
    ev1.forward(z2, 0.42, std::nullopt, b);
    // a fresh evaluator (as a batch path would use) gives identical bits
    ev2.forward(z1, 0.42, std::nullopt, c);
    CHECK(a == c);
    ev2.forward(z2, 0.42, std::nullopt, c);
    CHECK(b == c);
}

TEST_CASE("input validation") {
    auto m = init_score_model(small_cfg(), subvp(), 1);
    ScoreNetEval ev(m);
    std::vector<double> bad{1.0, 2.0}, out(3);
    CHECK_THROWS_AS(ev.forward(bad, 0.5, std::nullopt, out), DataError);
    std::vector<double> z{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(ev.forward(z, 0.0, std::nullopt, out), NumericError);
    CHECK_THROWS_AS(ev.forward(z, 0.5, 0u, out), DataError);

    auto mc = init_score_model(small_cfg(3, 4), subvp(), 1);
    ScoreNetEval evc(mc);
    CHECK_THROWS_AS(evc.forward(z, 0.5, std::nullopt, out), DataError);
    CHECK_THROWS_AS(evc.forward(z, 0.5, 7u, out), DataError);
    CHECK_NOTHROW(evc.forward(z, 0.5, 3u, out));
}

TEST_CASE("conditional and unconditional models share the common pathway") {
    auto mu = init_score_model(small_cfg(3, 0), subvp(), 11);
    auto mc = init_score_model(small_cfg(3, 1), subvp(), 11);
    // zero the class-embedding projections
    for (std::uint32_t k = 0; k < mc.config.num_blocks; ++k) {
        auto& b = mc.layout.blocks[k];
        const std::size_t n = mc.config.class_embed_dim * mc.config.hidden_dim;
        for (std::size_t i = 0; i < n; ++i) mc.params[b.p_c + i] = 0.0;
    }
    // give both models the same random head so outputs are nontrivial
    Rng rng(5);
    for (std::size_t i = 0; i < mu.config.hidden_dim * 3 + 3; ++i) {
        const double v = rng.normal();
        mu.params[mu.layout.w_out + i] = v;
        mc.params[mc.layout.w_out + i] = v;
    }
    ScoreNetEval evu(mu), evc(mc);
    std::vector<double> z{0.5, -0.25, 1.5}, a(3), b(3);
    evu.forward(z, 0.6, std::nullopt, a);
    evc.forward(z, 0.6, 0u, b);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences") {
    for (std::uint32_t classes : {0u, 4u}) {
        auto cfg = small_cfg(3, classes);
        auto m = init_score_model(cfg, subvp(), 21);
        randomize_params(m, 31, 0.25);

        // fixed tiny batch
        const std::size_t B = 2;
        MatrixD batch(B, 3), noise(B, 3);
        std::vector<double> t_draws{0.35, 0.8};
        std::vector<std::int32_t> labels{1, 3};
        Rng rng(77);
        for (auto& v : batch.v) v = rng.normal();
        for (auto& v : noise.v) v = rng.normal();
        const auto* lab = classes ? &labels : nullptr;

        // analytic gradient of the dsm loss
        ScoreNetTrainEval ev(m);
        ActivationTape tape;
        std::vector<double> grad(m.param_count(), 0.0);
        std::vector<double> zt(3), residual(3), draw(3);
        for (std::size_t i = 0; i < B; ++i) {
            const Kernel k = kernel(m.sde, t_draws[i]);
            for (std::size_t j = 0; j < 3; ++j)
                zt[j] = k.mean_coeff * batch.at(i, j) + k.std * noise.at(i, j);
            std::optional<std::uint32_t> c =
                classes ? std::optional<std::uint32_t>(labels[i]) : std::nullopt;
            ev.forward_acts(zt, t_draws[i], c, tape);
            for (std::size_t j = 0; j < 3; ++j) {
                residual[j] = tape.raw[j] + noise.at(i, j);
                draw[j] = 2.0 / B * residual[j];
            }
            ev.backward_sample(tape, draw, grad);
        }

        // central differences, step 1e-4, every coordinate
        const double h = 1e-4;
        double max_rel = 0;
        for (std::size_t p = 0; p < m.param_count(); ++p) {
            const double orig = m.params[p];
            m.params[p] = orig + h;
            const double lp = dsm_loss(m, m.sde, batch, lab, t_draws, noise);
            m.params[p] = orig - h;
            const double lm = dsm_loss(m, m.sde, batch, lab, t_draws, noise);
            m.params[p] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double rel = std::abs(grad[p] - fd) / std::max({std::abs(fd), std::abs(grad[p]), 1e-6});
            max_rel = std::max(max_rel, rel);
        }
        CHECK(max_rel <= 1e-4);

        // gradient of a parameter-independent loss is zero
        std::vector<double> zgrad(m.param_count(), 0.0);
        ev.forward_acts(std::vector<double>{0.1, 0.2, 0.3}, 0.5,
                        classes ? std::optional<std::uint32_t>(0u) : std::nullopt, tape);
        ev.backward_sample(tape, std::vector<double>{0.0, 0.0, 0.0}, zgrad);
        for (double g : zgrad) CHECK(g == 0.0);
        CHECK(grad.size() == m.param_count());
    }
}

TEST_CASE("jvp matches finite differences on the score") {
    auto m = init_score_model(small_cfg(3, 0), subvp(), 55);
    randomize_params(m, 56, 0.3);
    ScoreNetEval ev(m);
    std::vector<double> z{0.2, -0.7, 1.1}, dir{0.5, 1.0, -0.25};
    std::vector<double> s(3), jvp(3), sp(3), sm(3), zp(3), zm(3);
    ev.forward_jvp(z, 0.45, std::nullopt, dir, s, jvp);
    const double h = 1e-6;
    for (std::size_t j = 0; j < 3; ++j) {
        zp[j] = z[j] + h * dir[j];
        zm[j] = z[j] - h * dir[j];
    }
    ev.forward(zp, 0.45, std::nullopt, sp);
    ev.forward(zm, 0.45, std::nullopt, sm);
    for (std::size_t j = 0; j < 3; ++j) {
        const double fd = (sp[j] - sm[j]) / (2.0 * h);
        CHECK(jvp[j] == doctest::Approx(fd).epsilon(1e-6));
    }
    // score from forward_jvp matches plain forward bitwise
    std::vector<double> s2(3);
    ev.forward(z, 0.45, std::nullopt, s2);
    CHECK(s == s2);
}

TEST_CASE("no blowup on bounded inputs (property)") {
    Rng rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        auto cfg = small_cfg(2, trial % 3 == 0 ? 3u : 0u);
        auto m = init_score_model(cfg, subvp(), 1000 + trial);
        randomize_params(m, 2000 + trial, 0.5);
        ScoreNetEval ev(m);
        std::vector<double> z(2), out(2);
        const double r = std::pow(10.0, rng.uniform(0.0, 3.0));
        z[0] = r * rng.normal();
        z[1] = r * rng.normal();
        const double t = std::pow(10.0, rng.uniform(-5.0, 0.0));
        std::optional<std::uint32_t> c =
            cfg.conditional() ? std::optional<std::uint32_t>(trial % 3) : std::nullopt;
        ev.forward(z, t, c, out);
        CHECK(std::isfinite(out[0]));
        CHECK(std::isfinite(out[1]));
    }
}

}  // TEST_SUITE
