#include <doctest.h>

#include <cmath>
#include <vector>

#include "rdm/ode.hpp"

using namespace rdm;

TEST_SUITE("ode") {

TEST_CASE("exponential decay matches the closed form") {
    auto rhs = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = -2.0 * y[0];
    };
    std::vector<double> y0{1.5};
    OdeOptions opt{1e-9, 1e-9, 100000};
    auto sol = rkf45(rhs, y0, 0.0, 1.0, opt);
    REQUIRE(sol.ok);
    CHECK(sol.y[0] == doctest::Approx(1.5 * std::exp(-2.0)).epsilon(1e-8));
    auto loose = rkf45(rhs, y0, 0.0, 1.0, OdeOptions{});
    REQUIRE(loose.ok);
    CHECK(loose.y[0] == doctest::Approx(1.5 * std::exp(-2.0)).epsilon(1e-4));
    CHECK(sol.nfe > 0);
}

TEST_CASE("harmonic oscillator, both directions") {
    auto rhs = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = y[1];
        dy[1] = -y[0];
    };
    std::vector<double> y0{1.0, 0.0};
    OdeOptions opt{1e-8, 1e-8, 100000};
    auto fwd = rkf45(rhs, y0, 0.0, 3.1, opt);
    REQUIRE(fwd.ok);
    CHECK(fwd.y[0] == doctest::Approx(std::cos(3.1)).epsilon(1e-6));
    CHECK(fwd.y[1] == doctest::Approx(-std::sin(3.1)).epsilon(1e-6));

    auto back = rkf45(rhs, fwd.y, 3.1, 0.0, opt);
    REQUIRE(back.ok);
    CHECK(back.y[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(back.y[1]) < 1e-6);
}

TEST_CASE("time-dependent rhs") {
    auto rhs = [](double t, std::span<const double>, std::span<double> dy) { dy[0] = 3.0 * t * t; };
    std::vector<double> y0{0.0};
    auto sol = rkf45(rhs, y0, 0.0, 2.0, OdeOptions{});
    REQUIRE(sol.ok);
    CHECK(sol.y[0] == doctest::Approx(8.0).epsilon(1e-7));
}

TEST_CASE("zero field returns the input bitwise") {
    auto rhs = [](double, std::span<const double>, std::span<double> dy) {
        dy[0] = 0.0;
        dy[1] = 0.0;
    };
    std::vector<double> y0{0.123456789, -9.87654321};
    auto sol = rkf45(rhs, y0, 1e-5, 1.0, OdeOptions{});
    REQUIRE(sol.ok);
    CHECK(sol.y[0] == y0[0]);
    CHECK(sol.y[1] == y0[1]);
}

TEST_CASE("failure carries the last t reached") {
    auto rhs = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = y[0] * y[0];  // finite-time blowup at t = 1/y0
    };
    std::vector<double> y0{2.0};
    OdeOptions opt;
    auto sol = rkf45(rhs, y0, 0.0, 1.0, opt);
    CHECK(!sol.ok);
    CHECK(!sol.error.empty());
    CHECK(sol.t_reached < 1.0);
    CHECK(sol.t_reached > 0.0);

    opt.max_steps = 3;
    auto sol2 = rkf45(rhs, y0, 0.0, 0.4, opt);
    CHECK(!sol2.ok);
    CHECK(sol2.error == "maximum step count exceeded");
}

TEST_CASE("tolerance controls accuracy") {
    auto rhs = [](double t, std::span<const double> y, std::span<double> dy) {
        dy[0] = std::sin(10.0 * t) * y[0];
    };
    std::vector<double> y0{1.0};
    const double exact = std::exp((1.0 - std::cos(10.0)) / 10.0);
    OdeOptions loose{1e-3, 1e-3, 100000};
    OdeOptions tight{1e-9, 1e-9, 100000};
    auto a = rkf45(rhs, y0, 0.0, 1.0, loose);
    auto b = rkf45(rhs, y0, 0.0, 1.0, tight);
    REQUIRE(a.ok);
    REQUIRE(b.ok);
    CHECK(b.y[0] == doctest::Approx(exact).epsilon(1e-8));
    CHECK(b.nfe > a.nfe);
}

}  // TEST_SUITE
