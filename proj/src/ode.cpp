#include "rdm/ode.hpp"

#include <algorithm>
#include <cmath>

namespace rdm {

namespace {

// Fehlberg 4(5) tableau
constexpr double c2 = 1.0 / 4, c3 = 3.0 / 8, c4 = 12.0 / 13, c5 = 1.0, c6 = 1.0 / 2;
constexpr double a21 = 1.0 / 4;
constexpr double a31 = 3.0 / 32, a32 = 9.0 / 32;
constexpr double a41 = 1932.0 / 2197, a42 = -7200.0 / 2197, a43 = 7296.0 / 2197;
constexpr double a51 = 439.0 / 216, a52 = -8.0, a53 = 3680.0 / 513, a54 = -845.0 / 4104;
constexpr double a61 = -8.0 / 27, a62 = 2.0, a63 = -3544.0 / 2565, a64 = 1859.0 / 4104,
                 a65 = -11.0 / 40;
// 5th order weights (propagated) and 4th order weights (error reference)
constexpr double b51 = 16.0 / 135, b53 = 6656.0 / 12825, b54 = 28561.0 / 56430, b55 = -9.0 / 50,
                 b56 = 2.0 / 55;
constexpr double b41 = 25.0 / 216, b43 = 1408.0 / 2565, b44 = 2197.0 / 4104, b45 = -1.0 / 5;

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

OdeSolution rkf45(const OdeRhs& rhs, std::span<const double> y0, double t0, double t1,
                  const OdeOptions& opt) {
    OdeSolution sol;
    const std::size_t n = y0.size();
    const double dir = (t1 >= t0) ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);

    std::vector<double> y(y0.begin(), y0.end());
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), yt(n), y5(n), err(n);

    auto eval = [&](double t, const std::vector<double>& yy, std::vector<double>& out) {
        rhs(t, yy, out);
        ++sol.nfe;
    };

    double t = t0;
    eval(t, y, k1);
    if (!all_finite(k1)) {
        sol.t_reached = t;
        sol.error = "non-finite vector field at t0";
        return sol;
    }

    // initial step: scaled first-derivative heuristic
    double h;
    {
        double d0 = 0, d1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double sc = opt.atol + opt.rtol * std::abs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1 += (k1[i] / sc) * (k1[i] / sc);
        }
        d0 = std::sqrt(d0 / n);
        d1 = std::sqrt(d1 / n);
        h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h = std::min(h, span);
        h *= dir;
    }

    for (long step = 0; step < opt.max_steps; ++step) {
        if ((t - t1) * dir >= 0.0) {
            sol.ok = true;
            sol.t_reached = t;
            sol.y = std::move(y);
            return sol;
        }
        if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t))) {
            sol.t_reached = t;
            sol.error = "step size underflow";
            sol.y = std::move(y);
            return sol;
        }
        if ((t + h - t1) * dir > 0.0) h = t1 - t;

        for (std::size_t i = 0; i < n; ++i) yt[i] = y[i] + h * a21 * k1[i];
        eval(t + c2 * h, yt, k2);
        for (std::size_t i = 0; i < n; ++i) yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        eval(t + c3 * h, yt, k3);
        for (std::size_t i = 0; i < n; ++i)
            yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        eval(t + c4 * h, yt, k4);
        for (std::size_t i = 0; i < n; ++i)
            yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        eval(t + c5 * h, yt, k5);
        for (std::size_t i = 0; i < n; ++i)
            yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        eval(t + c6 * h, yt, k6);

        double err_norm = 0;
        bool finite = true;
        for (std::size_t i = 0; i < n; ++i) {
            y5[i] = y[i] + h * (b51 * k1[i] + b53 * k3[i] + b54 * k4[i] + b55 * k5[i] + b56 * k6[i]);
            const double y4 = y[i] + h * (b41 * k1[i] + b43 * k3[i] + b44 * k4[i] + b45 * k5[i]);
            const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
            const double e = (y5[i] - y4) / sc;
            err_norm += e * e;
            finite = finite && std::isfinite(y5[i]);
        }
        err_norm = std::sqrt(err_norm / n);

        if (!finite || !std::isfinite(err_norm)) {
            // treat as a rejected step and shrink hard
            h *= 0.2;
            continue;
        }

        if (err_norm <= 1.0) {
            t += h;
            std::swap(y, y5);
            if ((t - t1) * dir < 0.0) {
                eval(t, y, k1);  // Fehlberg has no FSAL stage; fresh slope
                if (!all_finite(k1)) {
                    sol.t_reached = t;
                    sol.error = "non-finite vector field";
                    sol.y = std::move(y);
                    return sol;
                }
            }
        }
        const double factor =
            (err_norm == 0.0) ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
        h *= factor;
    }
    sol.t_reached = t;
    sol.error = "maximum step count exceeded";
    sol.y = std::move(y);
    return sol;
}

}  // namespace rdm
