#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rdm {

// Right-hand side of dy/dt = f(t, y).
using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dy)>;

struct OdeOptions {
    double atol = 1e-5;
    double rtol = 1e-5;
    long max_steps = 100000;
};

struct OdeSolution {
    std::vector<double> y;
    int nfe = 0;
    bool ok = false;
    double t_reached = 0;
    std::string error;
};

// Adaptive Runge-Kutta-Fehlberg 4(5). Integrates from t0 to t1 (either
// direction), propagating the 5th-order solution. Error control uses the RMS
// norm of e_i / (atol + rtol * max(|y_i|, |y_new_i|)).
OdeSolution rkf45(const OdeRhs& rhs, std::span<const double> y0, double t0, double t1,
                  const OdeOptions& opt);

}  // namespace rdm
