#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

namespace sdm {

// Adaptive Gauss-Kronrod (G7/K15) with interval bisection. The K15 value is
// used as the estimate and |K15 - G7| as the local error.
namespace gk {

// 15-point Kronrod abscissae/weights on [-1, 1] (positive half; symmetric).
inline constexpr double kXgk[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000};
inline constexpr double kWgk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
// Gauss weights for the embedded 7-point rule (at kXgk odd indices).
inline constexpr double kWg[4] = {0.129484966168870, 0.279705391489277,
                                  0.381830050505119, 0.417959183673469};

template <class F>
inline void rule(const F& f, double a, double b, double& k15, double& g7) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double rk = 0.0, rg = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double dx = h * kXgk[i];
        const double fv = (i == 7) ? f(c) : f(c - dx) + f(c + dx);
        rk += kWgk[i] * fv;
        if (i % 2 == 1) rg += kWg[i / 2] * fv;
    }
    k15 = rk * h;
    g7 = rg * h;
}

}  // namespace gk

// Integrates f over [a, b] to absolute tolerance abs_tol by recursive
// bisection of the K15/G7 pair.
template <class F>
inline double integrate_adaptive(const F& f, double a, double b, double abs_tol,
                                 int max_depth = 48) {
    struct Rec {
        const F& f;
        int max_depth;
        double run(double a, double b, double tol, int depth) const {
            double k15, g7;
            gk::rule(f, a, b, k15, g7);
            const double err = std::fabs(k15 - g7);
            if (err <= tol || depth >= max_depth) {
                if (depth >= max_depth && err > tol * 16.0)
                    throw std::runtime_error("integrate_adaptive: failed to converge");
                return k15;
            }
            const double m = 0.5 * (a + b);
            return run(a, m, 0.5 * tol, depth + 1) + run(m, b, 0.5 * tol, depth + 1);
        }
    };
    if (!(b > a)) return 0.0;
    return Rec{f, max_depth}.run(a, b, abs_tol, 0);
}

}  // namespace sdm
