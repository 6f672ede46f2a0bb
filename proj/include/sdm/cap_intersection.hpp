#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "sdm/quadrature.hpp"
#include "sdm/special.hpp"

namespace sdm {

// Cap half-angles theta_1 = theta_2 (both read and write use the same cosine
// radius), the inter-vector angle theta_v, and the boundary angle theta_min
// of the plane through the caps' intersection.
struct CapGeometry {
    double theta_1;
    double theta_2;
    double theta_v;
    double theta_min;

    static CapGeometry make(double cos_v, double cos_d) {
        CapGeometry g;
        g.theta_1 = g.theta_2 = std::acos(cos_d);
        g.theta_v = std::acos(std::min(1.0, std::max(-1.0, cos_v)));
        if (g.theta_v < 1e-9) {
            g.theta_min = 0.0;
        } else {
            g.theta_min = std::atan(std::cos(g.theta_1) /
                                        (std::cos(g.theta_2) * std::sin(g.theta_v)) -
                                    1.0 / std::tan(g.theta_v));
        }
        return g;
    }
};

namespace detail {

// J_n(theta_a, theta_b) without the pi^{(n-1)/2} / Gamma((n-1)/2) prefactor:
//   integral over [theta_a, theta_b] of sin(phi)^{n-2}
//       I_{1 - (tan theta_a / tan phi)^2}((n-2)/2, 1/2) dphi.
inline double cap_j_integral(double theta_a, double theta_b, int n, double abs_tol) {
    if (theta_b <= theta_a) return 0.0;
    const double tan_a = std::tan(theta_a);
    const auto integrand = [&](double phi) {
        const double t = tan_a / std::tan(phi);
        double x = 1.0 - t * t;
        if (x < 0.0) x = 0.0;
        if (x > 1.0) x = 1.0;
        const double i_beta =
            (theta_a == 0.0) ? 1.0 : regularized_incomplete_beta(x, 0.5 * (n - 2), 0.5);
        return std::exp((n - 2) * std::log(std::sin(phi))) * i_beta;
    };
    return integrate_adaptive(integrand, theta_a, theta_b, abs_tol);
}

}  // namespace detail

// Surface fraction of the unit hypersphere covered by a single cap of
// cosine radius cos_d (closed form via the regularized incomplete beta).
inline double cap_fraction(double cos_d, int n) {
    const double theta = std::acos(cos_d);
    const double s2 = std::sin(theta) * std::sin(theta);
    double frac = 0.5 * regularized_incomplete_beta(s2, 0.5 * (n - 1), 0.5);
    if (cos_d < 0.0) frac = 1.0 - frac;
    return frac;
}

// Fraction of the hypersphere's surface lying in both caps of cosine radius
// cos_d whose centers are cos_v apart. Exact zero once the caps are disjoint
// (theta_v >= theta_1 + theta_2); coincident centers give the single-cap
// fraction. Quadrature tolerance is 1e-12 of the whole sphere.
inline double cap_intersection_fraction(double cos_v, double cos_d, int n) {
    if (cos_v < -1.0 - 1e-12 || cos_v > 1.0 + 1e-12)
        throw std::domain_error("cap_intersection_fraction: cos_v");
    if (!(cos_d > 0.0 && cos_d < 1.0))
        throw std::domain_error("cap_intersection_fraction: cos_d in (0, 1)");
    if (n < 3) throw std::domain_error("cap_intersection_fraction: n >= 3");
    const CapGeometry g = CapGeometry::make(cos_v, cos_d);
    if (g.theta_v < 1e-9) return cap_fraction(cos_d, n);
    if (g.theta_v >= g.theta_1 + g.theta_2) return 0.0;

    // Normalizing J_n by the sphere area leaves the finite ratio
    // Gamma(n/2) / (2 sqrt(pi) Gamma((n-1)/2)) in front of the raw integral.
    const double ln_ratio = std::lgamma(0.5 * n) - std::lgamma(0.5 * (n - 1)) -
                            0.5 * std::log(std::numbers::pi_v<double>) -
                            std::numbers::ln2_v<double>;
    const double prefactor = std::exp(ln_ratio);
    const double abs_tol = 1e-12 / prefactor;
    const double j1 = detail::cap_j_integral(g.theta_min, g.theta_2, n, abs_tol);
    const double j2 = detail::cap_j_integral(g.theta_v - g.theta_min, g.theta_1, n, abs_tol);
    double frac = prefactor * (j1 + j2);
    if (frac < 0.0) frac = 0.0;
    return frac;
}

// Raw surface area of the cap intersection (fraction times total area).
// Underflows for very large n; prefer the fraction form there.
inline double continuous_cap_intersection(double cos_v, double cos_d, int n) {
    return cap_intersection_fraction(cos_v, cos_d, n) * hypersphere_surface_area(n);
}

// Dense interpolation table over the inter-vector cosine, for engines that
// evaluate the continuous kernel millions of times per experiment. Linear
// interpolation in value: the grid is fine enough that relative error stays
// well under a percent wherever the weight is non-negligible, and queries
// outside the support return exact zero.
class CapIntersectionTable {
public:
    CapIntersectionTable() = default;

    CapIntersectionTable(double cos_d, int n, int resolution = 8192)
        : support_cos_(std::cos(2.0 * std::acos(cos_d))), frac_(resolution + 1) {
        inv_step_ = resolution / (1.0 - support_cos_);
        for (int i = 0; i <= resolution; ++i) {
            const double c = support_cos_ + static_cast<double>(i) / inv_step_;
            frac_[i] = cap_intersection_fraction(std::min(1.0, c), cos_d, n);
        }
    }

    // fraction at inter-vector cosine c
    double fraction(double c) const {
        if (c <= support_cos_) return 0.0;
        if (c >= 1.0) return frac_.back();
        const double pos = (c - support_cos_) * inv_step_;
        const std::size_t i = static_cast<std::size_t>(pos);
        if (i + 1 >= frac_.size()) return frac_.back();
        const double t = pos - static_cast<double>(i);
        return frac_[i] * (1.0 - t) + frac_[i + 1] * t;
    }

private:
    double support_cos_ = 1.0;
    double inv_step_ = 1.0;
    std::vector<double> frac_;
};

}  // namespace sdm
