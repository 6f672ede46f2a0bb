#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include "sdm/binomial.hpp"
#include "sdm/logweight.hpp"

namespace sdm {

// |O_n(p_a, d) ∩ O_n(xi, d)|: the number of addresses within Hamming
// distance d of both of two reference points at distance d_v, as the double
// sum over agreement counts
//
//   sum_{a = n-d-floor(d_v/2)}^{n-d_v}  sum_{c = max(0, n-d-a)}^{d_v-(n-d-a)}
//       C(n-d_v, a) * C(d_v, c)
//
// evaluated entirely in log space. The outer loop runs a downward from its
// upper end so the largest summand is accumulated first. An empty a-range
// (exactly d_v > 2d) yields the zero weight.
inline LogWeight binary_circle_intersection(int d_v, int d, int n,
                                            const LogFactorialTable& tab) {
    if (d_v < 0 || d_v > n) throw std::domain_error("binary_circle_intersection: d_v");
    if (d < 0 || d > n) throw std::domain_error("binary_circle_intersection: d");
    const int a_hi = n - d_v;
    const int a_lo = n - d - d_v / 2;
    LogWeight total = LogWeight::zero();
    for (int a = a_hi; a >= std::max(a_lo, 0); --a) {
        const int rem = n - d - a;
        const int c_lo = std::max(0, rem);
        const int c_hi = std::min(d_v - rem, d_v);
        if (c_hi < c_lo) continue;
        const double ln_na = tab.log_choose(n - d_v, a);
        LogWeight inner = LogWeight::zero();
        for (int c = c_hi; c >= c_lo; --c)
            inner += LogWeight::from_log(tab.log_choose(d_v, c));
        total += LogWeight::from_log(ln_na + inner.log_value());
    }
    return total;
}

inline LogWeight binary_circle_intersection(int d_v, int d, int n) {
    LogFactorialTable tab(n);
    return binary_circle_intersection(d_v, d, n, tab);
}

// Expected neurons in the intersection under uniformly random neuron
// placement: I * r / 2^n.
inline double expected_neurons(int d_v, int d, int n, double r,
                               const LogFactorialTable& tab) {
    if (r <= 0.0) throw std::domain_error("expected_neurons: r must be > 0");
    const LogWeight inter = binary_circle_intersection(d_v, d, n, tab);
    if (inter.is_zero()) return 0.0;
    return std::exp(inter.log_value() - n * std::numbers::ln2_v<double> + std::log(r));
}

inline double expected_neurons(int d_v, int d, int n, double r) {
    LogFactorialTable tab(n);
    return expected_neurons(d_v, d, n, r, tab);
}

// The three stages of the exponential approximation to the intersection's
// largest summand: the exact term C(n-d_v, a*) C(d_v, c*) at
// a* = n-d-floor(d_v/2), c* = floor(d_v/2); its normal approximation; and
// the final Taylor form
//   (2^{n+2} / (pi n)) exp(-(n-2d)^2/(2n)) exp(-((n-2d)^2/(2n^2)) d_v).
struct LargestTermApprox {
    LogWeight exact_term;
    LogWeight normal_approx;
    LogWeight taylor_approx;
};

inline LargestTermApprox largest_term_exponential_approx(int d_v, int d, int n,
                                                         const LogFactorialTable& tab) {
    if (!(d_v < 2 * d)) throw std::domain_error("largest_term: requires d_v < 2d");
    if (!(2 * d < n)) throw std::domain_error("largest_term: requires d < n/2");
    LargestTermApprox out;

    const int a_star = n - d - d_v / 2;
    const int c_star = d_v / 2;
    out.exact_term = LogWeight::from_log(tab.log_choose(n - d_v, a_star) +
                                         tab.log_choose(d_v, c_star));

    // 2^n * N(z_a) * N(z_c) with N the standard normal density at the
    // standardized coordinate; the d_v = 0 binomial factor is exactly 1.
    const double ln2 = std::numbers::ln2_v<double>;
    const double ln_2pi = std::log(2.0 * std::numbers::pi_v<double>);
    const double var_a = (n - d_v) / 4.0;
    const double z_a = (a_star - (n - d_v) / 2.0) / std::sqrt(var_a);
    double ln_normal = n * ln2 - 0.5 * (ln_2pi + std::log(var_a)) - 0.5 * z_a * z_a;
    if (d_v > 0) {
        const double var_c = d_v / 4.0;
        const double z_c = (c_star - d_v / 2.0) / std::sqrt(var_c);
        ln_normal += -0.5 * (ln_2pi + std::log(var_c)) - 0.5 * z_c * z_c;
    }
    // at d_v = 0 the second binomial is C(0,0) = 1 exactly
    out.normal_approx = LogWeight::from_log(ln_normal);

    const double q = static_cast<double>(n - 2 * d);
    const double ln_taylor = (n + 2) * ln2 -
                             std::log(std::numbers::pi_v<double> * n) -
                             q * q / (2.0 * n) - (q * q / (2.0 * n * n)) * d_v;
    out.taylor_approx = LogWeight::from_log(ln_taylor);
    return out;
}

inline LargestTermApprox largest_term_exponential_approx(int d_v, int d, int n) {
    LogFactorialTable tab(n);
    return largest_term_exponential_approx(d_v, d, n, tab);
}

// Exhaustive oracle: counts the 2^n addresses within distance d of two
// points at distance d_v. Enumeration bound keeps runtimes sane.
inline long long brute_force_intersection(int d_v, int d, int n) {
    if (n > 22) throw std::length_error("brute_force_intersection: n > 22");
    if (d_v < 0 || d_v > n || d < 0 || d > n)
        throw std::domain_error("brute_force_intersection: bad arguments");
    const std::uint64_t ref = (d_v == 64) ? ~0ULL : ((1ULL << d_v) - 1);
    long long count = 0;
    const std::uint64_t limit = 1ULL << n;
    for (std::uint64_t x = 0; x < limit; ++x) {
        if (std::popcount(x) <= d && std::popcount(x ^ ref) <= d) ++count;
    }
    return count;
}

}  // namespace sdm
