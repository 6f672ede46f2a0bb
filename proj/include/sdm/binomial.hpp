#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "sdm/logweight.hpp"

namespace sdm {

// Cached lgamma(i + 1) table so ln C(n, k) is two lookups. Tables are built
// per dimension and reused across the hot loops.
class LogFactorialTable {
public:
    explicit LogFactorialTable(int max_n) : lg_(max_n + 1) {
        for (int i = 0; i <= max_n; ++i) lg_[i] = std::lgamma(static_cast<double>(i) + 1.0);
    }
    double log_factorial(int i) const { return lg_[i]; }
    double log_choose(int n, int k) const { return lg_[n] - lg_[k] - lg_[n - k]; }
    int max_n() const { return static_cast<int>(lg_.size()) - 1; }

private:
    std::vector<double> lg_;
};

// ln C(n, k). Out-of-range k contributes nothing to intersection sums, so it
// maps to the zero weight rather than an error.
inline LogWeight log_binomial(int n, int k) {
    if (n < 0) throw std::domain_error("log_binomial: n < 0");
    if (k < 0 || k > n) return LogWeight::zero();
    return LogWeight::from_log(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                               std::lgamma(n - k + 1.0));
}

// ln of the binomial(n, 1/2) lower tail sum_{k<=d} C(n,k); -inf for d < 0.
inline LogWeight log_binomial_tail(int n, int d, const LogFactorialTable& tab) {
    LogWeight s = LogWeight::zero();
    // accumulate from the largest term downward for log-sum-exp stability
    for (int k = std::min(d, n); k >= 0; --k)
        s += LogWeight::from_log(tab.log_choose(n, k));
    return s;
}

// Fraction of the 2^n space within Hamming distance d of a point.
inline double binomial_tail_fraction(int n, int d, const LogFactorialTable& tab) {
    if (d < 0) return 0.0;
    if (d >= n) return 1.0;
    LogWeight s = log_binomial_tail(n, d, tab);
    return std::exp(s.log_value() - n * std::numbers::ln2_v<double>);
}

// Smallest d whose binomial(n, 1/2) tail mass reaches p (the Eq. 21 inverse
// CDF rounding used for d*).
inline int binomial_inverse_cdf(double p, int n, const LogFactorialTable& tab) {
    if (p <= 0.0) return 0;
    for (int d = 0; d <= n; ++d) {
        if (binomial_tail_fraction(n, d, tab) >= p) return d;
    }
    return n;
}

}  // namespace sdm
