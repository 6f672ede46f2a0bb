#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sdm/bitvector.hpp"
#include "sdm/rng.hpp"

namespace sdm {

using DenseVector = std::vector<double>;

inline double dot(const DenseVector& a, const DenseVector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0, c = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        // Kahan compensation; these dot products feed cosine thresholds.
        double y = a[i] * b[i] - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

inline double norm(const DenseVector& v) { return std::sqrt(dot(v, v)); }

inline void normalize_in_place(DenseVector& v) {
    const double nrm = norm(v);
    if (nrm == 0.0) throw std::domain_error("normalize: zero vector");
    for (auto& x : v) x /= nrm;
}

inline DenseVector normalized(DenseVector v) {
    normalize_in_place(v);
    return v;
}

inline double cosine(const DenseVector& a, const DenseVector& b) {
    const double na = norm(a), nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

// Forward map of the Hamming <-> cosine correspondence: cos = 1 - 2 d_v / n.
inline double hamming_to_cosine(int d_v, int n) {
    if (d_v < 0 || d_v > n) throw std::domain_error("hamming_to_cosine: d_v out of [0, n]");
    return 1.0 - 2.0 * static_cast<double>(d_v) / n;
}

// Inverse map: d_v = floor((n/2)(1 - c)). The tiny nudge keeps exact grid
// cosines (1 - 2k/n computed in floating point) from flooring one bin low.
inline int cosine_to_hamming(double c, int n) {
    if (c < -1.0 - 1e-12 || c > 1.0 + 1e-12)
        throw std::domain_error("cosine_to_hamming: cosine out of [-1, 1]");
    const double x = 0.5 * n * (1.0 - c);
    int d = static_cast<int>(std::floor(x + 1e-9));
    if (d < 0) d = 0;
    if (d > n) d = n;
    return d;
}

// {0,1} -> {-1,+1} with 0 -> -1, scaled to unit norm. Under this map the
// floor identity d(a,b) = floor((n/2)(1 - a.b)) holds exactly.
inline DenseVector binary_to_unit(const BitVector& v) {
    const int n = v.size();
    DenseVector out(n);
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < n; ++i) out[i] = v.get(i) ? s : -s;
    return out;
}

// Unit-norm w with v.w == target_cos, built by combining v with a random
// orthogonalized direction.
inline DenseVector perturb_continuous(const DenseVector& v, double target_cos, Rng& rng) {
    const std::size_t n = v.size();
    if (target_cos <= -1.0 || target_cos > 1.0)
        throw std::domain_error("perturb_continuous: target cosine out of (-1, 1]");
    if (target_cos == 1.0) return v;
    for (int attempt = 0; attempt < 16; ++attempt) {
        DenseVector u(n);
        for (auto& x : u) x = rng.gaussian();
        const double proj = dot(u, v);
        for (std::size_t i = 0; i < n; ++i) u[i] -= proj * v[i];
        const double un = norm(u);
        if (un < 1e-12) continue;  // degenerate draw, resample
        const double s = std::sqrt(1.0 - target_cos * target_cos);
        DenseVector w(n);
        for (std::size_t i = 0; i < n; ++i) w[i] = target_cos * v[i] + s * u[i] / un;
        normalize_in_place(w);
        return w;
    }
    throw std::runtime_error("perturb_continuous: degenerate direction after 16 attempts");
}

enum class ThresholdKind { Binary, Bipolar };

// Majority rule g. Binary kind thresholds the normalized weighted average at
// 1/2; bipolar kind thresholds a raw sum at 0. Ties take the else branch
// (strict inequality), so an all-zero average maps to the all-zero vector.
inline BitVector majority_rule(const DenseVector& e, ThresholdKind kind) {
    BitVector out(static_cast<int>(e.size()));
    const double thr = (kind == ThresholdKind::Binary) ? 0.5 : 0.0;
    for (std::size_t i = 0; i < e.size(); ++i)
        if (e[i] > thr) out.set(static_cast<int>(i), true);
    return out;
}

// Bipolar form of g for Hopfield-style updates: 1 if e > 0 else -1.
inline DenseVector majority_rule_bipolar(const DenseVector& e) {
    DenseVector out(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) out[i] = e[i] > 0.0 ? 1.0 : -1.0;
    return out;
}

}  // namespace sdm
