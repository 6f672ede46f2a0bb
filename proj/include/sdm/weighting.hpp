#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "sdm/cap_intersection.hpp"
#include "sdm/densevector.hpp"
#include "sdm/intersect.hpp"
#include "sdm/logweight.hpp"
#include "sdm/patterns.hpp"
#include "sdm/rng.hpp"

namespace sdm {

enum class IntersectSource { Binary, Continuous };

// Result of the univariate log-linear regression of ln I against cosine
// similarity over d_v in {0, ..., d-1}: slope beta, intercept ln c3, and the
// fit quality.
struct BetaFit {
    double beta = 0.0;
    double log_intercept = 0.0;
    double r_squared = 0.0;
    IntersectSource source = IntersectSource::Binary;
    int d = 0;
    int n = 0;
};

inline BetaFit fit_beta(int d, int n, IntersectSource source) {
    if (!(d > 0 && 2 * d < n)) throw std::domain_error("fit_beta: requires 0 < d < n/2");
    if (d < 2) throw std::domain_error("fit_beta: fewer than 2 grid points");
    std::vector<double> xs, ys;
    xs.reserve(d);
    ys.reserve(d);
    if (source == IntersectSource::Binary) {
        LogFactorialTable tab(n);
        for (int d_v = 0; d_v < d; ++d_v) {
            xs.push_back(hamming_to_cosine(d_v, n));
            ys.push_back(binary_circle_intersection(d_v, d, n, tab).log_value());
        }
    } else {
        const double cos_d = 1.0 - 2.0 * static_cast<double>(d) / n;
        for (int d_v = 0; d_v < d; ++d_v) {
            const double c = hamming_to_cosine(d_v, n);
            xs.push_back(c);
            ys.push_back(std::log(cap_intersection_fraction(c, cos_d, n)));
        }
    }
    const std::size_t k = xs.size();
    double xm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        xm += xs[i];
        ym += ys[i];
    }
    xm /= k;
    ym /= k;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sxy += (xs[i] - xm) * (ys[i] - ym);
        sxx += (xs[i] - xm) * (xs[i] - xm);
        syy += (ys[i] - ym) * (ys[i] - ym);
    }
    BetaFit fit;
    fit.beta = sxy / sxx;
    fit.log_intercept = ym - fit.beta * xm;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    fit.source = source;
    fit.d = d;
    fit.n = n;
    return fit;
}

// Max-subtracted stable softmax; outputs sum to 1.
inline std::vector<double> softmax(const std::vector<double>& scores, double beta) {
    if (scores.empty()) throw std::invalid_argument("softmax: empty scores");
    double mx = -std::numeric_limits<double>::infinity();
    for (double s : scores) mx = std::max(mx, beta * s);
    std::vector<double> out(scores.size());
    KahanSum total;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(beta * scores[i] - mx);
        total.add(out[i]);
    }
    const double z = total.value();
    for (auto& w : out) w /= z;
    return out;
}

// Stochastic rounding floor(e) + Bernoulli(frac(e)); unbiased and never more
// than 1 away from the input. Entries above 2^53 are left untouched --
// integer quantization noise is vacuous at that scale.
inline std::vector<double> quantize_neuron_counts(const std::vector<double>& expected,
                                                  Rng& rng) {
    std::vector<double> out(expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const double e = expected[i];
        if (e < 0.0) throw std::domain_error("quantize_neuron_counts: negative count");
        if (e > 9007199254740992.0) {  // 2^53
            out[i] = e;
            continue;
        }
        const double fl = std::floor(e);
        const double frac = e - fl;
        out[i] = fl + ((frac > 0.0 && rng.bernoulli(frac)) ? 1.0 : 0.0);
    }
    return out;
}

enum class KernelKind { BinaryIntersection, ContinuousIntersection, Softmax };

constexpr double kUnlimitedNeurons = std::numeric_limits<double>::infinity();

// Strategy object producing per-pattern raw weights from distances. The
// binary-intersection kernel tabulates relative intersection sizes over the
// d_v grid; the continuous kernel tabulates the cap fraction over the angle;
// the softmax kernel carries a BetaFit. A finite neuron budget switches the
// intersection kernels to expected-count scale so the counts can be
// stochastically quantized per read.
class WeightKernel {
public:
    static WeightKernel binary_intersection(int n, int d,
                                            double neuron_budget = kUnlimitedNeurons) {
        WeightKernel k;
        k.kind_ = KernelKind::BinaryIntersection;
        k.n_ = n;
        k.d_ = d;
        k.neuron_budget_ = neuron_budget;
        LogFactorialTable tab(n);
        k.rel_weight_.resize(n + 1);
        const double ln0 = binary_circle_intersection(0, d, n, tab).log_value();
        const double ln_scale =
            std::isfinite(neuron_budget)
                ? std::log(neuron_budget) - n * std::numbers::ln2_v<double>
                : -ln0;  // unlimited: weights relative to the d_v = 0 intersection
        bool vacuous = true;
        for (int d_v = 0; d_v <= n; ++d_v) {
            const LogWeight w = binary_circle_intersection(d_v, d, n, tab);
            const double v = w.is_zero() ? 0.0 : std::exp(w.log_value() + ln_scale);
            k.rel_weight_[d_v] = v;
            if (v <= 9007199254740992.0 && v != std::floor(v)) vacuous = false;
        }
        // r = 2^n (and friends) make every expected count an exact integer;
        // quantization then never draws and the kernel stays deterministic
        k.quantization_vacuous_ = !k.limited() || vacuous;
        return k;
    }

    static WeightKernel continuous_intersection(int n, int d,
                                                double neuron_budget = kUnlimitedNeurons) {
        WeightKernel k;
        k.kind_ = KernelKind::ContinuousIntersection;
        k.n_ = n;
        k.d_ = d;
        k.neuron_budget_ = neuron_budget;
        k.quantization_vacuous_ = !k.limited();
        const double cos_d = 1.0 - 2.0 * static_cast<double>(d) / n;
        k.cap_table_ = CapIntersectionTable(cos_d, n);
        return k;
    }

    static WeightKernel fitted_softmax(const BetaFit& fit) {
        WeightKernel k;
        k.kind_ = KernelKind::Softmax;
        k.n_ = fit.n;
        k.d_ = fit.d;
        k.beta_ = fit;
        return k;
    }

    KernelKind kind() const { return kind_; }
    double neuron_budget() const { return neuron_budget_; }
    bool limited() const { return std::isfinite(neuron_budget_); }
    bool quantization_vacuous() const { return quantization_vacuous_; }
    const BetaFit& beta() const { return beta_; }
    int dimension() const { return n_; }
    int radius() const { return d_; }

    // Raw (unnormalized) weight for a pattern at Hamming distance d_v.
    double raw_weight_hamming(int d_v) const {
        switch (kind_) {
            case KernelKind::BinaryIntersection:
                return rel_weight_[d_v];
            case KernelKind::ContinuousIntersection:
                return scaled_cap(hamming_to_cosine(d_v, n_));
            case KernelKind::Softmax:
                return std::exp(beta_.beta * (hamming_to_cosine(d_v, n_) - 1.0));
        }
        return 0.0;
    }

    // Raw weight for a pattern at cosine similarity c. The binary kernel maps
    // the cosine back to Hamming distance first (Eq. 5 inverse).
    double raw_weight_cosine(double c) const {
        switch (kind_) {
            case KernelKind::BinaryIntersection:
                return rel_weight_[cosine_to_hamming(c, n_)];
            case KernelKind::ContinuousIntersection:
                return scaled_cap(c);
            case KernelKind::Softmax:
                return std::exp(beta_.beta * (c - 1.0));
        }
        return 0.0;
    }

private:
    double scaled_cap(double c) const {
        const double f = cap_table_.fraction(c);
        return limited() ? f * neuron_budget_ : f;
    }

    KernelKind kind_ = KernelKind::BinaryIntersection;
    int n_ = 0;
    int d_ = 0;
    double neuron_budget_ = kUnlimitedNeurons;
    bool quantization_vacuous_ = true;
    std::vector<double> rel_weight_;  // binary kernel, indexed by d_v
    CapIntersectionTable cap_table_;  // continuous kernel
    BetaFit beta_;  // softmax kernel
};

// Normalized weights plus the all-zero flag (no intersection anywhere).
struct KernelWeights {
    std::vector<double> weights;
    bool no_intersection = false;
};

namespace detail {

inline KernelWeights normalize_raw(std::vector<double> raw, const WeightKernel& kernel,
                                   Rng* rng) {
    if (kernel.limited() && kernel.kind() != KernelKind::Softmax &&
        !kernel.quantization_vacuous()) {
        if (rng == nullptr)
            throw std::invalid_argument("kernel_weights: limited kernel needs an rng");
        raw = quantize_neuron_counts(raw, *rng);
    }
    KahanSum total;
    for (double w : raw) total.add(w);
    const double z = total.value();
    KernelWeights out;
    out.weights = std::move(raw);
    if (z <= 0.0) {
        std::fill(out.weights.begin(), out.weights.end(), 0.0);
        out.no_intersection = true;
        return out;
    }
    for (auto& w : out.weights) w /= z;
    return out;
}

}  // namespace detail

// Weights for a binary query against binary pattern addresses.
inline KernelWeights kernel_weights(const WeightKernel& kernel, const BitVector& query,
                                    const BitPatterns& patterns, Rng* rng = nullptr) {
    if (query.size() != kernel.dimension())
        throw std::invalid_argument("kernel_weights: dimension mismatch");
    std::vector<double> raw(patterns.count());
    for (std::size_t i = 0; i < patterns.count(); ++i)
        raw[i] = kernel.raw_weight_hamming(hamming_distance(query, patterns.addresses[i]));
    return detail::normalize_raw(std::move(raw), kernel, rng);
}

// Weights for a unit-norm dense query against unit-norm dense addresses.
inline KernelWeights kernel_weights(const WeightKernel& kernel, const DenseVector& query,
                                    const DensePatterns& patterns, Rng* rng = nullptr) {
    if (static_cast<int>(query.size()) != kernel.dimension())
        throw std::invalid_argument("kernel_weights: dimension mismatch");
    std::vector<double> raw(patterns.count());
    for (std::size_t i = 0; i < patterns.count(); ++i) {
        double c = dot(query, patterns.addresses[i]);
        c = std::min(1.0, std::max(-1.0, c));
        raw[i] = kernel.raw_weight_cosine(c);
    }
    return detail::normalize_raw(std::move(raw), kernel, rng);
}

// Single Attention read: P_p softmax(beta P_a^T q). Pointers are summed
// as-is (they may live in a different space and are not renormalized).
inline DenseVector attention_update(const DensePatterns& patterns, const DenseVector& query,
                                    double beta) {
    if (patterns.count() == 0) throw std::invalid_argument("attention_update: no patterns");
    if (patterns.addresses[0].size() != query.size())
        throw std::invalid_argument("attention_update: dimension mismatch");
    std::vector<double> scores(patterns.count());
    for (std::size_t i = 0; i < patterns.count(); ++i)
        scores[i] = dot(query, patterns.addresses[i]);
    const std::vector<double> w = softmax(scores, beta);
    const std::size_t out_dim = patterns.pointers[0].size();
    DenseVector out(out_dim, 0.0);
    std::vector<KahanSum> acc(out_dim);
    for (std::size_t i = 0; i < patterns.count(); ++i) {
        const DenseVector& p = patterns.pointers[i];
        for (std::size_t j = 0; j < out_dim; ++j) acc[j].add(w[i] * p[j]);
    }
    for (std::size_t j = 0; j < out_dim; ++j) out[j] = acc[j].value();
    return out;
}

}  // namespace sdm
