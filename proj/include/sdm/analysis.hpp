#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sdm/binomial.hpp"
#include "sdm/bitvector.hpp"
#include "sdm/densevector.hpp"
#include "sdm/engines.hpp"
#include "sdm/intersect.hpp"
#include "sdm/patterns.hpp"
#include "sdm/rng.hpp"
#include "sdm/special.hpp"

namespace sdm {

struct SnrEstimate {
    double snr = 0.0;
    double expected_target_intersection = 0.0;
    double noise_std = 0.0;
    bool simulated = false;
    int trials = 0;
    double standard_error = std::numeric_limits<double>::quiet_NaN();
};

// SNR = E[I_*] / sqrt(E[I_*] + (m-1)(E[I_mu] + E[I_mu]^2)) with the target
// intersection at d_v_target and interfering patterns placed at the
// orthogonal distance n/2 (Poisson variance approximation).
inline SnrEstimate analytic_snr(int d_v_target, int d, double r, int m, int n,
                                const LogFactorialTable& tab) {
    if (m < 1) throw std::domain_error("analytic_snr: m >= 1");
    SnrEstimate est;
    const double e_star = expected_neurons(d_v_target, d, n, r, tab);
    const double e_mu = expected_neurons(n / 2, d, n, r, tab);
    est.expected_target_intersection = e_star;
    const double var = e_star + (m - 1) * (e_mu + e_mu * e_mu);
    est.noise_std = std::sqrt(var);
    est.snr = (e_star > 0.0 && var > 0.0) ? e_star / est.noise_std : 0.0;
    return est;
}

inline SnrEstimate analytic_snr(int d_v_target, int d, double r, int m, int n) {
    LogFactorialTable tab(n);
    return analytic_snr(d_v_target, d, r, m, n, tab);
}

// Full neuron simulation of the read summation. Each trial samples fresh
// neurons and patterns, writes every pattern, reads at d_v_target from the
// target, and measures the realized target intersection against the
// elementwise noise of the summed value vectors.
inline SnrEstimate monte_carlo_snr(int n, int d, double r, int m, int d_v_target,
                                   int trials, Rng& rng) {
    if (!std::isfinite(r) || r < 1.0)
        throw std::domain_error("monte_carlo_snr: finite r >= 1 required");
    if (r * n * 4.0 > 4.0e9) throw std::length_error("monte_carlo_snr: r x n too large");
    std::vector<double> snr_per_trial;
    std::vector<double> signal_per_trial;
    snr_per_trial.reserve(trials);
    for (int t = 0; t < trials; ++t) {
        Rng trial_rng = rng.fork(t);
        std::vector<BitVector> addrs;
        addrs.reserve(m);
        for (int mu = 0; mu < m; ++mu) addrs.push_back(BitVector::random(n, trial_rng));
        BitPatterns patterns = BitPatterns::autoassociative(std::move(addrs));
        NeuronStore store(n, static_cast<std::size_t>(r), d, trial_rng);
        store.write(patterns);
        const BitVector& target = patterns.addresses[0];
        const BitVector query = perturb_binary(target, d_v_target, trial_rng);
        // realized target intersection: neurons inside both circles
        long long i_star = 0;
        std::vector<std::int64_t> sum(n, 0);
        for (std::size_t tau = 0; tau < store.count(); ++tau) {
            if (store.addresses().distance_to(tau, query) > d) continue;
            if (store.addresses().distance_to(tau, target) <= d) ++i_star;
            const std::int32_t* row = store.values_row(tau);
            for (int j = 0; j < n; ++j) sum[j] += row[j];
        }
        // noise per element after removing the target's contribution
        double mean = 0.0;
        std::vector<double> noise(n);
        for (int j = 0; j < n; ++j) {
            const double tgt = target.get(j) ? 1.0 : -1.0;
            noise[j] = static_cast<double>(sum[j]) - static_cast<double>(i_star) * tgt;
            mean += noise[j];
        }
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) var += (noise[j] - mean) * (noise[j] - mean);
        var /= (n - 1);
        const double sd = std::sqrt(var);
        signal_per_trial.push_back(static_cast<double>(i_star));
        snr_per_trial.push_back(sd > 0.0 ? i_star / sd : 0.0);
    }
    SnrEstimate est;
    est.simulated = true;
    est.trials = trials;
    double ms = 0.0, msnr = 0.0;
    for (int t = 0; t < trials; ++t) {
        ms += signal_per_trial[t];
        msnr += snr_per_trial[t];
    }
    ms /= trials;
    msnr /= trials;
    est.expected_target_intersection = ms;
    est.snr = msnr;
    if (trials > 1) {
        double v = 0.0;
        for (double s : snr_per_trial) v += (s - msnr) * (s - msnr);
        v /= (trials - 1);
        est.noise_std = std::sqrt(v);  // spread of the per-trial SNR estimates
        est.standard_error = est.noise_std / std::sqrt(static_cast<double>(trials));
    }
    return est;
}

// z = F^{-1}(prob^{1/n}) for whole-pattern retrieval probability prob.
inline double retrieval_z(double prob, int n) {
    if (!(prob > 0.0 && prob < 1.0)) throw std::domain_error("retrieval_z: prob in (0,1)");
    return normal_inverse_cdf(std::exp(std::log(prob) / n));
}

// m = (E[I_*]^2 / z^2 - E[I_*]) / (E[I_mu] + E[I_mu]^2) + 1 with
// E[I_*] = p r and E[I_mu] = p^2 r; 0 when the SNR cannot reach z.
inline double memory_capacity(int d, double r, int n, double z,
                              const LogFactorialTable& tab) {
    const double p = binomial_tail_fraction(n, d, tab);
    const double e_star = p * r;
    const double e_mu = p * p * r;
    if (!(e_star > z * z)) return 0.0;
    return (e_star * e_star / (z * z) - e_star) / (e_mu + e_mu * e_mu) + 1.0;
}

inline double memory_capacity(int d, double r, int n, double z) {
    LogFactorialTable tab(n);
    return memory_capacity(d, r, n, z, tab);
}

enum class OptimalCriterion { Snr, Memory, CriticalDistance };

inline const char* optimal_criterion_name(OptimalCriterion c) {
    switch (c) {
        case OptimalCriterion::Snr: return "snr";
        case OptimalCriterion::Memory: return "memory";
        case OptimalCriterion::CriticalDistance: return "critical-distance";
    }
    return "unknown";
}

struct OptimalD {
    int d_star = 0;
    double p_star = 0.0;
    OptimalCriterion criterion = OptimalCriterion::Snr;
    int n = 0;
    double m = 0.0;
    double r = 0.0;
};

// p* = 1 / cbrt(2 m r); d* is the smallest radius whose binomial tail mass
// reaches p*.
inline OptimalD optimal_d_snr(int n, double m, double r) {
    if (!(m > 0.0 && r > 0.0)) throw std::domain_error("optimal_d_snr: m, r > 0");
    OptimalD out;
    out.criterion = OptimalCriterion::Snr;
    out.n = n;
    out.m = m;
    out.r = r;
    out.p_star = std::pow(2.0 * m * r, -1.0 / 3.0);
    LogFactorialTable tab(n);
    out.d_star = binomial_inverse_cdf(out.p_star, n, tab);
    return out;
}

// Closed-form stationary point of the capacity in p, then the same inverse
// CDF rounding. z defaults to 99% whole-pattern retrieval via retrieval_z.
inline OptimalD optimal_d_memory(int n, double r, double retrieval_prob = 0.99) {
    if (!(r > 0.0)) throw std::domain_error("optimal_d_memory: r > 0");
    const double z = retrieval_z(retrieval_prob, n);
    const double z2 = z * z;
    const double cube = 2.0 * std::pow(r, 4) * z2 + std::pow(r, 3) * std::pow(z, 6) +
                        2.0 * std::sqrt(std::pow(r, 8) * std::pow(z, 4) +
                                        std::pow(r, 7) * std::pow(z, 8));
    const double root = std::cbrt(cube);
    const double p_star =
        0.5 * (std::pow(z, 4) / root + root / (r * r) + z2 / r);
    OptimalD out;
    out.criterion = OptimalCriterion::Memory;
    out.n = n;
    out.m = 0.0;
    out.r = r;
    out.p_star = p_star;
    LogFactorialTable tab(n);
    out.d_star = binomial_inverse_cdf(p_star, n, tab);
    return out;
}

// Fidelity f = Phi(SNR); expected post-update Hamming distance n - f n.
inline double expected_new_distance(int d_v, int d, int n, int m, double r,
                                    const LogFactorialTable& tab) {
    if (d_v < 0 || d_v > n) throw std::domain_error("expected_new_distance: d_v");
    const SnrEstimate s = analytic_snr(d_v, d, r, m, n, tab);
    const double f = normal_cdf(s.snr);
    return n * (1.0 - f);
}

// Largest query distance whose expected update still moves toward the
// target. The convergent region is the contiguous run of d_v with
// expected_new_distance(d_v) < d_v; the run may start above 1 when the map's
// stable point sits a few bits out (small-m regimes). A run that never
// starts within n/4 is no retrieval basin at all and yields 0.
inline int critical_distance(int d, int n, int m, double r,
                             const LogFactorialTable& tab) {
    int cd = 0;
    bool entered = false;
    for (int d_v = 1; d_v <= n / 2; ++d_v) {
        if (expected_new_distance(d_v, d, n, m, r, tab) < static_cast<double>(d_v)) {
            cd = d_v;
            entered = true;
        } else if (entered) {
            break;  // left the basin
        } else if (d_v > n / 4) {
            return 0;
        }
    }
    return cd;
}

inline int critical_distance(int d, int n, int m, double r) {
    LogFactorialTable tab(n);
    return critical_distance(d, n, m, r, tab);
}

// Scans d over (0, n/2) for the radius maximizing the critical distance.
// Ties break toward the smaller d.
inline OptimalD optimal_d_critical(int n, double m, double r) {
    LogFactorialTable tab(n);
    OptimalD out;
    out.criterion = OptimalCriterion::CriticalDistance;
    out.n = n;
    out.m = m;
    out.r = r;
    int best_d = 0, best_cd = -1;
    for (int d = 1; d < (n + 1) / 2; ++d) {
        const int cd = critical_distance(d, n, static_cast<int>(m), r, tab);
        if (cd > best_cd) {
            best_cd = cd;
            best_d = d;
        }
    }
    out.d_star = best_d;
    out.p_star = binomial_tail_fraction(n, best_d, tab);
    return out;
}

struct CriticalDistanceRow {
    int d = 0;
    double r = 0.0;
    int critical_distance = 0;
};

// Critical distance tabulated over an r grid for each read radius.
inline std::vector<CriticalDistanceRow> critical_distance_vs_neurons(
    const std::vector<int>& d_set, int n, int m, const std::vector<double>& r_grid) {
    LogFactorialTable tab(n);
    std::vector<CriticalDistanceRow> rows;
    rows.reserve(d_set.size() * r_grid.size());
    for (int d : d_set) {
        for (double r : r_grid) {
            rows.push_back({d, r, critical_distance(d, n, m, r, tab)});
        }
    }
    return rows;
}

// Hopfield update g(P_p P_a^T xi) on bipolar vectors; autoassociative when
// pointers alias addresses. Weights are raw bipolar dot products with no
// threshold or normalization.
inline DenseVector hopfield_update(const DensePatterns& patterns, const DenseVector& query) {
    if (patterns.count() == 0) throw std::invalid_argument("hopfield_update: no patterns");
    const std::size_t n = query.size();
    if (patterns.addresses[0].size() != n)
        throw std::invalid_argument("hopfield_update: dimension mismatch");
    for (const auto& row : {&patterns.addresses, &patterns.pointers})
        for (const auto& v : *row)
            for (double x : v)
                if (x != 1.0 && x != -1.0)
                    throw std::domain_error("hopfield_update: entries must be bipolar");
    DenseVector e(patterns.pointers[0].size(), 0.0);
    for (std::size_t mu = 0; mu < patterns.count(); ++mu) {
        double w = 0.0;
        for (std::size_t j = 0; j < n; ++j) w += patterns.addresses[mu][j] * query[j];
        const DenseVector& p = patterns.pointers[mu];
        for (std::size_t j = 0; j < p.size(); ++j) e[j] += w * p[j];
    }
    return majority_rule_bipolar(e);
}

// The degenerate SDM read that Hopfield reduces to: neurons centered on the
// patterns (d_write = 0 puts exactly the own pointer in each), read
// unthresholded with the bipolar-rescaled distance weights, bipolar majority.
inline BitVector degenerate_sdm_read(const BitPatterns& patterns, const BitVector& query) {
    const int n = query.size();
    DenseVector e(n, 0.0);
    for (std::size_t mu = 0; mu < patterns.count(); ++mu) {
        const int dv = hamming_distance(patterns.addresses[mu], query);
        const double w = static_cast<double>(n) - 2.0 * dv;  // bipolar dot product
        const BitVector& p = patterns.pointers[mu];
        for (int j = 0; j < n; ++j) e[j] += w * (p.get(j) ? 1.0 : -1.0);
    }
    BitVector out(n);
    for (int j = 0; j < n; ++j)
        if (e[j] > 0.0) out.set(j, true);
    return out;
}

}  // namespace sdm
