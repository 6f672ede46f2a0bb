#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdm/harness/dataset.hpp"
#include "sdm/harness/experiment.hpp"
#include "sdm/parallel.hpp"
#include "sdm/weighting.hpp"

namespace sdm {

// Learnt projection into the latent read space: queries and pattern
// addresses pass through W and are unit-normalized; pattern pointers stay in
// raw pixel space.
struct ProjectionModel {
    int n_latent = 64;
    int n_raw = 0;
    std::vector<double> weights;  // n_latent x n_raw, row-major
    double beta = 0.0;
    int d = 0;

    void save(const std::string& path) const {
        nlohmann::json j;
        j["n_latent"] = n_latent;
        j["n_raw"] = n_raw;
        j["beta"] = beta;
        j["d"] = d;
        j["weights"] = weights;
        std::ofstream f(path);
        if (!f) throw std::runtime_error("ProjectionModel: cannot open " + path);
        f << j.dump();
    }

    static ProjectionModel load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("ProjectionModel: cannot open " + path);
        nlohmann::json j;
        f >> j;
        ProjectionModel m;
        m.n_latent = j.at("n_latent").get<int>();
        m.n_raw = j.at("n_raw").get<int>();
        m.beta = j.at("beta").get<double>();
        m.d = j.at("d").get<int>();
        m.weights = j.at("weights").get<std::vector<double>>();
        return m;
    }
};

struct ProjectionTrainConfig {
    int n_latent = 64;
    int d = 11;  // Hamming radius determining the training beta
    int epochs = 10;
    int batch = 128;
    int perturb_lo = 10;   // raw-space Hamming equivalents
    int perturb_hi = 100;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int threads = 0;
};

namespace detail {

// One attention step per query, through projection and normalization; the
// loss is the elementwise MSE between the weighted raw-pointer sum and the
// raw target, averaged over the batch. Returns the loss; when grad is
// non-null also accumulates dLoss/dW into it (same layout as W).
inline double projection_loss_and_grad(const std::vector<double>& W, int L, int R,
                                       const Dataset& data,
                                       const std::vector<std::size_t>& targets,
                                       const std::vector<DenseVector>& queries, double beta,
                                       std::vector<double>* grad, int threads) {
    const std::size_t m = data.count;
    const std::size_t B = targets.size();
    if (queries.size() != B) throw std::invalid_argument("projection: batch mismatch");

    // project and normalize every pattern address
    std::vector<double> P(m * L);       // unit latent addresses
    std::vector<double> vnorm(m);       // pre-normalization magnitudes
    const int nthreads = threads > 0 ? threads : default_thread_count();
    constexpr std::size_t kBlocks = 64;
    const std::size_t block = (m + kBlocks - 1) / kBlocks;
    parallel_for(kBlocks, nthreads, [&](std::size_t b) {
        const std::size_t lo = b * block, hi = std::min(m, lo + block);
        for (std::size_t i = lo; i < hi; ++i) {
            const double* x = data.row(i);
            double nrm = 0.0;
            for (int l = 0; l < L; ++l) {
                double s = 0.0;
                const double* wrow = W.data() + static_cast<std::size_t>(l) * R;
                for (int rr = 0; rr < R; ++rr) s += wrow[rr] * x[rr];
                P[i * L + l] = s;
                nrm += s * s;
            }
            nrm = std::sqrt(nrm);
            vnorm[i] = nrm;
            if (nrm > 0.0)
                for (int l = 0; l < L; ++l) P[i * L + l] /= nrm;
        }
    });

    double total_loss = 0.0;
    // per-pattern gradient accumulators shared across the batch
    std::vector<double> Avec;   // sum_b ds_{b,i} u_hat_b
    std::vector<double> alpha;  // sum_b ds_{b,i} s_{b,i}
    if (grad) {
        Avec.assign(m * L, 0.0);
        alpha.assign(m, 0.0);
    }

    for (std::size_t b = 0; b < B; ++b) {
        const DenseVector& q = queries[b];
        const double* t = data.row(targets[b]);
        // u = W q, u_hat = u / |u|
        std::vector<double> u(L);
        double unrm = 0.0;
        for (int l = 0; l < L; ++l) {
            double s = 0.0;
            const double* wrow = W.data() + static_cast<std::size_t>(l) * R;
            for (int rr = 0; rr < R; ++rr) s += wrow[rr] * q[rr];
            u[l] = s;
            unrm += s * s;
        }
        unrm = std::sqrt(unrm);
        std::vector<double> uh(L);
        for (int l = 0; l < L; ++l) uh[l] = u[l] / unrm;

        // scores and softmax weights
        std::vector<double> s(m);
        parallel_for(kBlocks, nthreads, [&](std::size_t blk) {
            const std::size_t lo = blk * block, hi = std::min(m, lo + block);
            for (std::size_t i = lo; i < hi; ++i) {
                double acc = 0.0;
                for (int l = 0; l < L; ++l) acc += uh[l] * P[i * L + l];
                s[i] = acc;
            }
        });
        double smax = -1e300;
        for (std::size_t i = 0; i < m; ++i) smax = std::max(smax, beta * s[i]);
        std::vector<double> w(m);
        double z = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            w[i] = std::exp(beta * s[i] - smax);
            z += w[i];
        }
        for (std::size_t i = 0; i < m; ++i) w[i] /= z;

        // output in raw space and loss
        std::vector<double> o(R, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            if (w[i] < 1e-18) continue;
            const double* x = data.row(i);
            for (int rr = 0; rr < R; ++rr) o[rr] += w[i] * x[rr];
        }
        double loss = 0.0;
        for (int rr = 0; rr < R; ++rr) {
            const double e = o[rr] - t[rr];
            loss += e * e;
        }
        loss /= R;
        total_loss += loss / B;
        if (!grad) continue;

        // backward
        std::vector<double> go(R);
        for (int rr = 0; rr < R; ++rr) go[rr] = 2.0 * (o[rr] - t[rr]) / (R * B);
        std::vector<double> a(m);
        parallel_for(kBlocks, nthreads, [&](std::size_t blk) {
            const std::size_t lo = blk * block, hi = std::min(m, lo + block);
            for (std::size_t i = lo; i < hi; ++i) {
                const double* x = data.row(i);
                double acc = 0.0;
                for (int rr = 0; rr < R; ++rr) acc += go[rr] * x[rr];
                a[i] = acc;
            }
        });
        double abar = 0.0;
        for (std::size_t i = 0; i < m; ++i) abar += w[i] * a[i];
        std::vector<double> ds(m);
        for (std::size_t i = 0; i < m; ++i) ds[i] = beta * w[i] * (a[i] - abar);

        // query side: dL/du_hat then through the normalization
        std::vector<double> guh(L, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            if (ds[i] == 0.0) continue;
            for (int l = 0; l < L; ++l) guh[l] += ds[i] * P[i * L + l];
        }
        double proj = 0.0;
        for (int l = 0; l < L; ++l) proj += guh[l] * uh[l];
        std::vector<double> gu(L);
        for (int l = 0; l < L; ++l) gu[l] = (guh[l] - proj * uh[l]) / unrm;
        for (int l = 0; l < L; ++l) {
            double* grow = grad->data() + static_cast<std::size_t>(l) * R;
            const double g = gu[l];
            if (g == 0.0) continue;
            for (int rr = 0; rr < R; ++rr) grow[rr] += g * q[rr];
        }

        // pattern side accumulators (finished after the batch loop)
        for (std::size_t i = 0; i < m; ++i) {
            if (ds[i] == 0.0) continue;
            alpha[i] += ds[i] * s[i];
            for (int l = 0; l < L; ++l) Avec[i * L + l] += ds[i] * uh[l];
        }
    }

    if (grad) {
        // dL/dv_i = (Avec_i - alpha_i p_i) / |v_i|; dW += dL/dv_i x_i^T
        std::vector<std::vector<double>> partial(kBlocks);
        parallel_for(kBlocks, nthreads, [&](std::size_t blk) {
            const std::size_t lo = blk * block, hi = std::min(m, lo + block);
            std::vector<double>& local = partial[blk];
            local.assign(static_cast<std::size_t>(L) * R, 0.0);
            std::vector<double> gv(L);
            for (std::size_t i = lo; i < hi; ++i) {
                if (vnorm[i] == 0.0) continue;
                bool any = false;
                for (int l = 0; l < L; ++l) {
                    gv[l] = (Avec[i * L + l] - alpha[i] * P[i * L + l]) / vnorm[i];
                    any = any || gv[l] != 0.0;
                }
                if (!any) continue;
                const double* x = data.row(i);
                for (int l = 0; l < L; ++l) {
                    if (gv[l] == 0.0) continue;
                    double* lrow = local.data() + static_cast<std::size_t>(l) * R;
                    for (int rr = 0; rr < R; ++rr) lrow[rr] += gv[l] * x[rr];
                }
            }
        });
        for (std::size_t blk = 0; blk < kBlocks; ++blk) {
            if (partial[blk].empty()) continue;
            for (std::size_t k = 0; k < grad->size(); ++k) (*grad)[k] += partial[blk][k];
        }
    }
    return total_loss;
}

}  // namespace detail

inline double projection_loss(const ProjectionModel& model, const Dataset& data,
                              const std::vector<std::size_t>& targets,
                              const std::vector<DenseVector>& queries, int threads = 0) {
    return detail::projection_loss_and_grad(model.weights, model.n_latent, model.n_raw, data,
                                            targets, queries, model.beta, nullptr, threads);
}

inline double projection_gradient(const ProjectionModel& model, const Dataset& data,
                                  const std::vector<std::size_t>& targets,
                                  const std::vector<DenseVector>& queries,
                                  std::vector<double>& grad_out, int threads = 0) {
    grad_out.assign(model.weights.size(), 0.0);
    return detail::projection_loss_and_grad(model.weights, model.n_latent, model.n_raw, data,
                                            targets, queries, model.beta, &grad_out, threads);
}

// Trains W with Adam: each step samples a batch of targets, perturbs each to
// a cosine equivalent of a uniform Hamming distance in [perturb_lo,
// perturb_hi], runs one attention step against the full dataset, and
// backpropagates the raw-space MSE.
inline ProjectionModel train_projection(const Dataset& data,
                                        const ProjectionTrainConfig& cfg, Rng& rng) {
    if (data.count == 0) throw std::invalid_argument("train_projection: empty dataset");
    const int L = cfg.n_latent;
    const int R = static_cast<int>(data.dim);
    ProjectionModel model;
    model.n_latent = L;
    model.n_raw = R;
    model.d = cfg.d;
    model.beta = fit_beta(cfg.d, L, IntersectSource::Binary).beta;
    model.weights.resize(static_cast<std::size_t>(L) * R);
    const double init = 1.0 / std::sqrt(static_cast<double>(R));
    for (auto& w : model.weights) w = rng.uniform(-init, init);

    std::vector<double> m1(model.weights.size(), 0.0);
    std::vector<double> m2(model.weights.size(), 0.0);
    std::vector<double> grad(model.weights.size());
    const std::size_t steps_per_epoch = std::max<std::size_t>(1, data.count / cfg.batch);
    std::size_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            std::vector<std::size_t> targets(cfg.batch);
            std::vector<DenseVector> queries(cfg.batch);
            for (int b = 0; b < cfg.batch; ++b) {
                targets[b] = rng.uniform_below(data.count);
                const int h = cfg.perturb_lo +
                              static_cast<int>(rng.uniform_below(
                                  static_cast<std::uint64_t>(cfg.perturb_hi - cfg.perturb_lo + 1)));
                DenseVector t = data.row_vector(targets[b]);
                normalize_in_place(t);
                queries[b] = perturb_continuous(t, hamming_to_cosine(h, R), rng);
            }
            grad.assign(grad.size(), 0.0);
            const double loss = detail::projection_loss_and_grad(
                model.weights, L, R, data, targets, queries, model.beta, &grad, cfg.threads);
            if (!std::isfinite(loss))
                throw std::runtime_error("train_projection: non-finite loss at step " +
                                         std::to_string(step));
            ++step;
            const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
            for (std::size_t k = 0; k < model.weights.size(); ++k) {
                m1[k] = cfg.adam_beta1 * m1[k] + (1.0 - cfg.adam_beta1) * grad[k];
                m2[k] = cfg.adam_beta2 * m2[k] + (1.0 - cfg.adam_beta2) * grad[k] * grad[k];
                model.weights[k] -= cfg.learning_rate * (m1[k] / bc1) /
                                    (std::sqrt(m2[k] / bc2) + cfg.adam_eps);
            }
        }
    }
    return model;
}

struct ProjectionEvalSpec {
    std::vector<EngineKind> engines = {EngineKind::ContinuousSdmBinaryFitAttention};
    std::vector<int> magnitudes = {0, 50, 100, 150, 200, 250, 300};
    double r = kUnlimitedNeurons;  // neuron budget for intersection kernels
    int max_steps = 10;
    int query_count = 512;
    std::uint64_t seed = 0;
    int threads = 0;
};

// Runs the continuous engines in the latent space with raw-pixel pointers:
// the query is re-projected through W on every step, and the update is the
// kernel-weighted sum of raw patterns.
inline std::vector<TrialResult> evaluate_projection(const ProjectionModel& model,
                                                    const Dataset& data,
                                                    const ProjectionEvalSpec& spec) {
    const int L = model.n_latent;
    const int R = model.n_raw;
    if (static_cast<int>(data.dim) != R)
        throw std::invalid_argument("evaluate_projection: dataset dim mismatch");
    const std::size_t m = data.count;

    // latent unit addresses
    std::vector<double> P(m * L);
    const int nthreads = spec.threads > 0 ? spec.threads : default_thread_count();
    parallel_for(m, nthreads, [&](std::size_t i) {
        const double* x = data.row(i);
        double nrm = 0.0;
        for (int l = 0; l < L; ++l) {
            double s = 0.0;
            const double* wrow = model.weights.data() + static_cast<std::size_t>(l) * R;
            for (int rr = 0; rr < R; ++rr) s += wrow[rr] * x[rr];
            P[i * L + l] = s;
            nrm += s * s;
        }
        nrm = std::sqrt(nrm);
        if (nrm > 0.0)
            for (int l = 0; l < L; ++l) P[i * L + l] /= nrm;
    });

    // kernels per engine kind
    std::vector<WeightKernel> kernels;
    kernels.reserve(spec.engines.size());
    for (EngineKind k : spec.engines) {
        switch (k) {
            case EngineKind::ContinuousBinarySdm:
                kernels.push_back(WeightKernel::binary_intersection(L, model.d, spec.r));
                break;
            case EngineKind::ContinuousSdm:
                kernels.push_back(WeightKernel::continuous_intersection(L, model.d, spec.r));
                break;
            case EngineKind::ContinuousSdmBinaryFitAttention:
                kernels.push_back(WeightKernel::fitted_softmax(
                    fit_beta(model.d, L, IntersectSource::Binary)));
                break;
            case EngineKind::ContinuousSdmContinuousFitAttention:
                kernels.push_back(WeightKernel::fitted_softmax(
                    fit_beta(model.d, L, IntersectSource::Continuous)));
                break;
            default:
                throw std::invalid_argument(
                    "evaluate_projection: continuous engine kinds only");
        }
    }

    std::vector<TrialResult> results(static_cast<std::size_t>(spec.query_count) *
                                     spec.magnitudes.size() * spec.engines.size());
    parallel_for(spec.query_count, nthreads, [&](std::size_t qi) {
        const std::uint64_t qseed = Rng::mix(spec.seed, Rng::mix(0x70726f6aULL, qi));
        Rng pick_rng(qseed);
        const std::size_t target_idx = pick_rng.uniform_below(m);
        DenseVector target_unit = data.row_vector(target_idx);
        normalize_in_place(target_unit);
        for (std::size_t mi = 0; mi < spec.magnitudes.size(); ++mi) {
            const int h = spec.magnitudes[mi];
            Rng perturb_rng(Rng::mix(qseed, Rng::mix(0x70657274ULL, h)));
            const double target_cos = hamming_to_cosine(h, R);
            const DenseVector q0 =
                h == 0 ? target_unit : perturb_continuous(target_unit, target_cos, perturb_rng);
            for (std::size_t ei = 0; ei < spec.engines.size(); ++ei) {
                Rng run_rng(Rng::mix(qseed, Rng::mix(0x71726e67ULL, mi * 97 + ei)));
                DenseVector q = q0;
                TrialResult tr;
                tr.engine = spec.engines[ei];
                tr.d = model.d;
                tr.magnitude = h;
                tr.baseline = target_cos;
                tr.initial_cosine = dot(q0, target_unit);
                tr.seed = qseed;
                for (int step = 0; step < spec.max_steps; ++step) {
                    // project current query, score against latent addresses
                    std::vector<double> u(L);
                    double unrm = 0.0;
                    for (int l = 0; l < L; ++l) {
                        double sum = 0.0;
                        const double* wrow =
                            model.weights.data() + static_cast<std::size_t>(l) * R;
                        for (int rr = 0; rr < R; ++rr) sum += wrow[rr] * q[rr];
                        u[l] = sum;
                        unrm += sum * sum;
                    }
                    unrm = std::sqrt(unrm);
                    std::vector<double> raw(m);
                    for (std::size_t i = 0; i < m; ++i) {
                        double c = 0.0;
                        for (int l = 0; l < L; ++l) c += (u[l] / unrm) * P[i * L + l];
                        raw[i] = kernels[ei].raw_weight_cosine(std::min(1.0, std::max(-1.0, c)));
                    }
                    KernelWeights kw =
                        detail::normalize_raw(std::move(raw), kernels[ei], &run_rng);
                    ++tr.steps;
                    if (kw.no_intersection) {
                        tr.no_intersection = true;
                        break;  // continuous reset: query unchanged
                    }
                    DenseVector next(R, 0.0);
                    for (std::size_t i = 0; i < m; ++i) {
                        if (kw.weights[i] == 0.0) continue;
                        const double* x = data.row(i);
                        for (int rr = 0; rr < R; ++rr) next[rr] += kw.weights[i] * x[rr];
                    }
                    normalize_in_place(next);
                    const double move_cos = dot(next, q);
                    q = std::move(next);
                    if (move_cos >= 1.0 - 1e-9) break;
                }
                tr.final_cosine = dot(q, target_unit);
                results[(qi * spec.magnitudes.size() + mi) * spec.engines.size() + ei] = tr;
            }
        }
    });
    return results;
}

}  // namespace sdm
