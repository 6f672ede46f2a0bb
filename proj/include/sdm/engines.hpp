#pragma once

#include <bit>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sdm/bitvector.hpp"
#include "sdm/densevector.hpp"
#include "sdm/patterns.hpp"
#include "sdm/rng.hpp"
#include "sdm/weighting.hpp"

namespace sdm {

enum class EngineKind {
    BinarySdm,
    BinarySdmLimitedNeurons,
    BinaryNeuronSdm,
    BinarySdmBinaryFitAttention,
    ContinuousBinarySdm,
    ContinuousSdm,
    ContinuousSdmBinaryFitAttention,
    ContinuousSdmContinuousFitAttention,
};

inline bool engine_is_binary_space(EngineKind k) {
    switch (k) {
        case EngineKind::BinarySdm:
        case EngineKind::BinarySdmLimitedNeurons:
        case EngineKind::BinaryNeuronSdm:
        case EngineKind::BinarySdmBinaryFitAttention:
            return true;
        default:
            return false;
    }
}

inline const char* engine_name(EngineKind k) {
    switch (k) {
        case EngineKind::BinarySdm: return "binary_sdm";
        case EngineKind::BinarySdmLimitedNeurons: return "binary_sdm_limited_neurons";
        case EngineKind::BinaryNeuronSdm: return "binary_neuron_sdm";
        case EngineKind::BinarySdmBinaryFitAttention: return "binary_sdm_binary_fit_attention";
        case EngineKind::ContinuousBinarySdm: return "continuous_binary_sdm";
        case EngineKind::ContinuousSdm: return "continuous_sdm";
        case EngineKind::ContinuousSdmBinaryFitAttention:
            return "continuous_sdm_binary_fit_attention";
        case EngineKind::ContinuousSdmContinuousFitAttention:
            return "continuous_sdm_continuous_fit_attention";
    }
    return "unknown";
}

inline EngineKind engine_kind_from_name(const std::string& s) {
    for (EngineKind k :
         {EngineKind::BinarySdm, EngineKind::BinarySdmLimitedNeurons,
          EngineKind::BinaryNeuronSdm, EngineKind::BinarySdmBinaryFitAttention,
          EngineKind::ContinuousBinarySdm, EngineKind::ContinuousSdm,
          EngineKind::ContinuousSdmBinaryFitAttention,
          EngineKind::ContinuousSdmContinuousFitAttention}) {
        if (s == engine_name(k)) return k;
    }
    throw std::invalid_argument("unknown engine kind: " + s);
}

// Flat storage for many equal-length bit vectors; the scan loops touch this
// rather than vector-of-BitVector.
class PackedBits {
public:
    PackedBits() = default;
    PackedBits(const std::vector<BitVector>& rows) {
        if (rows.empty()) return;
        stride_ = rows[0].words().size();
        count_ = rows.size();
        words_.reserve(stride_ * count_);
        for (const auto& r : rows)
            words_.insert(words_.end(), r.words().begin(), r.words().end());
    }
    std::size_t count() const { return count_; }
    std::size_t stride() const { return stride_; }
    const std::uint64_t* row(std::size_t i) const { return words_.data() + i * stride_; }

    int distance_to(std::size_t i, const BitVector& q) const {
        const std::uint64_t* a = row(i);
        const auto& b = q.words();
        int d = 0;
        for (std::size_t w = 0; w < stride_; ++w) d += std::popcount(a[w] ^ b[w]);
        return d;
    }

private:
    std::size_t stride_ = 0;
    std::size_t count_ = 0;
    std::vector<std::uint64_t> words_;
};

// r simulated neurons: packed addresses plus bipolar superposition counters.
// After writing pattern store P, values row tau holds the elementwise sum of
// bipolar(p_p) over all patterns within d_write of the neuron's address.
class NeuronStore {
public:
    NeuronStore() = default;

    NeuronStore(int n, std::size_t r, int d_write, Rng& rng)
        : n_(n), d_write_(d_write), values_(r * static_cast<std::size_t>(n), 0) {
        std::vector<BitVector> addrs;
        addrs.reserve(r);
        for (std::size_t i = 0; i < r; ++i) addrs.push_back(BitVector::random(n, rng));
        addresses_ = PackedBits(addrs);
    }

    void write(const BitPatterns& patterns) {
        for (std::size_t mu = 0; mu < patterns.count(); ++mu) {
            const BitVector& addr = patterns.addresses[mu];
            const BitVector& ptr = patterns.pointers[mu];
            for (std::size_t tau = 0; tau < addresses_.count(); ++tau) {
                if (addresses_.distance_to(tau, addr) > d_write_) continue;
                std::int32_t* row = values_.data() + tau * n_;
                for (int j = 0; j < n_; ++j) row[j] += ptr.get(j) ? 1 : -1;
            }
        }
    }

    std::size_t count() const { return addresses_.count(); }
    int dimension() const { return n_; }
    int d_write() const { return d_write_; }
    const PackedBits& addresses() const { return addresses_; }
    const std::int32_t* values_row(std::size_t tau) const { return values_.data() + tau * n_; }

    // Sum of value vectors over neurons within d_read of the query.
    // activated reports how many neurons fired; stored reports whether any of
    // them held a nonzero superposition.
    std::vector<std::int64_t> read_sum(const BitVector& query, int d_read,
                                       std::size_t* activated, bool* stored) const {
        std::vector<std::int64_t> sum(n_, 0);
        std::size_t act = 0;
        bool any = false;
        for (std::size_t tau = 0; tau < addresses_.count(); ++tau) {
            if (addresses_.distance_to(tau, query) > d_read) continue;
            ++act;
            const std::int32_t* row = values_row(tau);
            for (int j = 0; j < n_; ++j) {
                sum[j] += row[j];
                any = any || row[j] != 0;
            }
        }
        if (activated) *activated = act;
        if (stored) *stored = any;
        return sum;
    }

private:
    int n_ = 0;
    int d_write_ = 0;
    PackedBits addresses_;
    std::vector<std::int32_t> values_;
};

using QueryState = std::variant<BitVector, DenseVector>;

struct UpdateOutcome {
    QueryState state;
    bool no_intersection = false;
};

struct ConvergenceTrace {
    std::vector<QueryState> iterates;  // filled when recording is requested
    bool converged = false;
    bool no_intersection = false;
    int steps = 0;
    QueryState final_state;
    double final_distance_to_target = 0.0;  // filled by the harness
};

struct EngineConfig {
    EngineKind kind = EngineKind::BinarySdm;
    int n = 0;
    int d = 0;
    // Neuron count: explicit population for BinaryNeuronSdm, quantization
    // budget for limited-neuron kernels, ignored (may be infinite) otherwise.
    double r = kUnlimitedNeurons;
    std::uint64_t build_seed = 0;
};

class Engine {
public:
    EngineKind kind() const { return config_.kind; }
    int dimension() const { return config_.n; }
    int radius() const { return config_.d; }
    bool binary_space() const { return engine_is_binary_space(config_.kind); }
    const EngineConfig& config() const { return config_; }
    const WeightKernel& kernel() const { return *kernel_; }
    const NeuronStore& neurons() const { return *neurons_; }
    const BitPatterns& bit_patterns() const { return *bit_patterns_; }
    const DensePatterns& dense_patterns() const { return *dense_patterns_; }

    // True when the update map is a deterministic function of the query
    // (no per-read stochastic quantization).
    bool deterministic_update() const {
        return !kernel_ || kernel_->quantization_vacuous() ||
               kernel_->kind() == KernelKind::Softmax;
    }

    UpdateOutcome update_query(const QueryState& q, Rng& rng) const {
        if (binary_space()) return update_binary(std::get<BitVector>(q), rng);
        return update_dense(std::get<DenseVector>(q), rng);
    }

    UpdateOutcome update_binary(const BitVector& query, Rng& rng) const {
        if (query.size() != config_.n)
            throw std::invalid_argument("update_query: dimension mismatch");
        if (config_.kind == EngineKind::BinaryNeuronSdm) {
            std::size_t activated = 0;
            bool stored = false;
            const auto sum = neurons_->read_sum(query, config_.d, &activated, &stored);
            UpdateOutcome out;
            out.no_intersection = (activated == 0) || !stored;
            BitVector v(config_.n);
            // bipolar counters threshold at 0; ties fall to the else branch
            for (int j = 0; j < config_.n; ++j)
                if (sum[j] > 0) v.set(j, true);
            out.state = std::move(v);
            return out;
        }
        const std::size_t m = packed_addresses_.count();
        std::vector<double> raw(m);
        for (std::size_t i = 0; i < m; ++i)
            raw[i] = kernel_->raw_weight_hamming(packed_addresses_.distance_to(i, query));
        KernelWeights kw = detail::normalize_raw(std::move(raw), *kernel_, &rng);
        UpdateOutcome out;
        if (kw.no_intersection) {
            out.no_intersection = true;
            out.state = BitVector::zeros(config_.n);
            return out;
        }
        std::vector<double> e(config_.n, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double w = kw.weights[i];
            if (w == 0.0) continue;
            const std::uint64_t* words = packed_pointers_.row(i);
            for (std::size_t wd = 0; wd < packed_pointers_.stride(); ++wd) {
                std::uint64_t bits = words[wd];
                while (bits) {
                    const int b = std::countr_zero(bits);
                    e[wd * 64 + b] += w;
                    bits &= bits - 1;
                }
            }
        }
        BitVector v(config_.n);
        for (int j = 0; j < config_.n; ++j)
            if (e[j] > 0.5) v.set(j, true);
        out.state = std::move(v);
        return out;
    }

    UpdateOutcome update_dense(const DenseVector& query, Rng& rng) const {
        if (static_cast<int>(query.size()) != config_.n)
            throw std::invalid_argument("update_query: dimension mismatch");
        const std::size_t m = dense_patterns_->count();
        std::vector<double> raw(m);
        for (std::size_t i = 0; i < m; ++i) {
            double c = 0.0;
            const double* row = dense_addr_flat_.data() + i * config_.n;
            for (int j = 0; j < config_.n; ++j) c += row[j] * query[j];
            raw[i] = kernel_->raw_weight_cosine(std::min(1.0, std::max(-1.0, c)));
        }
        KernelWeights kw = detail::normalize_raw(std::move(raw), *kernel_, &rng);
        UpdateOutcome out;
        if (kw.no_intersection) {
            // reset to the pre-update query
            out.no_intersection = true;
            out.state = query;
            return out;
        }
        const std::size_t out_dim = dense_patterns_->pointers[0].size();
        DenseVector v(out_dim, 0.0);
        std::vector<KahanSum> acc(out_dim);
        for (std::size_t i = 0; i < m; ++i) {
            const double w = kw.weights[i];
            if (w == 0.0) continue;
            const DenseVector& p = dense_patterns_->pointers[i];
            for (std::size_t j = 0; j < out_dim; ++j) acc[j].add(w * p[j]);
        }
        for (std::size_t j = 0; j < out_dim; ++j) v[j] = acc[j].value();
        if (dense_patterns_->mode == AssocMode::Auto) {
            const double nn = norm(v);
            if (nn > 0.0)
                for (auto& x : v) x /= nn;
        }
        out.state = std::move(v);
        return out;
    }

    // Iterates the update until a fixed point (binary: identical successive
    // iterates; continuous: successive cosine >= 1 - 1e-9), a halt on the
    // binary no-intersection collapse, or the iteration cap. When the update
    // map is deterministic a detected 2-cycle is fast-forwarded to the state
    // the loop would hold at the cap, preserving exact cap semantics.
    ConvergenceTrace converge(const QueryState& start, Rng& rng, int max_iters = 100,
                              bool record_iterates = false) const {
        if (max_iters < 1) throw std::invalid_argument("converge: max_iters >= 1");
        ConvergenceTrace trace;
        QueryState cur = start;
        std::optional<QueryState> prev_prev;
        if (record_iterates) trace.iterates.push_back(cur);
        const bool ff_ok = deterministic_update();
        while (trace.steps < max_iters) {
            UpdateOutcome step = update_query(cur, rng);
            ++trace.steps;
            if (record_iterates) trace.iterates.push_back(step.state);
            if (step.no_intersection) {
                // binary: collapse to the all-zero vector; continuous: reset
                // to the pre-update query. Either way iterating further
                // changes nothing useful, so halt and mark the trace.
                trace.no_intersection = true;
                cur = std::move(step.state);
                break;
            }
            const bool fixed = binary_space()
                                   ? std::get<BitVector>(step.state) == std::get<BitVector>(cur)
                                   : cosine(std::get<DenseVector>(step.state),
                                            std::get<DenseVector>(cur)) >= 1.0 - 1e-9;
            if (fixed) {
                trace.converged = true;
                cur = std::move(step.state);
                break;
            }
            if (ff_ok && !record_iterates && binary_space() && prev_prev &&
                std::get<BitVector>(step.state) == std::get<BitVector>(*prev_prev)) {
                // 2-cycle between step.state and cur; the loop would just
                // alternate until the cap, landing on step.state when the
                // remaining count is even and on cur when odd
                const int remaining = max_iters - trace.steps;
                if (remaining % 2 == 0) cur = std::move(step.state);
                trace.steps = max_iters;
                break;
            }
            prev_prev = std::move(cur);
            cur = std::move(step.state);
        }
        trace.final_state = cur;
        return trace;
    }

private:
    friend Engine build_engine(const EngineConfig& cfg,
                               std::shared_ptr<const BitPatterns> bits,
                               std::shared_ptr<const DensePatterns> dense);

    EngineConfig config_;
    std::shared_ptr<const BitPatterns> bit_patterns_;
    std::shared_ptr<const DensePatterns> dense_patterns_;
    PackedBits packed_addresses_;
    PackedBits packed_pointers_;
    std::vector<double> dense_addr_flat_;
    std::shared_ptr<const WeightKernel> kernel_;
    std::shared_ptr<const NeuronStore> neurons_;
};

// Builds an engine of the given kind over the pattern store matching its
// space (binary kinds take bits, continuous kinds take dense). For
// BinaryNeuronSdm the build samples r random neuron addresses and performs
// the distributed write; all other kinds precompute their weight kernel and,
// where required, the fitted beta.
inline Engine build_engine(const EngineConfig& cfg, std::shared_ptr<const BitPatterns> bits,
                           std::shared_ptr<const DensePatterns> dense) {
    Engine e;
    e.config_ = cfg;
    const int n = cfg.n;
    const int d = cfg.d;
    if (engine_is_binary_space(cfg.kind)) {
        if (!bits || bits->count() == 0)
            throw std::invalid_argument("build_engine: binary kind needs bit patterns");
        e.bit_patterns_ = std::move(bits);
        e.packed_addresses_ = PackedBits(e.bit_patterns_->addresses);
        e.packed_pointers_ = PackedBits(e.bit_patterns_->pointers);
    } else {
        if (!dense || dense->count() == 0)
            throw std::invalid_argument("build_engine: continuous kind needs dense patterns");
        e.dense_patterns_ = std::move(dense);
        e.dense_addr_flat_.reserve(e.dense_patterns_->count() * n);
        for (const auto& a : e.dense_patterns_->addresses)
            e.dense_addr_flat_.insert(e.dense_addr_flat_.end(), a.begin(), a.end());
    }
    switch (cfg.kind) {
        case EngineKind::BinarySdm:
            e.kernel_ = std::make_shared<WeightKernel>(WeightKernel::binary_intersection(n, d));
            break;
        case EngineKind::BinarySdmLimitedNeurons:
            if (!std::isfinite(cfg.r))
                throw std::invalid_argument("build_engine: limited kind needs finite r");
            e.kernel_ = std::make_shared<WeightKernel>(
                WeightKernel::binary_intersection(n, d, cfg.r));
            break;
        case EngineKind::BinaryNeuronSdm: {
            if (!std::isfinite(cfg.r) || cfg.r < 1.0)
                throw std::invalid_argument("build_engine: neuron kind needs finite r >= 1");
            const double bytes = cfg.r * (n / 8.0 + 4.0 * n);
            if (bytes > 4.0e9)
                throw std::length_error("build_engine: neuron store would exceed 4 GB");
            Rng rng(cfg.build_seed);
            auto store = std::make_shared<NeuronStore>(
                n, static_cast<std::size_t>(cfg.r), d, rng);
            store->write(*e.bit_patterns_);
            e.neurons_ = std::move(store);
            break;
        }
        case EngineKind::BinarySdmBinaryFitAttention:
            e.kernel_ = std::make_shared<WeightKernel>(
                WeightKernel::fitted_softmax(fit_beta(d, n, IntersectSource::Binary)));
            break;
        case EngineKind::ContinuousBinarySdm:
            e.kernel_ = std::make_shared<WeightKernel>(
                WeightKernel::binary_intersection(n, d, cfg.r));
            break;
        case EngineKind::ContinuousSdm:
            e.kernel_ = std::make_shared<WeightKernel>(
                WeightKernel::continuous_intersection(n, d, cfg.r));
            break;
        case EngineKind::ContinuousSdmBinaryFitAttention:
            e.kernel_ = std::make_shared<WeightKernel>(
                WeightKernel::fitted_softmax(fit_beta(d, n, IntersectSource::Binary)));
            break;
        case EngineKind::ContinuousSdmContinuousFitAttention:
            e.kernel_ = std::make_shared<WeightKernel>(
                WeightKernel::fitted_softmax(fit_beta(d, n, IntersectSource::Continuous)));
            break;
    }
    return e;
}

inline Engine build_engine(const EngineConfig& cfg, const BitPatterns& bits) {
    return build_engine(cfg, std::make_shared<const BitPatterns>(bits), nullptr);
}

inline Engine build_engine(const EngineConfig& cfg, const DensePatterns& dense) {
    return build_engine(cfg, nullptr, std::make_shared<const DensePatterns>(dense));
}

}  // namespace sdm
