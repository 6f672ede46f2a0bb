#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sdm/engines.hpp"
#include "sdm/harness/config.hpp"
#include "sdm/harness/dataset.hpp"
#include "sdm/parallel.hpp"

namespace sdm {

enum class DatasetSource { RandomUniform, IdxFile, RawGrayscale };

struct ExperimentSpec {
    std::vector<EngineKind> engines;
    int n = 64;
    double r = kUnlimitedNeurons;
    int m = 1024;
    std::vector<int> d_list;
    std::vector<int> magnitudes;
    DatasetSource source = DatasetSource::RandomUniform;
    std::string dataset_path;
    int height = 0, width = 0, channels = 1;
    int dataset_replicates = 3;
    int perturb_replicates = 5;
    std::uint64_t base_seed = 0;
    int max_iters = 100;
    // random data keeps the perturbed query closest to its target; image
    // data does not re-check
    bool guard_target_closest = true;
    int threads = 0;  // 0: default_thread_count()

    std::string canonical() const {
        std::string s = "n=" + std::to_string(n) + ";r=" + format_double(r) +
                        ";m=" + std::to_string(m) + ";engines=";
        for (auto k : engines) s += std::string(engine_name(k)) + ",";
        s += ";d=";
        for (int d : d_list) s += std::to_string(d) + ",";
        s += ";mag=";
        for (int k : magnitudes) s += std::to_string(k) + ",";
        s += ";source=" + std::to_string(static_cast<int>(source)) +
             ";path=" + dataset_path + ";reps=" + std::to_string(dataset_replicates) + "x" +
             std::to_string(perturb_replicates) + ";seed=" + std::to_string(base_seed) +
             ";iters=" + std::to_string(max_iters) +
             ";guard=" + std::to_string(guard_target_closest);
        return s;
    }

    static std::string format_double(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }
};

struct TrialResult {
    EngineKind engine;
    int d = 0;
    int magnitude = 0;
    double initial_cosine = 0.0;
    double final_cosine = 0.0;
    double baseline = 0.0;
    int steps = 0;
    bool no_intersection = false;
    std::uint64_t seed = 0;
};

struct AggregateRow {
    std::string engine;
    int d = 0;
    int magnitude = 0;
    double mean_final_cosine = 0.0;
    double std_final_cosine = 0.0;
    double baseline = 0.0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
};

namespace detail {

// Seed salts for the independent streams hanging off one trial seed.
constexpr std::uint64_t kSaltBinaryPerturb = 0x62696e70ULL;
constexpr std::uint64_t kSaltDensePerturb = 0x64656e70ULL;
constexpr std::uint64_t kSaltEngineRun = 0x656e6772ULL;

inline std::uint64_t trial_seed(std::uint64_t base, int dataset_rep, int perturb_rep,
                                std::size_t pattern, int magnitude) {
    std::uint64_t h = Rng::mix(base, 0x74726961ULL);
    h = Rng::mix(h, static_cast<std::uint64_t>(dataset_rep));
    h = Rng::mix(h, static_cast<std::uint64_t>(perturb_rep));
    h = Rng::mix(h, static_cast<std::uint64_t>(pattern));
    h = Rng::mix(h, static_cast<std::uint64_t>(magnitude));
    return h;
}

// Perturb with the closest-target guard: resample until no other pattern is
// at least as close to the query as the target. Gives up after 64 draws and
// keeps the last sample (magnitudes near the packing limit).
inline BitVector guarded_perturb(const BitVector& target, std::size_t target_idx, int k,
                                 const PackedBits& addresses, bool guard, Rng& rng) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        BitVector q = perturb_binary(target, k, rng);
        if (!guard || k == 0) return q;
        bool ok = true;
        for (std::size_t i = 0; i < addresses.count() && ok; ++i) {
            if (i == target_idx) continue;
            if (addresses.distance_to(i, q) <= k) ok = false;
        }
        if (ok) return q;
    }
    return perturb_binary(target, k, rng);
}

inline DenseVector guarded_perturb(const DenseVector& target, std::size_t target_idx,
                                   double target_cos, const std::vector<DenseVector>& addrs,
                                   bool guard, Rng& rng) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        DenseVector q = perturb_continuous(target, target_cos, rng);
        if (!guard || target_cos >= 1.0) return q;
        bool ok = true;
        for (std::size_t i = 0; i < addrs.size() && ok; ++i) {
            if (i == target_idx) continue;
            if (dot(q, addrs[i]) >= target_cos) ok = false;
        }
        if (ok) return q;
    }
    return perturb_continuous(target, target_cos, rng);
}

}  // namespace detail

// Loads or generates the patterns for one dataset replicate.
inline Dataset make_replicate_dataset(const ExperimentSpec& spec, int dataset_rep) {
    switch (spec.source) {
        case DatasetSource::RandomUniform: {
            Rng rng(Rng::mix(spec.base_seed, Rng::mix(0x64617461ULL, dataset_rep)));
            return random_uniform_dataset(spec.m, spec.n, rng);
        }
        case DatasetSource::IdxFile: {
            Dataset full = load_idx(spec.dataset_path);
            if (static_cast<int>(full.dim) != spec.n)
                throw std::invalid_argument("experiment: dataset dim != n");
            if (static_cast<int>(full.count) > spec.m) {
                full.values.resize(static_cast<std::size_t>(spec.m) * full.dim);
                full.count = spec.m;
            }
            return full;
        }
        case DatasetSource::RawGrayscale: {
            Dataset full =
                load_raw_grayscale(spec.dataset_path, spec.height, spec.width, spec.channels);
            if (static_cast<int>(full.dim) != spec.n)
                throw std::invalid_argument("experiment: dataset dim != n");
            if (static_cast<int>(full.count) > spec.m) {
                full.values.resize(static_cast<std::size_t>(spec.m) * full.dim);
                full.count = spec.m;
            }
            return full;
        }
    }
    throw std::logic_error("unreachable");
}

// Runs the full convergence grid. Every (dataset replicate, perturbation
// replicate, pattern, magnitude, engine, d) cell is evaluated exactly once;
// per-trial seeds are structured hashes so all engines and radii see the
// same perturbed queries, and results land in preallocated slots so output
// is identical for any worker count.
inline std::vector<TrialResult> run_convergence_experiment(const ExperimentSpec& spec) {
    const int threads = spec.threads > 0 ? spec.threads : default_thread_count();
    const std::size_t per_d_trials = static_cast<std::size_t>(spec.dataset_replicates) *
                                     spec.perturb_replicates * spec.m *
                                     spec.magnitudes.size();
    std::vector<TrialResult> results(per_d_trials * spec.d_list.size() *
                                     spec.engines.size());

    // flat result layout: [drep][d][prep][pattern][magnitude][engine]
    const std::size_t stride_engine = 1;
    const std::size_t stride_mag = spec.engines.size() * stride_engine;
    const std::size_t stride_pattern = spec.magnitudes.size() * stride_mag;
    const std::size_t stride_prep = static_cast<std::size_t>(spec.m) * stride_pattern;
    const std::size_t stride_d = static_cast<std::size_t>(spec.perturb_replicates) * stride_prep;
    const std::size_t stride_drep = spec.d_list.size() * stride_d;

    const bool any_binary = std::any_of(spec.engines.begin(), spec.engines.end(),
                                        engine_is_binary_space);
    const bool any_dense =
        !std::all_of(spec.engines.begin(), spec.engines.end(), engine_is_binary_space);

    for (int drep = 0; drep < spec.dataset_replicates; ++drep) {
        const Dataset data = make_replicate_dataset(spec, drep);
        std::shared_ptr<const BitPatterns> bits;
        std::shared_ptr<const DensePatterns> dense;
        if (any_binary)
            bits = std::make_shared<const BitPatterns>(binarize_dataset(data));
        if (any_dense)
            dense = std::make_shared<const DensePatterns>(normalize_dataset(data));
        PackedBits packed_bits;
        if (bits) packed_bits = PackedBits(bits->addresses);

        for (std::size_t di = 0; di < spec.d_list.size(); ++di) {
            const int d = spec.d_list[di];
            std::vector<Engine> engines;
            engines.reserve(spec.engines.size());
            for (std::size_t ei = 0; ei < spec.engines.size(); ++ei) {
                EngineConfig cfg;
                cfg.kind = spec.engines[ei];
                cfg.n = spec.n;
                cfg.d = d;
                cfg.r = spec.r;
                cfg.build_seed =
                    Rng::mix(spec.base_seed, Rng::mix(0x6e65757258ULL + ei, drep * 64 + d));
                engines.push_back(build_engine(cfg, bits, dense));
            }

            const std::size_t cells = static_cast<std::size_t>(spec.perturb_replicates) *
                                      spec.m * spec.magnitudes.size();
            parallel_for(cells, threads, [&](std::size_t cell) {
                const std::size_t prep = cell / (spec.m * spec.magnitudes.size());
                const std::size_t rem = cell % (spec.m * spec.magnitudes.size());
                const std::size_t pattern = rem / spec.magnitudes.size();
                const std::size_t mi = rem % spec.magnitudes.size();
                const int magnitude = spec.magnitudes[mi];
                const std::uint64_t seed = detail::trial_seed(
                    spec.base_seed, drep, static_cast<int>(prep), pattern, magnitude);

                // shared perturbed queries for this trial
                BitVector bin_query;
                DenseVector dense_query;
                double dense_initial = 1.0;
                if (bits) {
                    Rng prng(Rng::mix(seed, detail::kSaltBinaryPerturb));
                    bin_query = detail::guarded_perturb(bits->addresses[pattern], pattern,
                                                        magnitude, packed_bits,
                                                        spec.guard_target_closest, prng);
                }
                if (dense) {
                    Rng prng(Rng::mix(seed, detail::kSaltDensePerturb));
                    const double target_cos = hamming_to_cosine(magnitude, spec.n);
                    dense_query = detail::guarded_perturb(dense->addresses[pattern], pattern,
                                                          target_cos, dense->addresses,
                                                          spec.guard_target_closest, prng);
                    dense_initial = dot(dense_query, dense->addresses[pattern]);
                }

                for (std::size_t ei = 0; ei < spec.engines.size(); ++ei) {
                    const Engine& eng = engines[ei];
                    TrialResult tr;
                    tr.engine = spec.engines[ei];
                    tr.d = d;
                    tr.magnitude = magnitude;
                    tr.baseline = hamming_to_cosine(magnitude, spec.n);
                    tr.seed = seed;
                    Rng run_rng(Rng::mix(seed, Rng::mix(detail::kSaltEngineRun, ei)));
                    if (eng.binary_space()) {
                        const BitVector& target = bits->addresses[pattern];
                        tr.initial_cosine =
                            hamming_to_cosine(hamming_distance(bin_query, target), spec.n);
                        ConvergenceTrace t =
                            eng.converge(QueryState(bin_query), run_rng, spec.max_iters);
                        const BitVector& fin = std::get<BitVector>(t.final_state);
                        tr.final_cosine =
                            hamming_to_cosine(hamming_distance(fin, target), spec.n);
                        tr.steps = t.steps;
                        tr.no_intersection = t.no_intersection;
                    } else {
                        const DenseVector& target = dense->addresses[pattern];
                        tr.initial_cosine = dense_initial;
                        ConvergenceTrace t =
                            eng.converge(QueryState(dense_query), run_rng, spec.max_iters);
                        const DenseVector& fin = std::get<DenseVector>(t.final_state);
                        tr.final_cosine = cosine(fin, target);
                        tr.steps = t.steps;
                        tr.no_intersection = t.no_intersection;
                    }
                    results[drep * stride_drep + di * stride_d + prep * stride_prep +
                            pattern * stride_pattern + mi * stride_mag + ei] = tr;
                }
            });
        }
    }
    return results;
}

// Mean/std of the final cosine per (engine, d, magnitude), rows ordered by
// the spec's engine order, then d, then magnitude. Reduction is sequential
// over the gathered array, so it is byte-stable across worker counts.
inline std::vector<AggregateRow> aggregate_results(const ExperimentSpec& spec,
                                                   const std::vector<TrialResult>& trials) {
    struct Acc {
        double sum = 0.0, sumsq = 0.0, baseline = 0.0;
        std::size_t count = 0;
    };
    std::map<std::tuple<std::size_t, int, int>, Acc> cells;
    std::map<EngineKind, std::size_t> engine_order;
    for (std::size_t i = 0; i < spec.engines.size(); ++i) engine_order[spec.engines[i]] = i;
    for (const TrialResult& t : trials) {
        Acc& a = cells[{engine_order.at(t.engine), t.d, t.magnitude}];
        a.sum += t.final_cosine;
        a.sumsq += t.final_cosine * t.final_cosine;
        a.baseline = t.baseline;
        ++a.count;
    }
    std::vector<AggregateRow> rows;
    rows.reserve(cells.size());
    for (const auto& [key, a] : cells) {
        AggregateRow row;
        row.engine = engine_name(spec.engines[std::get<0>(key)]);
        row.d = std::get<1>(key);
        row.magnitude = std::get<2>(key);
        row.mean_final_cosine = a.sum / a.count;
        const double var =
            a.count > 1 ? std::max(0.0, (a.sumsq - a.sum * a.sum / a.count) / (a.count - 1))
                        : 0.0;
        row.std_final_cosine = std::sqrt(var);
        row.baseline = a.baseline;
        row.trials = a.count;
        row.seed = spec.base_seed;
        rows.push_back(row);
    }
    return rows;
}

inline std::string results_csv(const std::vector<AggregateRow>& rows) {
    std::string out =
        "engine,d,magnitude,mean_final_cosine,std_final_cosine,baseline,trials,seed\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.12g,%.12g,%.12g,%zu,%llu\n",
                      r.engine.c_str(), r.d, r.magnitude, r.mean_final_cosine,
                      r.std_final_cosine, r.baseline, r.trials,
                      static_cast<unsigned long long>(r.seed));
        out += buf;
    }
    return out;
}

inline void export_results(const std::vector<AggregateRow>& rows, const std::string& format,
                           const std::string& path, const std::string& spec_canonical) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("export_results: cannot open " + path);
    if (format == "csv") {
        f << results_csv(rows);
        return;
    }
    if (format != "json") throw std::invalid_argument("export_results: format csv|json");
    // mirrored JSON with a manifest
    f << "{\n  \"manifest\": {\"spec_hash\": \"" << fnv1a_hex(spec_canonical)
      << "\", \"code_version\": \"" << kCodeVersion << "\"},\n  \"rows\": [\n";
    char buf[320];
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        std::snprintf(buf, sizeof(buf),
                      "    {\"engine\": \"%s\", \"d\": %d, \"magnitude\": %d, "
                      "\"mean_final_cosine\": %.12g, \"std_final_cosine\": %.12g, "
                      "\"baseline\": %.12g, \"trials\": %zu, \"seed\": %llu}%s\n",
                      r.engine.c_str(), r.d, r.magnitude, r.mean_final_cosine,
                      r.std_final_cosine, r.baseline, r.trials,
                      static_cast<unsigned long long>(r.seed), i + 1 < rows.size() ? "," : "");
        f << buf;
    }
    f << "  ]\n}\n";
}

}  // namespace sdm
