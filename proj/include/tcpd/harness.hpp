#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "tcpd/detector.hpp"
#include "tcpd/simgen.hpp"

namespace tcpd {

/// Number of true change points matched by some estimate within
/// floor(sqrt(n)/2) samples. Matching is greedy nearest with one-to-one use
/// of estimates; distance ties go to the leftmost truth, then the leftmost
/// estimate.
inline int cp_correct(const std::vector<long long>& estimates, const std::vector<long long>& truth,
                      long long n) {
    if (truth.empty()) throw std::invalid_argument("cp_correct: truth must be nonempty");
    const long long tol = static_cast<long long>(std::floor(std::sqrt(static_cast<double>(n)) / 2.0));
    struct Pair {
        long long dist, z, e;
        std::size_t ti, ei;
    };
    std::vector<Pair> pairs;
    for (std::size_t ti = 0; ti < truth.size(); ++ti)
        for (std::size_t ei = 0; ei < estimates.size(); ++ei) {
            const long long d = std::llabs(estimates[ei] - truth[ti]);
            if (d <= tol) pairs.push_back({d, truth[ti], estimates[ei], ti, ei});
        }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        return std::tie(a.dist, a.z, a.e) < std::tie(b.dist, b.z, b.e);
    });
    std::vector<bool> t_used(truth.size(), false), e_used(estimates.size(), false);
    int correct = 0;
    for (const Pair& pr : pairs) {
        if (t_used[pr.ti] || e_used[pr.ei]) continue;
        t_used[pr.ti] = true;
        e_used[pr.ei] = true;
        ++correct;
    }
    return correct;
}

/// Fraction of replications in which at least four (or K, when K < 4) true
/// change points were correctly estimated.
inline double cp_metric(const std::vector<int>& correct_counts, long long K) {
    if (correct_counts.empty()) return std::nan("");
    const long long need = std::min<long long>(4, K);
    long long hits = 0;
    for (int c : correct_counts)
        if (c >= need) ++hits;
    return static_cast<double>(hits) / static_cast<double>(correct_counts.size());
}

struct RepRecord {
    long long index = 0;
    std::uint64_t seed = 0;
    long long k_hat = 0;
    std::vector<long long> locations;
    int correct = 0;
    double seconds = 0.0;  // excluded from the deterministic report content
    bool failed = false;
    std::string error;
};

/// Aggregated replication metrics in the style of the benchmark tables.
struct RunReport {
    long long reps = 0;
    long long K = 0;
    std::vector<long long> truth;
    double mean_khat = 0.0;
    double mse = 0.0;  // mean (K_hat - K)^2
    double cp = 0.0;
    std::array<long long, 7> hist{};  // K_hat - K in {<=-3, -2, -1, 0, 1, 2, >=3}
    long long failures = 0;
    std::vector<RepRecord> per_rep;
    std::string label;

    /// MSE recomputed from the histogram; exact when |K_hat - K| <= 2 always
    /// (the outer bins are clipped).
    double mse_from_histogram() const {
        double acc = 0.0;
        long long cnt = 0;
        for (int b = 0; b < 7; ++b) {
            const long long d = b - 3;
            acc += static_cast<double>(hist[static_cast<std::size_t>(b)]) * static_cast<double>(d * d);
            cnt += hist[static_cast<std::size_t>(b)];
        }
        return cnt == 0 ? 0.0 : acc / static_cast<double>(cnt);
    }
};

/// Run `reps` seeded replications of (generate -> detect -> score). Per-rep
/// seeds are split off spec.seed, so the report's deterministic content is
/// byte-identical for every worker count. Failures are recorded, not fatal.
inline RunReport run_experiment(const SimSpec& spec, const DetectorConfig& config, long long reps,
                                int threads = 1) {
    if (reps < 1) throw std::invalid_argument("run_experiment: reps must be >= 1");
    RunReport report;
    report.reps = reps;
    report.K = spec.K();
    report.truth = spec.changepoints;
    report.label = spec.label;
    report.per_rep.resize(static_cast<std::size_t>(reps));

    std::atomic<long long> next{0};
    auto worker = [&] {
        for (;;) {
            const long long r = next.fetch_add(1);
            if (r >= reps) return;
            RepRecord& rec = report.per_rep[static_cast<std::size_t>(r)];
            rec.index = r;
            rec.seed = stream_seed(spec.seed, static_cast<std::uint64_t>(r));
            const auto t0 = std::chrono::steady_clock::now();
            try {
                SimSpec rep_spec = spec;
                rep_spec.seed = rec.seed;
                const TensorSeq data = gen_custom(rep_spec);
                const Detection det = detect(data, config);
                rec.k_hat = det.k_hat;
                rec.locations = det.locations;
                rec.correct = spec.changepoints.empty() ? 0
                                                        : cp_correct(det.locations, spec.changepoints, spec.n);
            } catch (const std::exception& e) {
                rec.failed = true;
                rec.error = e.what();
            }
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // deterministic merge in replication order
    double sum_k = 0.0, sum_sq = 0.0;
    std::vector<int> corrects;
    long long ok = 0;
    for (const RepRecord& rec : report.per_rep) {
        if (rec.failed) {
            ++report.failures;
            continue;
        }
        ++ok;
        const long long d = rec.k_hat - report.K;
        sum_k += static_cast<double>(rec.k_hat);
        sum_sq += static_cast<double>(d * d);
        report.hist[static_cast<std::size_t>(std::clamp(d, -3LL, 3LL) + 3)]++;
        corrects.push_back(rec.correct);
    }
    if (ok > 0) {
        report.mean_khat = sum_k / static_cast<double>(ok);
        report.mse = sum_sq / static_cast<double>(ok);
    }
    report.cp = report.K > 0 ? cp_metric(corrects, report.K) : std::nan("");
    if (ok > 0) {
        const double bias = report.mean_khat - static_cast<double>(report.K);
        if (report.mse < bias * bias - 1e-12)
            throw std::logic_error("run_experiment: variance decomposition violated");
    }
    return report;
}

}  // namespace tcpd
