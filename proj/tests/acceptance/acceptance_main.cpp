// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Desk-scale replication counts; every tolerance is pinned
// here in code.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "tcpd/confidence.hpp"
#include "tcpd/detector.hpp"
#include "tcpd/harness.hpp"
#include "tcpd/simgen.hpp"

using namespace tcpd;

namespace {

int g_failures = 0;
int g_threads = 4;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    if (!pass) ++g_failures;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double secs() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

const std::vector<long long> kTruth = {200, 400, 600, 800, 1000, 1200, 1400, 1600};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

// 1. dense/strong SFD, p=50, signal 0.4: mean K in [7.7, 8.4], MSE <= 0.6, CP >= 0.95
void criterion1() {
    Timer t;
    SimSpec spec = gen_dense_order1(50, 0.4, 101).second;
    const RunReport r = run_experiment(spec, DetectorConfig{}, 50, g_threads);
    const bool pass = r.mean_khat >= 7.7 && r.mean_khat <= 8.4 && r.mse <= 0.6 && r.cp >= 0.95 &&
                      r.failures == 0;
    report(1, pass,
           fmt("dense p=50 signal 0.4, 50 reps: mean K=%.3f (need [7.7,8.4]), MSE=%.3f (<=0.6), CP=%.3f "
               "(>=0.95)  [%.1fs]",
               r.mean_khat, r.mse, r.cp, t.secs()));
}

// 2. p=2000 signal 0.4 SFD: K=8 in >= 95% of 20 reps, CP = 1
void criterion2() {
    Timer t;
    SimSpec spec = gen_dense_order1(2000, 0.4, 202).second;
    const RunReport r = run_experiment(spec, DetectorConfig{}, 20, g_threads);
    const bool pass = r.hist[3] >= 19 && r.cp == 1.0 && r.failures == 0;
    report(2, pass,
           fmt("dense p=2000 signal 0.4, 20 reps: K=8 in %lld/20 (need >=19), CP=%.3f (need 1)  [%.1fs]",
               r.hist[3], r.cp, t.secs()));
}

// 3. p=2000 weak signal 0.2 SFD: CP >= 0.9 over 20 reps
void criterion3() {
    Timer t;
    SimSpec spec = gen_dense_order1(2000, 0.2, 303).second;
    const RunReport r = run_experiment(spec, DetectorConfig{}, 20, g_threads);
    const bool pass = r.cp >= 0.9 && r.failures == 0;
    report(3, pass,
           fmt("dense p=2000 signal 0.2, 20 reps: CP=%.3f (need >=0.9), mean K=%.3f  [%.1fs]", r.cp,
               r.mean_khat, t.secs()));
}

// 4. symmetric order-2 p1=p2=50, SFD: K=8 in >= 95% of 20 reps
void criterion4() {
    Timer t;
    SimSpec spec = gen_order2(50, 50, Order2Design::symmetric, true, 404).second;
    const RunReport r = run_experiment(spec, DetectorConfig{}, 20, g_threads);
    const bool pass = r.hist[3] >= 19 && r.failures == 0;
    report(4, pass,
           fmt("symmetric 50x50 (row-correlated), 20 reps: K=8 in %lld/20 (need >=19)  [%.1fs]", r.hist[3],
               t.secs()));
}

// 5. asymmetric order-2 p1=12, p2=192, MSFD: CP >= 0.8 and mean K in [7.3, 8.6] over 30 reps
void criterion5() {
    Timer t;
    SimSpec spec = gen_order2(12, 192, Order2Design::asymmetric, true, 505).second;
    DetectorConfig cfg;
    cfg.mode = DetectMode::msfd;
    const RunReport r = run_experiment(spec, cfg, 30, g_threads);
    const bool pass = r.cp >= 0.8 && r.mean_khat >= 7.3 && r.mean_khat <= 8.6 && r.failures == 0;
    report(5, pass,
           fmt("asymmetric 12x192 MSFD (row-correlated), 30 reps: CP=%.3f (>=0.8), mean K=%.3f "
               "([7.3,8.6])  [%.1fs]",
               r.cp, r.mean_khat, t.secs()));
}

// 6. null designs p in {50, 2000}: K=0 in >= 95% of 50 runs each
void criterion6() {
    Timer t;
    bool pass = true;
    std::string detail = "null";
    for (const long long p : {50LL, 2000LL}) {
        SimSpec spec = gen_dense_order1(p, 0.0, 606).second;
        spec.changepoints.clear();
        spec.seg_means = {spec.seg_means[1]};  // all-ones mean, no change
        const RunReport r = run_experiment(spec, DetectorConfig{}, 50, g_threads);
        long long zero = 0;
        for (const auto& rec : r.per_rep) zero += rec.k_hat == 0;
        pass = pass && zero >= 48 && r.failures == 0;  // ceil(0.95 * 50)
        detail += fmt(" p=%lld: K=0 in %lld/50 (need >=48);", p, zero);
    }
    report(6, pass, detail + fmt("  [%.1fs]", t.secs()));
}

// 7. population-curve oracle on noiseless inputs
void criterion7() {
    Timer t;
    const long long n = 1800, z = 600, p = 50;
    SimSpec spec;
    spec.shape = Shape({p});
    spec.n = n;
    spec.changepoints = {z};
    spec.seg_means = {std::vector<double>(static_cast<std::size_t>(p), 1.0),
                      std::vector<double>(static_cast<std::size_t>(p), 2.0)};
    spec.noise.sigma = 0.0;
    spec.seed = 1;
    const TensorSeq seq = gen_custom(spec);
    const ScreeningParams params = derive_params(n, DetectMode::sfd);
    const int a = params.alpha;
    const RatioSeries rs = ratio_series_sfd(mosum_field(seq, a), params);

    double outside_dev = 0.0;
    for (long long i = 1; i <= rs.len(); ++i)
        if (i < z - 3 * a || i > z) outside_dev = std::max(outside_dev, std::abs(rs.at(i) - 1.0));
    bool dip = false, spike = false, crosses_back = false;
    long long argmin = 1;
    double best = rs.at(1);
    for (long long i = 1; i <= rs.len(); ++i) {
        const double v = rs.at(i);
        if (v <= best) {
            best = v;
            argmin = i;
        }
        if (v < 0.8) dip = true;
    }
    for (long long i = z - 2 * a + 2; i <= z - a; ++i) {
        if (rs.at(i) > 10.0) spike = true;
        if (rs.at(i) >= 0.8) crosses_back = true;
    }
    const long long zhat = argmin + 2 * a - 1;
    const bool pass = outside_dev <= 1e-9 && dip && spike && crosses_back && std::llabs(zhat - z) <= 1;
    report(7, pass,
           fmt("noiseless curve: |T-1| outside <= %.2e (need <=1e-9), dip=%d, spike>10=%d, recross=%d, "
               "argmin+2a-1=%lld (z=600 +-1)  [%.1fs]",
               outside_dev, dip, spike, crosses_back, zhat, t.secs()));
}

// 8. oracle equivalence: sliding vs naive MOSUM; screening norm recomputation
void criterion8() {
    Timer t;
    std::mt19937_64 eng(808);
    std::normal_distribution<double> zd(0.0, 1.0);
    double worst = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const long long n = 9 + static_cast<long long>(eng() % 150);
        const long long p = 1 + static_cast<long long>(eng() % 10);
        const int alpha = 1 + static_cast<int>(eng() % static_cast<std::uint64_t>(n / 3));
        std::vector<double> data(static_cast<std::size_t>(n * p));
        for (double& v : data) v = zd(eng);
        const TensorSeq seq(Shape({p}), n, data);
        const MosumField f = mosum_field(seq, alpha);
        for (long long i = 1; i <= f.rows(); ++i) {
            const auto naive = mosum_naive(seq, alpha, i);
            const auto row = f.row(i);
            for (long long j = 0; j < p; ++j)
                worst = std::max(worst,
                                 std::abs(row[static_cast<std::size_t>(j)] - naive[static_cast<std::size_t>(j)]));
        }
    }
    bool norm_exact = true;
    for (int rep = 0; rep < 1000; ++rep) {
        std::vector<double> v(1 + eng() % 64);
        for (double& x : v) x = zd(eng);
        const double l = 0.2 * std::abs(zd(eng));
        const long long n = 10 + static_cast<long long>(eng() % 1000);
        // direct transcription of the formula, recomputed independently
        double num = 0.0;
        long long cnt = 0;
        for (double x : v)
            if (x * x > l) {
                num += x * x;
                ++cnt;
            }
        const double direct = num / (static_cast<double>(cnt) + 1.0 / static_cast<double>(n));
        if (screening_norm(v, l, n) != direct) norm_exact = false;
    }
    const bool pass = worst <= 1e-12 && norm_exact;
    report(8, pass,
           fmt("sliding vs naive max err %.2e (<=1e-12) over 200 configs; screening norm exact: %d  [%.1fs]",
               worst, norm_exact, t.secs()));
}

// 9. constructed close-spacing instances (gap 2*alpha + f, f < alpha/2):
// K found exactly, and the spacing+probe rule removes a spurious anchor on
// the constructed false-anchor geometry
void criterion9() {
    Timer t;
    int exact = 0, total = 0;
    for (const double jump : {1.0, 0.7}) {
        for (const long long f : {0LL, 6LL, 12LL, 18LL, 22LL, 24LL, 26LL, 28LL, 29LL, 30LL}) {
            const int a = 61;
            const long long n = 1800, z1 = 700, z2 = z1 + 2 * a + f;
            SimSpec spec;
            spec.shape = Shape({50});
            spec.n = n;
            spec.changepoints = {z1, z2};
            spec.seg_means = {std::vector<double>(50, 1.0), std::vector<double>(50, 1.0 + jump),
                              std::vector<double>(50, 1.0)};
            spec.noise.sigma = 0.0;
            spec.seed = 1;
            const TensorSeq seq = gen_custom(spec);
            const Detection det = detect(seq, DetectorConfig{});
            ++total;
            if (det.k_hat == 2 && std::llabs(det.locations[0] - z1) <= 2 &&
                std::llabs(det.locations[1] - z2) <= 2)
                ++exact;
        }
    }

    // deterministic false-anchor geometry: spurious crossing appears, the
    // rule prunes it (spike left of the spurious anchor, spacing <= 3a/2)
    const int a = 61;
    RatioSeries rs;
    rs.alpha = a;
    rs.n = 600 + 3 * a - 1;
    rs.params.n = rs.n;
    rs.params.alpha = a;
    rs.t.assign(600, 1.0);
    for (std::size_t i = 205; i < 235; ++i) rs.t[i] = 1.6;
    for (std::size_t i = 239; i < 260; ++i) rs.t[i] = 0.3;
    for (std::size_t i = 319; i < 340; ++i) rs.t[i] = 0.15;
    rs.ridge.assign(600, 0.01);
    rs.in_s.assign(600, 1);
    auto ivs = find_intervals(rs, 0.8);
    const bool spurious_appears = ivs.size() == 2 && ivs[0].M == 260;
    ivs = prune_sfd(std::move(ivs), rs, a);
    const bool rule_removes = spurious_appears && ivs[0].pruned && !ivs[1].pruned;

    const bool pass = exact == total && total == 20 && rule_removes;
    report(9, pass,
           fmt("close spacing 2a+f: K recovered in %d/%d noiseless instances (need all); spurious anchor "
               "appears and the spacing+probe rule removes it: %d  [%.1fs]",
               exact, total, rule_removes, t.secs()));
}

// 10. confidence intervals: coverage on the dense design and quantile health
void criterion10() {
    Timer t;
    long long covered = 0, total = 0;
    const std::pair<double, double> unit =
        brownian_argmax_quantiles(1.0, 0.95, 20000, GridSpec{}, 4242, g_threads);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        SimSpec spec = gen_dense_order1(50, 0.4, 7000 + seed).second;
        const TensorSeq seq = gen_custom(spec);
        const Detection det = detect(seq, DetectorConfig{});
        for (int k = 1; k <= det.k_hat; ++k) {
            const long long z = det.locations[static_cast<std::size_t>(k - 1)];
            long long truth = kTruth[0];
            for (long long tz : kTruth)
                if (std::llabs(tz - z) < std::llabs(truth - z)) truth = tz;
            if (std::llabs(truth - z) > 40) continue;  // spurious interval, no matching truth
            const CIResult ci =
                ci_for_changepoint(seq, det, k, 0.95, 20000, 31 + seed, g_threads, GridSpec{}, &unit);
            if (!ci.available) continue;
            ++total;
            if (ci.lower <= truth && truth <= ci.upper) ++covered;
        }
    }
    const double coverage = static_cast<double>(covered) / static_cast<double>(total);

    const GridSpec grid;
    const auto [lo1, hi1] = brownian_argmax_quantiles(1.0, 0.95, 100000, grid, 99, g_threads);
    const auto [lo2, hi2] = brownian_argmax_quantiles(1.0, 0.95, 200000, grid, 99, g_threads);
    const double drift = std::max(std::abs(hi2 - hi1) / hi1, std::abs(lo2 - lo1) / std::abs(lo1));
    const auto [med_lo, med_hi] = brownian_argmax_quantiles(1.0, 0.001, 100000, grid, 99, g_threads);
    const double med = (med_lo + med_hi) / 2.0;

    const bool pass = coverage >= 0.90 && total >= 300 && drift < 0.01 && std::abs(med) <= 0.2;
    report(10, pass,
           fmt("95%% CI coverage %.3f (%lld/%lld, need >=0.90); quantile drift under path doubling %.4f "
               "(<0.01); median %.3f (~0)  [%.1fs]",
               coverage, covered, total, drift, med, t.secs()));
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_threads = std::atoi(argv[1]);
    const unsigned hw = std::thread::hardware_concurrency();
    if (argc <= 1 && hw > 0) g_threads = static_cast<int>(std::min(hw, 8u));
    std::printf("acceptance suite, %d worker threads\n", g_threads);
    Timer total;
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    criterion10();
    std::printf("%d/10 criteria passed  [%.1fs total]\n", 10 - g_failures, total.secs());
    return g_failures == 0 ? 0 : 1;
}
