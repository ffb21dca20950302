#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "tcpd/harness.hpp"

using namespace tcpd;

namespace {
const std::vector<long long> kTruth = {200, 400, 600, 800, 1000, 1200, 1400, 1600};
}

TEST_CASE("cp_correct: tolerance floor(sqrt(n)/2)") {
    CHECK(cp_correct({200, 401, 605, 820, 1000, 1190, 1403, 1580}, kTruth, 1800) == 8);
    CHECK(cp_correct({230}, {200}, 1800) == 0);  // gap 30 > 21
    CHECK(cp_correct({221}, {200}, 1800) == 1);  // gap 21 <= 21
    CHECK(cp_correct({}, kTruth, 1800) == 0);
    CHECK_THROWS_AS(cp_correct({100}, {}, 1800), std::invalid_argument);
}

TEST_CASE("cp_correct: one estimate cannot match two truths") {
    CHECK(cp_correct({205}, {200, 210}, 1800) == 1);
    // two estimates, two truths, all within tolerance: both match one-to-one
    CHECK(cp_correct({205, 206}, {200, 210}, 1800) == 2);
}

TEST_CASE("cp_metric") {
    CHECK(cp_metric({8, 8, 8}, 8) == 1.0);
    CHECK(cp_metric({4, 3, 8, 2}, 8) == 0.5);
    CHECK(cp_metric({2, 2}, 2) == 1.0);  // K < 4 requires only K
}

TEST_CASE("single replication: histogram is a unit mass") {
    SimSpec spec = gen_dense_order1(10, 0.4, 77).second;
    spec.noise.sigma = 0.0;
    const RunReport r = run_experiment(spec, DetectorConfig{}, 1);
    long long total = 0;
    for (long long h : r.hist) total += h;
    CHECK(total == 1);
    CHECK(r.hist[3] == 1);  // K_hat = K on the noiseless design
    CHECK(r.mse == 0.0);
    CHECK(r.cp == 1.0);
}

TEST_CASE("parallel run matches the sequential report byte for byte") {
    const SimSpec spec = gen_dense_order1(20, 0.4, 2025).second;
    const RunReport a = run_experiment(spec, DetectorConfig{}, 12, 1);
    const RunReport b = run_experiment(spec, DetectorConfig{}, 12, 4);
    CHECK(a.mean_khat == b.mean_khat);
    CHECK(a.mse == b.mse);
    CHECK(a.cp == b.cp);
    CHECK(a.hist == b.hist);
    REQUIRE(a.per_rep.size() == b.per_rep.size());
    for (std::size_t k = 0; k < a.per_rep.size(); ++k) {
        CHECK(a.per_rep[k].seed == b.per_rep[k].seed);
        CHECK(a.per_rep[k].k_hat == b.per_rep[k].k_hat);
        CHECK(a.per_rep[k].locations == b.per_rep[k].locations);
        CHECK(a.per_rep[k].correct == b.per_rep[k].correct);
    }
}

TEST_CASE("MSE agrees with the histogram when deviations stay within the bins") {
    const SimSpec spec = gen_dense_order1(50, 0.4, 11).second;
    const RunReport r = run_experiment(spec, DetectorConfig{}, 10);
    bool bounded = true;
    for (const auto& rec : r.per_rep)
        if (std::llabs(rec.k_hat - r.K) > 2) bounded = false;
    REQUIRE(bounded);
    CHECK(r.mse == r.mse_from_histogram());
    // variance decomposition sanity
    const double bias = r.mean_khat - static_cast<double>(r.K);
    CHECK(r.mse >= bias * bias - 1e-12);
}

TEST_CASE("replication failures are recorded, not fatal") {
    SimSpec spec;
    spec.shape = Shape({2});
    spec.n = 100;
    spec.seg_means = {std::vector<double>(2, 1.0)};
    spec.seed = 1;
    DetectorConfig cfg;
    cfg.alpha = 50;  // needs n >= 150: every replication fails
    const RunReport r = run_experiment(spec, cfg, 3);
    CHECK(r.failures == 3);
    for (const auto& rec : r.per_rep) {
        CHECK(rec.failed);
        CHECK(rec.error.find("sequence too short") != std::string::npos);
    }
}

TEST_CASE("null design: cp is reported as NaN") {
    SimSpec spec;
    spec.shape = Shape({2});
    spec.n = 300;
    spec.seg_means = {std::vector<double>(2, 1.0)};
    spec.seed = 5;
    const RunReport r = run_experiment(spec, DetectorConfig{}, 2);
    CHECK(std::isnan(r.cp));
    CHECK(r.K == 0);
}
