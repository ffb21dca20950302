#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcpd/ratio.hpp"

namespace tcpd {

/// Detection tuning. Unset optionals resolve to the recommended defaults
/// (alpha_n formula, s multipliers by mode, tau = 0.8 for SFD / 0.4 for MSFD).
struct DetectorConfig {
    DetectMode mode = DetectMode::sfd;
    int structural_mode = 0;  // 0 = last mode
    std::optional<int> alpha;
    std::optional<double> eps, nu, s, s1;
    std::optional<double> tau;
    double ci_level = 0.95;
    long long ci_paths = 20000;
    std::uint64_t seed = 1;
    int threads = 1;

    double resolved_tau() const { return tau.value_or(mode == DetectMode::sfd ? 0.8 : 0.4); }
    ScreeningParams resolve_params(long long n) const {
        ParamOverrides over;
        over.alpha = alpha;
        over.eps = eps;
        over.nu = nu;
        over.s = s;
        over.s1 = s1;
        return derive_params(n, mode, over);
    }
};

/// One tau-crossing interval (m, M]. The anchor M satisfies T(M) < tau and
/// T(M+1) >= tau; m = M - floor(2*sqrt(tau)/(sqrt(tau)+1) * alpha).
struct CandidateInterval {
    long long M = 0;
    long long m = 0;
    bool edge = false;           // emitted by the right-edge rule
    bool overlaps_prev = false;  // m fell at or before the previous anchor
    bool pruned = false;
    std::string reason;          // why pruned / dropped
    std::optional<long long> r;         // max-argmin inside (m, M)
    std::optional<long long> location;  // r + 2*alpha - 1
};

struct Detection {
    long long k_hat = 0;
    std::vector<long long> locations;
    std::vector<CandidateInterval> intervals;  // kept and pruned, in scan order
    int alpha = 0;
    double tau = 0.0;
    DetectMode mode = DetectMode::sfd;
    int structural_mode = 0;
    DetectorConfig config;  // echo of the request
    RatioSeries series;
};

/// Interval length floor(2*sqrt(tau)/(sqrt(tau)+1) * alpha), at least 1.
inline long long interval_length(double tau, int alpha) {
    const auto len = static_cast<long long>(std::floor(2.0 * std::sqrt(tau) / (std::sqrt(tau) + 1.0) * alpha));
    return std::max(1LL, len);
}

/// Scan the series upward and emit every sustained tau-crossing: T(M) < tau,
/// and T stays >= tau for ceil(alpha/2) indices after M (or to the series
/// end). The hold requirement keeps one noisy dip from minting several
/// crossings. A series ending below tau emits its last index as an edge
/// interval, otherwise a change near the right boundary would be lost.
inline std::vector<CandidateInterval> find_intervals(const RatioSeries& series, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("find_intervals: tau must lie in (0, 1)");
    const long long len = series.len();
    const long long hold = (series.alpha + 1) / 2;
    const long long ilen = interval_length(tau, series.alpha);
    std::vector<CandidateInterval> out;
    auto emit = [&](long long M, bool edge) {
        CandidateInterval ci;
        ci.M = M;
        ci.m = M - ilen;
        ci.edge = edge;
        ci.overlaps_prev = !out.empty() && ci.m < out.back().M;
        out.push_back(std::move(ci));
    };
    for (long long i = 1; i < len; ++i) {
        if (!(series.at(i) < tau && series.at(i + 1) >= tau)) continue;
        bool sustained = true;
        const long long stop = std::min(len, i + hold);
        for (long long u = i + 1; u <= stop; ++u) {
            if (series.at(u) < tau) {
                sustained = false;
                break;
            }
        }
        if (sustained) emit(i, false);
    }
    if (len >= 1 && series.at(len) < tau) emit(len, true);
    return out;
}

/// Rule out spurious anchors of the all-element statistic: M_l goes when
/// M_{l+1} - M_l <= 3*alpha/2 AND T(floor(M_l - alpha/2)) >= 1. Gaps are
/// measured on the original anchor list; a probe index before the series
/// start leaves the condition unmet. Entries stay in the list, flagged.
inline std::vector<CandidateInterval> prune_sfd(std::vector<CandidateInterval> intervals,
                                                const RatioSeries& series, int alpha) {
    for (std::size_t l = 0; l + 1 < intervals.size(); ++l) {
        const double gap = static_cast<double>(intervals[l + 1].M - intervals[l].M);
        if (gap > 1.5 * alpha) continue;
        const long long probe = static_cast<long long>(std::floor(intervals[l].M - alpha / 2.0));
        if (probe < 1 || probe > series.len()) continue;
        if (series.at(probe) >= 1.0) {
            intervals[l].pruned = true;
            intervals[l].reason = "spurious: next anchor within 3*alpha/2 and T(M - alpha/2) >= 1";
        }
    }
    return intervals;
}

/// Mode-based pruning: spacing condition only (the probe fact is not
/// available for the min-reduced statistic).
inline std::vector<CandidateInterval> prune_msfd(std::vector<CandidateInterval> intervals, int alpha) {
    for (std::size_t l = 0; l + 1 < intervals.size(); ++l) {
        const double gap = static_cast<double>(intervals[l + 1].M - intervals[l].M);
        if (gap <= 1.5 * alpha) {
            intervals[l].pruned = true;
            intervals[l].reason = "spurious: next anchor within 3*alpha/2";
        }
    }
    return intervals;
}

/// Locate the change inside each kept interval: r_k is the largest minimizer
/// of T over the open range (m_k, M_k), and z_k = r_k + 2*alpha - 1.
/// Intervals whose open range is empty after clipping are dropped, with the
/// reason recorded.
inline Detection locate(std::vector<CandidateInterval> intervals, const RatioSeries& series, int alpha) {
    Detection det;
    det.alpha = alpha;
    long long prev_location = 0;
    for (auto& ci : intervals) {
        if (ci.pruned) continue;
        const long long lo = std::max(ci.m + 1, 1LL);
        const long long hi = std::min(ci.M - 1, series.len());
        if (lo > hi) {
            ci.pruned = true;
            ci.reason = "dropped: open range (m, M) empty after clipping at series start";
            continue;
        }
        long long r = lo;
        double best = series.at(lo);
        for (long long i = lo + 1; i <= hi; ++i) {
            const double v = series.at(i);
            if (v <= best) {  // ties resolve to the largest index
                best = v;
                r = i;
            }
        }
        const long long z = r + 2LL * alpha - 1;
        if (z <= prev_location) {
            ci.pruned = true;
            ci.reason = "dropped: location not above the previous one";
            continue;
        }
        ci.r = r;
        ci.location = z;
        det.locations.push_back(z);
        prev_location = z;
    }
    det.k_hat = static_cast<long long>(det.locations.size());
    det.intervals = std::move(intervals);
    return det;
}

/// Full pipeline: MOSUM -> screening/ridge ratio -> tau-crossing intervals
/// -> pruning -> location extraction.
inline Detection detect(const TensorSeq& seq, const DetectorConfig& config) {
    const ScreeningParams params = config.resolve_params(seq.n());
    if (seq.n() < 3LL * params.alpha) throw SequenceTooShortError(seq.n(), 3LL * params.alpha);
    const double tau = config.resolved_tau();
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("detect: tau must lie in (0, 1)");

    RatioSeries series;
    if (config.mode == DetectMode::sfd) {
        const MosumField field = mosum_field(seq, params.alpha, config.threads);
        series = ratio_series_sfd(field, params);
    } else {
        series = ratio_series_msfd(seq, config.structural_mode, params, config.threads);
    }
    std::vector<CandidateInterval> intervals = find_intervals(series, tau);
    intervals = config.mode == DetectMode::sfd ? prune_sfd(std::move(intervals), series, params.alpha)
                                               : prune_msfd(std::move(intervals), params.alpha);
    Detection det = locate(std::move(intervals), series, params.alpha);
    det.tau = tau;
    det.mode = config.mode;
    det.structural_mode = config.structural_mode == 0 ? seq.shape().order() : config.structural_mode;
    det.config = config;
    det.series = std::move(series);
    return det;
}

}  // namespace tcpd
