#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tcpd/detector.hpp"
#include "tcpd/rng.hpp"
#include "tcpd/tensor.hpp"

namespace tcpd {

/// Plug-in jump-size estimate at one detected change: the mean difference of
/// the two adjacent segments, its support after hard thresholding, and the
/// scalars a_k = |Lambda^-1 jump|^2 and zeta_k^2 = gamma' (Lambda^-1 Sigma
/// Lambda^-1) gamma that scale the argmax law.
struct JumpEstimate {
    int k = 0;
    std::vector<long long> support;  // 0-based flat coordinates
    std::vector<double> jump;        // restricted to support
    double a_k = 0.0;
    double zeta_k = 0.0;
    bool degenerate_lambda = false;  // some residual sd floored
    bool regularized = false;        // restricted covariance ridge-regularized
    bool available = true;
    std::string note;
};

struct GridSpec {
    double half_width = 40.0;  // R: grid covers [-R, R] in unscaled units
    double step = 0.05;        // h: walk increments have variance h
};

struct CIResult {
    int k = 0;
    double level = 0.0;
    long long lower = 0, upper = 0;  // integer location scale
    long long center = 0;            // locally refined location the interval is built around
    double q_lo = 0.0, q_hi = 0.0;   // scaled argmax quantiles
    double lower_norm = 0.0, upper_norm = 0.0;  // divided by alpha_n, as the limit law states
    long long paths = 0;
    GridSpec grid;
    std::uint64_t seed = 0;
    bool available = true;
    std::string note;
};

/// a_k and zeta_k from explicit jump / standardization / covariance inputs
/// (all restricted to the support). Pure algebra; the estimators feed this.
inline std::pair<double, double> jump_law_params(const std::vector<double>& jump,
                                                 const std::vector<double>& lambda,
                                                 const std::vector<double>& sigma_restricted) {
    const std::size_t m = jump.size();
    if (lambda.size() != m || sigma_restricted.size() != m * m)
        throw std::invalid_argument("jump_law_params: size mismatch");
    std::vector<double> gamma(m);
    double a = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        gamma[j] = jump[j] / lambda[j];
        a += gamma[j] * gamma[j];
    }
    double zeta2 = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            zeta2 += gamma[i] * (sigma_restricted[i * m + j] / (lambda[i] * lambda[j])) * gamma[j];
    return {a, std::sqrt(std::max(0.0, zeta2))};
}

namespace detail {

inline void segment_mean(const TensorSeq& seq, long long lo, long long hi, std::vector<double>& out) {
    // times (lo, hi], 1-based
    const long long p = seq.p();
    out.assign(static_cast<std::size_t>(p), 0.0);
    for (long long t = lo + 1; t <= hi; ++t) {
        auto r = seq.row(t);
        for (long long j = 0; j < p; ++j) out[static_cast<std::size_t>(j)] += r[static_cast<std::size_t>(j)];
    }
    const double len = static_cast<double>(hi - lo);
    for (double& v : out) v /= len;
}

}  // namespace detail

/// Jump estimate for the k-th detected change (1-based). Segment means are
/// taken over (z_{k-1}, z_k] and (z_k, z_{k+1}] with z_0 = 0, z_{K+1} = n.
/// hard_threshold defaults to sqrt(l_n(s)). Residual sds are floored at 1e-6
/// (flagged); a singular restricted covariance is ridge-regularized with
/// 1e-8 * trace/m (flagged).
inline JumpEstimate estimate_jump(const TensorSeq& seq, const Detection& detection, int k,
                                  double hard_threshold = -1.0) {
    if (k < 1 || k > detection.k_hat) throw std::out_of_range("estimate_jump: k outside [1, K_hat]");
    JumpEstimate est;
    est.k = k;
    const long long z = detection.locations[static_cast<std::size_t>(k - 1)];
    const long long lo = k >= 2 ? detection.locations[static_cast<std::size_t>(k - 2)] : 0;
    const long long hi = k < detection.k_hat ? detection.locations[static_cast<std::size_t>(k)] : seq.n();
    if (z - lo < detection.alpha || hi - z < detection.alpha) {
        est.available = false;
        est.note = "adjacent segment shorter than alpha; CI unavailable";
        return est;
    }
    const long long p = seq.p();
    std::vector<double> m1, m2;
    detail::segment_mean(seq, lo, z, m1);
    detail::segment_mean(seq, z, hi, m2);

    const double thr = hard_threshold >= 0.0 ? hard_threshold : std::sqrt(detection.series.params.l_n());
    std::vector<double> jump_full(static_cast<std::size_t>(p));
    for (long long j = 0; j < p; ++j)
        jump_full[static_cast<std::size_t>(j)] = m2[static_cast<std::size_t>(j)] - m1[static_cast<std::size_t>(j)];
    for (long long j = 0; j < p; ++j)
        if (std::abs(jump_full[static_cast<std::size_t>(j)]) > thr) est.support.push_back(j);
    if (est.support.empty()) {
        est.available = false;
        est.note = "no coordinate above the hard threshold; CI unavailable";
        return est;
    }

    // residual sds over both segments (two fitted means)
    const long long N = hi - lo;
    std::vector<double> lambda(static_cast<std::size_t>(p), 0.0);
    for (long long t = lo + 1; t <= hi; ++t) {
        auto r = seq.row(t);
        const std::vector<double>& mean = t <= z ? m1 : m2;
        for (long long j = 0; j < p; ++j) {
            const double e = r[static_cast<std::size_t>(j)] - mean[static_cast<std::size_t>(j)];
            lambda[static_cast<std::size_t>(j)] += e * e;
        }
    }
    const double dof = static_cast<double>(std::max(1LL, N - 2));
    for (long long j = 0; j < p; ++j) {
        double sd = std::sqrt(lambda[static_cast<std::size_t>(j)] / dof);
        if (sd < 1e-6) {
            sd = 1e-6;
            est.degenerate_lambda = true;
        }
        lambda[static_cast<std::size_t>(j)] = sd;
    }
    if (est.degenerate_lambda) est.note = "residual sd floored at 1e-6 (near-noiseless input)";

    // restricted residual covariance
    const std::size_t m = est.support.size();
    Eigen::MatrixXd R(N, static_cast<Eigen::Index>(m));
    for (long long t = lo + 1; t <= hi; ++t) {
        auto r = seq.row(t);
        const std::vector<double>& mean = t <= z ? m1 : m2;
        for (std::size_t c = 0; c < m; ++c) {
            const long long j = est.support[c];
            R(t - lo - 1, static_cast<Eigen::Index>(c)) =
                r[static_cast<std::size_t>(j)] - mean[static_cast<std::size_t>(j)];
        }
    }
    Eigen::MatrixXd sigma = (R.transpose() * R) / dof;
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        const double ridge = 1e-8 * sigma.trace() / static_cast<double>(m);
        sigma.diagonal().array() += ridge;
        est.regularized = true;
        if (!est.note.empty()) est.note += "; ";
        est.note += "restricted covariance singular, ridge-regularized";
    }

    est.jump.resize(m);
    std::vector<double> lam_s(m), sig_flat(m * m);
    for (std::size_t c = 0; c < m; ++c) {
        est.jump[c] = jump_full[static_cast<std::size_t>(est.support[c])];
        lam_s[c] = lambda[static_cast<std::size_t>(est.support[c])];
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            sig_flat[i * m + j] = sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    const auto [a, zeta] = jump_law_params(est.jump, lam_s, sig_flat);
    est.a_k = a;
    est.zeta_k = zeta;
    return est;
}

namespace detail {

/// One block of argmax draws; grid index -m..m maps to r = index * h.
inline void argmax_block(long long n_paths, long long m, double h, std::uint64_t seed,
                         std::vector<double>& out, long long& boundary_hits) {
    std::mt19937_64 eng = make_engine(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(h));
    for (long long path = 0; path < n_paths; ++path) {
        double best = 0.0;
        long long best_idx = 0;
        double w = 0.0;
        for (long long i = 1; i <= m; ++i) {  // right side
            w += normal(eng);
            const double v = -0.5 * i * h + w;
            if (v > best) {
                best = v;
                best_idx = i;
            }
        }
        w = 0.0;
        for (long long i = 1; i <= m; ++i) {  // left side
            w += normal(eng);
            const double v = -0.5 * i * h + w;
            if (v > best) {
                best = v;
                best_idx = -i;
            }
        }
        if (std::llabs(best_idx) == m) ++boundary_hits;
        out.push_back(static_cast<double>(best_idx) * h);
    }
}

inline constexpr long long kPathBlock = 4096;

/// Sorted sample of argmax_r { -|r|/2 + W(r) } (unscaled).
inline std::vector<double> simulate_argmax_values(long long paths, const GridSpec& grid,
                                                  std::uint64_t seed, int threads) {
    if (!(grid.step > 0) || !(grid.half_width > grid.step))
        throw std::invalid_argument("brownian_argmax_quantiles: bad grid");
    const long long m = static_cast<long long>(std::llround(grid.half_width / grid.step));
    const long long n_blocks = (paths + kPathBlock - 1) / kPathBlock;
    std::vector<std::vector<double>> block_vals(static_cast<std::size_t>(n_blocks));
    std::vector<long long> block_hits(static_cast<std::size_t>(n_blocks), 0);
    std::atomic<long long> next{0};
    auto worker = [&] {
        for (;;) {
            const long long b = next.fetch_add(1);
            if (b >= n_blocks) return;
            const long long count = std::min(kPathBlock, paths - b * kPathBlock);
            argmax_block(count, m, grid.step, stream_seed(seed, static_cast<std::uint64_t>(b)),
                         block_vals[static_cast<std::size_t>(b)], block_hits[static_cast<std::size_t>(b)]);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    long long hits = 0;
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(paths));
    for (long long b = 0; b < n_blocks; ++b) {
        hits += block_hits[static_cast<std::size_t>(b)];
        values.insert(values.end(), block_vals[static_cast<std::size_t>(b)].begin(),
                      block_vals[static_cast<std::size_t>(b)].end());
    }
    const double rate = static_cast<double>(hits) / static_cast<double>(paths);
    if (rate > 0.001) throw GridTooSmallError(rate, 2.0 * grid.half_width);
    std::sort(values.begin(), values.end());
    return values;
}

inline double sorted_quantile(const std::vector<double>& sorted, double prob) {
    const auto n = static_cast<long long>(sorted.size());
    const long long idx = std::clamp<long long>(
        static_cast<long long>(std::llround(prob * static_cast<double>(n - 1))), 0, n - 1);
    return sorted[static_cast<std::size_t>(idx)];
}

}  // namespace detail

/// Monte-Carlo quantiles of scale * argmax_r { -|r|/2 + W(r) } at
/// probabilities (1-level)/2 and 1-(1-level)/2. W is a random walk on the
/// grid with increment variance h; scaling is applied after simulation, so
/// quantiles are exactly linear in `scale`. Throws GridTooSmallError with a
/// suggested half-width when too many paths peak at the boundary.
inline std::pair<double, double> brownian_argmax_quantiles(double scale, double level, long long paths,
                                                           const GridSpec& grid, std::uint64_t seed,
                                                           int threads = 1) {
    if (paths < 10000) throw std::invalid_argument("brownian_argmax_quantiles: paths must be >= 10^4");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("brownian_argmax_quantiles: level in (0,1)");
    const std::vector<double> values = detail::simulate_argmax_values(paths, grid, seed, threads);
    const double a = (1.0 - level) / 2.0;
    return {scale * detail::sorted_quantile(values, a), scale * detail::sorted_quantile(values, 1.0 - a)};
}

/// Largest maximizer of the two-segment least-squares fit
///   (t-a)(b-t)/(b-a) * || mean(a,t] - mean(t,b] ||^2
/// over t in [z-radius, z+radius] inside (a, b). This is the construction
/// whose limit the argmax law describes; the ratio argmin alone is only
/// o(alpha)-accurate.
inline long long refine_location(const TensorSeq& seq, long long z, long long a, long long b,
                                 long long radius) {
    const long long p = seq.p();
    const long long lo = std::max(a + 1, z - radius);
    const long long hi = std::min(b - 1, z + radius);
    if (lo > hi || a >= b - 1) return z;
    // prefix sums over times (a, b]
    const long long len = b - a;
    std::vector<double> prefix(static_cast<std::size_t>((len + 1) * p), 0.0);
    for (long long t = 1; t <= len; ++t) {
        auto r = seq.row(a + t);
        const double* prev = prefix.data() + (t - 1) * p;
        double* cur = prefix.data() + t * p;
        for (long long j = 0; j < p; ++j) cur[j] = prev[j] + r[static_cast<std::size_t>(j)];
    }
    const double* total = prefix.data() + len * p;
    double best = -1.0;
    long long best_t = z;
    for (long long t = lo; t <= hi; ++t) {
        const long long n1 = t - a, n2 = b - t;
        const double* s1 = prefix.data() + n1 * p;
        double ss = 0.0;
        for (long long j = 0; j < p; ++j) {
            const double d = s1[j] / static_cast<double>(n1) - (total[j] - s1[j]) / static_cast<double>(n2);
            ss += d * d;
        }
        const double lam = static_cast<double>(n1) * static_cast<double>(n2) / static_cast<double>(len) * ss;
        if (lam >= best) {
            best = lam;
            best_t = t;
        }
    }
    return best_t;
}

/// Interval endpoints on the integer location scale:
/// [center - floor(q_hi) - 1, center - floor(q_lo) + 1].
inline std::pair<long long, long long> ci_endpoints(long long center, double q_lo, double q_hi) {
    return {center - static_cast<long long>(std::floor(q_hi)) - 1,
            center - static_cast<long long>(std::floor(q_lo)) + 1};
}

/// Confidence interval for the k-th detected change point. The center is the
/// locally refined location; endpoints are center - floor(q_hi) - 1 and
/// center - floor(q_lo) + 1 with (q_lo, q_hi) the scaled argmax quantiles.
/// The /alpha_n normalization of the limit statement is reported alongside.
/// For mode-based detections the machinery is applied to the slice attaining
/// the minimum at the located index (the limit theory covers the
/// all-element case; the slice-wise interval is a documented heuristic).
/// Quantiles are exactly linear in the scale, so callers computing many
/// intervals can pass the unscaled (scale = 1) quantile pair once.
inline CIResult ci_for_changepoint(const TensorSeq& seq, const Detection& detection, int k, double level,
                                   long long paths = 20000, std::uint64_t seed = 1, int threads = 1,
                                   GridSpec grid = {},
                                   const std::pair<double, double>* unit_quantiles = nullptr) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("ci_for_changepoint: level in (0,1)");
    if (k < 1 || k > detection.k_hat) throw std::out_of_range("ci_for_changepoint: k outside [1, K_hat]");
    CIResult ci;
    ci.k = k;
    ci.level = level;
    ci.paths = paths;
    ci.seed = seed;

    // Mode-based path: work on the slice that produced the minimum.
    const TensorSeq* data = &seq;
    std::optional<TensorSeq> slice_data;
    Detection slice_det;
    const Detection* det = &detection;
    if (detection.mode == DetectMode::msfd && !detection.series.min_slice.empty()) {
        const auto& interval = detection.intervals;
        int slice = 1;
        for (const auto& ci_iv : interval)
            if (!ci_iv.pruned && ci_iv.location &&
                *ci_iv.location == detection.locations[static_cast<std::size_t>(k - 1)] && ci_iv.r)
                slice = detection.series.min_slice[static_cast<std::size_t>(*ci_iv.r - 1)];
        const SliceSeq view = slice_mode(seq, detection.structural_mode, slice);
        std::vector<double> vals(static_cast<std::size_t>(seq.n() * view.elem_count()));
        for (long long i = 1; i <= seq.n(); ++i)
            for (long long j = 0; j < view.elem_count(); ++j)
                vals[static_cast<std::size_t>((i - 1) * view.elem_count() + j)] = view.value(i, j);
        slice_data.emplace(view.shape(), seq.n(), std::move(vals));
        data = &*slice_data;
        slice_det = detection;
        slice_det.mode = DetectMode::sfd;
        det = &slice_det;
        ci.note = "mode-based detection: interval built on slice " + std::to_string(slice) +
                  " (slice-wise heuristic)";
    }

    const JumpEstimate est = estimate_jump(*data, *det, k);
    if (!est.available || est.a_k <= 0.0) {
        ci.available = false;
        ci.note = est.note.empty() ? "jump estimate unavailable" : est.note;
        return ci;
    }
    const long long z = detection.locations[static_cast<std::size_t>(k - 1)];
    const long long prev = k >= 2 ? detection.locations[static_cast<std::size_t>(k - 2)] : 0;
    const long long next = k < detection.k_hat ? detection.locations[static_cast<std::size_t>(k)] : seq.n();
    const long long a = std::max((prev + z) / 2, z - 2LL * detection.alpha);
    const long long b = std::min((z + next + 1) / 2, z + 2LL * detection.alpha);
    ci.center = refine_location(*data, z, a, b, (detection.alpha + 1) / 2);

    const double scale = (est.zeta_k / est.a_k) * (est.zeta_k / est.a_k);
    GridSpec g = grid;
    std::pair<double, double> q;
    if (unit_quantiles) {
        q = {scale * unit_quantiles->first, scale * unit_quantiles->second};
    } else {
        for (int attempt = 0;; ++attempt) {
            try {
                q = brownian_argmax_quantiles(scale, level, paths, g, seed, threads);
                break;
            } catch (const GridTooSmallError& e) {
                if (attempt >= 3) throw;
                g.half_width = e.suggested_half_width;  // automatic widening
                if (!ci.note.empty()) ci.note += "; ";
                ci.note += "grid widened to " + std::to_string(g.half_width);
            }
        }
    }
    ci.grid = g;
    ci.q_lo = q.first;
    ci.q_hi = q.second;
    std::tie(ci.lower, ci.upper) = ci_endpoints(ci.center, ci.q_lo, ci.q_hi);
    ci.lower_norm = static_cast<double>(ci.lower) / detection.alpha;
    ci.upper_norm = static_cast<double>(ci.upper) / detection.alpha;
    if (est.degenerate_lambda || est.regularized) {
        if (!ci.note.empty()) ci.note += "; ";
        ci.note += est.note;
    }
    return ci;
}

}  // namespace tcpd
