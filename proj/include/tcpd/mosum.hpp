#pragma once

#include <algorithm>
#include <mutex>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "tcpd/errors.hpp"
#include "tcpd/tensor.hpp"

namespace tcpd {

/// Element-wise moving-sum difference field: row i holds the flattened
/// D_n(i) = (1/alpha) * (sum of X_i..X_{i+alpha-1} - sum of X_{i+alpha}..X_{i+2alpha-1}),
/// valid for 1 <= i <= n - 2*alpha + 1.
struct MosumField {
    int alpha = 0;
    long long n = 0;
    long long p = 0;
    std::vector<double> values;  // rows() x p, row-major

    long long rows() const { return n - 2LL * alpha + 1; }

    std::span<const double> row(long long i) const {
        if (i < 1 || i > rows()) throw std::out_of_range("MosumField: i outside [1, n-2a+1]");
        return {values.data() + (i - 1) * p, static_cast<std::size_t>(p)};
    }
};

namespace detail {

// Sliding window sums rebuilt at fixed block boundaries, so the result is
// invariant to how blocks are distributed over workers. Block size also
// bounds floating-point drift of the running sums.
inline constexpr long long kMosumBlockRows = 2048;

inline void mosum_block(const TensorSeq& seq, int alpha, long long row_begin, long long row_end,
                        bool compensated, std::vector<double>& out) {
    const long long p = seq.p();
    std::vector<double> w1(static_cast<std::size_t>(p), 0.0), w2(static_cast<std::size_t>(p), 0.0);
    std::vector<double> c1, c2;
    if (compensated) {
        c1.assign(static_cast<std::size_t>(p), 0.0);
        c2.assign(static_cast<std::size_t>(p), 0.0);
    }
    auto add = [&](std::vector<double>& w, std::vector<double>& c, std::span<const double> x, double sign) {
        if (!compensated) {
            for (long long j = 0; j < p; ++j) w[static_cast<std::size_t>(j)] += sign * x[static_cast<std::size_t>(j)];
        } else {
            for (long long j = 0; j < p; ++j) {
                const double y = sign * x[static_cast<std::size_t>(j)] - c[static_cast<std::size_t>(j)];
                const double t = w[static_cast<std::size_t>(j)] + y;
                c[static_cast<std::size_t>(j)] = (t - w[static_cast<std::size_t>(j)]) - y;
                w[static_cast<std::size_t>(j)] = t;
            }
        }
    };
    for (long long t = row_begin; t < row_begin + alpha; ++t) add(w1, c1, seq.row(t), 1.0);
    for (long long t = row_begin + alpha; t < row_begin + 2 * alpha; ++t) add(w2, c2, seq.row(t), 1.0);
    for (long long i = row_begin; i < row_end; ++i) {
        double* dst = out.data() + (i - 1) * p;
        for (long long j = 0; j < p; ++j)
            dst[j] = (w1[static_cast<std::size_t>(j)] - w2[static_cast<std::size_t>(j)]) / alpha;
        if (i + 1 < row_end) {
            add(w1, c1, seq.row(i + alpha), 1.0);
            add(w1, c1, seq.row(i), -1.0);
            add(w2, c2, seq.row(i + 2 * alpha), 1.0);
            add(w2, c2, seq.row(i + alpha), -1.0);
        }
    }
}

}  // namespace detail

/// Sliding-window MOSUM over the whole sequence. Requires n >= 3*alpha
/// because every downstream consumer also needs D_n(i + alpha).
/// Compensated summation defaults on when n*alpha is large enough for
/// running-sum drift to approach the screening threshold.
inline MosumField mosum_field(const TensorSeq& seq, int alpha, int threads = 1, int compensated = -1) {
    if (alpha < 1) throw std::invalid_argument("mosum_field: alpha must be >= 1");
    if (seq.n() < 3LL * alpha) throw SequenceTooShortError(seq.n(), 3LL * alpha);
    const bool comp = compensated < 0 ? (seq.n() * static_cast<long long>(alpha) > 10'000'000LL)
                                      : compensated != 0;
    MosumField f;
    f.alpha = alpha;
    f.n = seq.n();
    f.p = seq.p();
    f.values.resize(static_cast<std::size_t>(f.rows() * f.p));

    const long long rows = f.rows();
    std::vector<std::pair<long long, long long>> blocks;
    for (long long b = 1; b <= rows; b += detail::kMosumBlockRows)
        blocks.emplace_back(b, std::min(rows + 1, b + detail::kMosumBlockRows));

    if (threads <= 1 || blocks.size() == 1) {
        for (auto [b, e] : blocks) detail::mosum_block(seq, alpha, b, e, comp, f.values);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        std::mutex mu;
        const int nw = std::min<int>(threads, static_cast<int>(blocks.size()));
        for (int w = 0; w < nw; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t mine;
                    {
                        std::lock_guard<std::mutex> lk(mu);
                        if (next >= blocks.size()) return;
                        mine = next++;
                    }
                    detail::mosum_block(seq, alpha, blocks[mine].first, blocks[mine].second, comp, f.values);
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    return f;
}

/// Direct two-loop evaluation of D_n(i); test oracle for the sliding pass.
inline std::vector<double> mosum_naive(const TensorSeq& seq, int alpha, long long i) {
    if (alpha < 1) throw std::invalid_argument("mosum_naive: alpha must be >= 1");
    if (seq.n() < 3LL * alpha) throw SequenceTooShortError(seq.n(), 3LL * alpha);
    if (i < 1 || i > seq.n() - 2LL * alpha + 1) throw std::out_of_range("mosum_naive: i outside valid range");
    const long long p = seq.p();
    std::vector<double> out(static_cast<std::size_t>(p), 0.0);
    for (long long t = i; t < i + alpha; ++t) {
        auto r = seq.row(t);
        for (long long j = 0; j < p; ++j) out[static_cast<std::size_t>(j)] += r[static_cast<std::size_t>(j)];
    }
    for (long long t = i + alpha; t < i + 2 * alpha; ++t) {
        auto r = seq.row(t);
        for (long long j = 0; j < p; ++j) out[static_cast<std::size_t>(j)] -= r[static_cast<std::size_t>(j)];
    }
    for (long long j = 0; j < p; ++j) out[static_cast<std::size_t>(j)] /= alpha;
    return out;
}

/// Exact MOSUM of a piecewise-constant mean sequence: segment k has mean
/// means[k] on times (z_{k-1}, z_k], with z_0 = 0 and z_{K+1} = n. Used as
/// the population oracle for the ratio-series shape tests.
inline MosumField population_mosum(const std::vector<std::vector<double>>& means,
                                   const std::vector<long long>& changepoints, long long n, int alpha) {
    if (means.empty()) throw std::invalid_argument("population_mosum: need at least one segment mean");
    if (means.size() != changepoints.size() + 1)
        throw std::invalid_argument("population_mosum: need K+1 segment means for K change points");
    if (alpha < 1 || n < 3LL * alpha) throw SequenceTooShortError(n, 3LL * alpha);
    const long long p = static_cast<long long>(means[0].size());
    for (const auto& m : means)
        if (static_cast<long long>(m.size()) != p)
            throw std::invalid_argument("population_mosum: segment means differ in length");
    long long prev = 0;
    for (long long z : changepoints) {
        if (z <= prev || z >= n)
            throw std::invalid_argument("population_mosum: change points must satisfy 0 < z_1 < ... < z_K < n, sorted, no duplicates");
        prev = z;
    }

    // Segment boundaries as half-open [lo, hi) time ranges, 1-based.
    std::vector<long long> lo(means.size()), hi(means.size());
    for (std::size_t k = 0; k < means.size(); ++k) {
        lo[k] = (k == 0) ? 1 : changepoints[k - 1] + 1;
        hi[k] = (k == changepoints.size()) ? n + 1 : changepoints[k] + 1;
    }
    auto window_sum = [&](long long a, long long b, std::vector<double>& acc, double sign) {
        // times [a, b), weight = overlap length with each segment
        for (std::size_t k = 0; k < means.size(); ++k) {
            const long long w = std::max(0LL, std::min(b, hi[k]) - std::max(a, lo[k]));
            if (w == 0) continue;
            for (long long j = 0; j < p; ++j)
                acc[static_cast<std::size_t>(j)] += sign * static_cast<double>(w) * means[k][static_cast<std::size_t>(j)];
        }
    };

    MosumField f;
    f.alpha = alpha;
    f.n = n;
    f.p = p;
    f.values.assign(static_cast<std::size_t>(f.rows() * p), 0.0);
    std::vector<double> acc(static_cast<std::size_t>(p));
    for (long long i = 1; i <= f.rows(); ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        window_sum(i, i + alpha, acc, 1.0);
        window_sum(i + alpha, i + 2 * alpha, acc, -1.0);
        double* dst = f.values.data() + (i - 1) * p;
        for (long long j = 0; j < p; ++j) dst[j] = acc[static_cast<std::size_t>(j)] / alpha;
    }
    return f;
}

}  // namespace tcpd
