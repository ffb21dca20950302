#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "tcpd/mosum.hpp"
#include "tcpd/screening.hpp"
#include "tcpd/tensor.hpp"

namespace tcpd {

/// Ridge c_n(i) = s1 * eps_n * (log n)^nu / (1{i in S} + 1/n): small on the
/// signal set, ~n times larger off it (forcing T_n toward 1).
inline double ridge_value(bool in_s, const ScreeningParams& params) {
    params.validate();
    const double num = params.s1 * params.eps_n() *
                       std::pow(std::log(static_cast<double>(params.n)), params.nu);
    return num / ((in_s ? 1.0 : 0.0) + 1.0 / static_cast<double>(params.n));
}

/// Ratio series T_n(i) over the valid range 1 <= i <= n - 3*alpha + 1,
/// with the per-index ridge and the signal-set membership that produced it.
/// For the mode-based statistic the per-slice rows and the argmin slice of
/// the min-reduction are kept as well.
struct RatioSeries {
    int alpha = 0;
    long long n = 0;
    ScreeningParams params;
    std::vector<double> t;         // index 0 holds i = 1
    std::vector<double> ridge;
    std::vector<std::uint8_t> in_s;

    // mode-based extras (empty for the all-element statistic)
    long long n_slices = 1;
    std::vector<double> slice_t;   // n_slices x len(), row-major
    std::vector<int> min_slice;    // slice attaining the minimum at each i

    long long len() const { return static_cast<long long>(t.size()); }

    double at(long long i) const {
        if (i < 1 || i > len()) throw std::out_of_range("RatioSeries: i outside [1, n-3a+1]");
        return t[static_cast<std::size_t>(i - 1)];
    }

    double slice_at(int l, long long i) const {
        return slice_t[static_cast<std::size_t>(l) * static_cast<std::size_t>(len()) +
                       static_cast<std::size_t>(i - 1)];
    }
};

namespace detail {

/// Sample signal set along the MOSUM index k = 1..n-2a+1, from the screened
/// mass of each window pair. A window is active when its screened mass
/// exceeds (element count) * l_n, the sample realization of "some element
/// carries signal". Runs shorter than max(2, alpha/10) are noise selections
/// and dropped; the grant used through the denominator index is additionally
/// trimmed on the left by min(ceil(alpha/3), run/3), the fringe where the
/// window only marginally overlaps a change.
struct SignalSets {
    std::vector<std::uint8_t> active;     // numerator-side grant
    std::vector<std::uint8_t> den_grant;  // denominator-side grant
};

inline SignalSets build_signal_sets(const std::vector<double>& mass, double threshold, int alpha) {
    const std::size_t m = mass.size();
    SignalSets s;
    s.active.assign(m, 0);
    s.den_grant.assign(m, 0);
    const long long min_run = std::max(2LL, static_cast<long long>(alpha) / 10);
    const long long max_trim = (alpha + 2) / 3;
    std::size_t i = 0;
    while (i < m) {
        if (mass[i] > threshold) {
            std::size_t j = i;
            while (j < m && mass[j] > threshold) ++j;
            const long long run = static_cast<long long>(j - i);
            if (run >= min_run) {
                std::fill(s.active.begin() + static_cast<std::ptrdiff_t>(i),
                          s.active.begin() + static_cast<std::ptrdiff_t>(j), 1);
                const long long trim = std::min(max_trim, run / 3);
                std::fill(s.den_grant.begin() + static_cast<std::ptrdiff_t>(i) + trim,
                          s.den_grant.begin() + static_cast<std::ptrdiff_t>(j), 1);
            }
            i = j;
        } else {
            ++i;
        }
    }
    return s;
}

/// Assemble one T series from per-index screened norms and masses.
inline void fill_ratio(const std::vector<double>& norm, const std::vector<double>& mass,
                       double mass_threshold, const ScreeningParams& params, int alpha,
                       std::vector<double>& t_out, std::vector<double>& ridge_out,
                       std::vector<std::uint8_t>& member_out) {
    const long long t_len = static_cast<long long>(norm.size()) - alpha;
    const SignalSets sets = build_signal_sets(mass, mass_threshold, alpha);
    const double c_on = ridge_value(true, params);
    const double c_off = ridge_value(false, params);
    t_out.resize(static_cast<std::size_t>(t_len));
    ridge_out.resize(static_cast<std::size_t>(t_len));
    member_out.resize(static_cast<std::size_t>(t_len));
    for (long long i = 0; i < t_len; ++i) {
        const bool member = sets.active[static_cast<std::size_t>(i)] ||
                            sets.den_grant[static_cast<std::size_t>(i + alpha)];
        const double c = member ? c_on : c_off;
        member_out[static_cast<std::size_t>(i)] = member ? 1 : 0;
        ridge_out[static_cast<std::size_t>(i)] = c;
        t_out[static_cast<std::size_t>(i)] =
            (norm[static_cast<std::size_t>(i)] + c) / (norm[static_cast<std::size_t>(i + alpha)] + c);
    }
}

}  // namespace detail

/// All-element statistic: T_n(i) = (||D_n(i)||_s^2 + c_n(i)) / (||D_n(i+a)||_s^2 + c_n(i)),
/// both norms screened at l_n(s).
inline RatioSeries ratio_series_sfd(const MosumField& field, const ScreeningParams& params) {
    params.validate();
    if (field.n != params.n || field.alpha != params.alpha)
        throw std::invalid_argument("ratio_series_sfd: params do not match the field");
    const long long rows = field.rows();
    const long long t_len = field.n - 3LL * field.alpha + 1;
    if (t_len < 1) throw SequenceTooShortError(field.n, 3LL * field.alpha);
    const double l = params.l_n();
    std::vector<double> norm(static_cast<std::size_t>(rows)), mass(static_cast<std::size_t>(rows));
    for (long long k = 1; k <= rows; ++k) {
        auto r = field.row(k);
        norm[static_cast<std::size_t>(k - 1)] = screening_norm(r, l, params.n);
        mass[static_cast<std::size_t>(k - 1)] = screened_mass(r, l);
    }
    RatioSeries out;
    out.alpha = field.alpha;
    out.n = field.n;
    out.params = params;
    detail::fill_ratio(norm, mass, static_cast<double>(field.p) * l, params, field.alpha,
                       out.t, out.ridge, out.in_s);
    return out;
}

/// Mode-based statistic: per-slice series T_nl(i) with per-slice signal sets
/// and ridges, min-reduced over the slices of `structural_mode` (0 = last
/// mode). The MOSUM field is computed once; slices are index views into it.
inline RatioSeries ratio_series_msfd(const TensorSeq& seq, int structural_mode,
                                     const ScreeningParams& params, int threads = 1) {
    params.validate();
    const int mode = structural_mode == 0 ? seq.shape().order() : structural_mode;
    if (mode < 1 || mode > seq.shape().order())
        throw std::invalid_argument("ratio_series_msfd: structural mode outside [1, order]");
    const long long n_slices = seq.shape().dim(mode);
    const MosumField field = mosum_field(seq, params.alpha, threads);
    const long long rows = field.rows();
    const long long t_len = field.n - 3LL * field.alpha + 1;
    const double l = params.l_n();

    RatioSeries out;
    out.alpha = field.alpha;
    out.n = field.n;
    out.params = params;
    out.n_slices = n_slices;
    out.slice_t.resize(static_cast<std::size_t>(n_slices * t_len));
    out.t.assign(static_cast<std::size_t>(t_len), 0.0);
    out.ridge.assign(static_cast<std::size_t>(t_len), 0.0);
    out.in_s.assign(static_cast<std::size_t>(t_len), 0);
    out.min_slice.assign(static_cast<std::size_t>(t_len), 0);

    std::vector<double> gathered;
    std::vector<double> norm(static_cast<std::size_t>(rows)), mass(static_cast<std::size_t>(rows));
    std::vector<double> t_l, ridge_l;
    std::vector<std::uint8_t> member_l;
    for (long long sl = 1; sl <= n_slices; ++sl) {
        const SliceSeq view = slice_mode(seq, mode, sl);
        const long long ps = view.elem_count();
        gathered.resize(static_cast<std::size_t>(ps));
        for (long long k = 1; k <= rows; ++k) {
            auto r = field.row(k);
            for (long long j = 0; j < ps; ++j)
                gathered[static_cast<std::size_t>(j)] = r[static_cast<std::size_t>(view.parent_offset(j))];
            norm[static_cast<std::size_t>(k - 1)] = screening_norm(gathered, l, params.n);
            mass[static_cast<std::size_t>(k - 1)] = screened_mass(gathered, l);
        }
        detail::fill_ratio(norm, mass, static_cast<double>(ps) * l, params, field.alpha,
                           t_l, ridge_l, member_l);
        double* row_out = out.slice_t.data() + (sl - 1) * t_len;
        for (long long i = 0; i < t_len; ++i) {
            row_out[i] = t_l[static_cast<std::size_t>(i)];
            if (sl == 1 || t_l[static_cast<std::size_t>(i)] < out.t[static_cast<std::size_t>(i)]) {
                out.t[static_cast<std::size_t>(i)] = t_l[static_cast<std::size_t>(i)];
                out.ridge[static_cast<std::size_t>(i)] = ridge_l[static_cast<std::size_t>(i)];
                out.in_s[static_cast<std::size_t>(i)] = member_l[static_cast<std::size_t>(i)];
                out.min_slice[static_cast<std::size_t>(i)] = static_cast<int>(sl);
            }
        }
    }
    return out;
}

}  // namespace tcpd
