#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "tcpd/errors.hpp"
#include "tcpd/tensor.hpp"

namespace tcpd {

enum class DetectMode { sfd, msfd };

/// Tuning constants of the screening norm and the adaptive ridge.
/// Defaults follow the recommended choices: alpha_n = floor(2 n^{3/4} / 9),
/// nu = 0.55, s1 = 1/50, s = 2.5 s1 (SFD) or 10 s1 (MSFD), and the exponent
/// (log n)^{1/2+eps} with eps = 0.05 so it matches the (log n)^{0.55} form.
struct ScreeningParams {
    long long n = 0;
    int alpha = 0;
    double eps = 0.05;
    double nu = 0.55;
    double s = 0.05;
    double s1 = 0.02;

    /// eps_n = (log n)^{1/2+eps} / sqrt(alpha_n)
    double eps_n() const { return std::pow(std::log(static_cast<double>(n)), 0.5 + eps) / std::sqrt(static_cast<double>(alpha)); }
    /// l_n(s) = s * eps_n * (log n)^{1/2}
    double l_n() const { return s * eps_n() * std::sqrt(std::log(static_cast<double>(n))); }

    void validate() const {
        if (n < 1) throw ConfigError("params: n must be >= 1");
        if (alpha < 1) throw ConfigError("params: alpha must be >= 1");
        if (!(eps > 0)) throw ConfigError("params: eps must be > 0");
        if (!(nu > 0.5)) throw ConfigError("params: nu must be > 1/2");
        if (!(s > 0)) throw ConfigError("params: s must be > 0");
        if (!(s1 > 0)) throw ConfigError("params: s1 must be > 0");
    }
};

/// Optional user overrides applied on top of the derived defaults.
struct ParamOverrides {
    std::optional<int> alpha;
    std::optional<double> eps, nu, s, s1;
};

/// Default window size alpha_n = floor(2 n^{3/4} / 9).
inline int default_alpha(long long n) {
    return static_cast<int>(std::floor(2.0 * std::pow(static_cast<double>(n), 0.75) / 9.0));
}

/// Fill the recommended constants for a sequence of length n, then apply
/// overrides. Overrides violating the invariants raise ConfigError.
inline ScreeningParams derive_params(long long n, DetectMode mode, const ParamOverrides& over = {}) {
    if (n < 30) throw ConfigError("derive_params: n must be >= 30");
    ScreeningParams p;
    p.n = n;
    p.alpha = over.alpha.value_or(default_alpha(n));
    p.eps = over.eps.value_or(0.05);
    p.nu = over.nu.value_or(0.55);
    p.s1 = over.s1.value_or(1.0 / 50.0);
    p.s = over.s.value_or(mode == DetectMode::sfd ? 2.5 * p.s1 : 10.0 * p.s1);
    p.validate();
    return p;
}

/// Signal-screening squared norm with threshold l:
///   (sum_j v_j^2 1{v_j^2 > l}) / (sum_j 1{v_j^2 > l} + 1/n).
/// With l = 0 this is the ||.||_{0s}^2 norm. Total on finite inputs.
inline double screening_norm(std::span<const double> values, double l, long long n) {
    double num = 0.0;
    long long cnt = 0;
    for (double v : values) {
        const double v2 = v * v;
        if (v2 > l) {
            num += v2;
            ++cnt;
        }
    }
    return num / (static_cast<double>(cnt) + 1.0 / static_cast<double>(n));
}

/// True iff any element satisfies v^2 > l (strict). With l = 0 this is the
/// population signal-set test.
inline bool in_signal_set(std::span<const double> values, double l) {
    for (double v : values)
        if (v * v > l) return true;
    return false;
}

/// Total screened mass sum_j v_j^2 1{v_j^2 > l}; the detector's sample
/// signal-set rule compares it against (element count) * l.
inline double screened_mass(std::span<const double> values, double l) {
    double num = 0.0;
    for (double v : values) {
        const double v2 = v * v;
        if (v2 > l) num += v2;
    }
    return num;
}

}  // namespace tcpd
