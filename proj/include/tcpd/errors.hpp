#pragma once

#include <stdexcept>
#include <string>

namespace tcpd {

/// Invalid tuning constants or config-file contents.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input sequence shorter than the detector needs.
class SequenceTooShortError : public std::runtime_error {
public:
    SequenceTooShortError(long long n, long long min_n)
        : std::runtime_error("sequence too short: n = " + std::to_string(n) +
                             ", detector needs n >= 3*alpha = " + std::to_string(min_n)),
          n(n), min_n(min_n) {}
    long long n;
    long long min_n;
};

/// Brownian-argmax grid too narrow: too many paths peaked at the boundary.
class GridTooSmallError : public std::runtime_error {
public:
    GridTooSmallError(double boundary_rate, double suggested_half_width)
        : std::runtime_error("argmax grid too small: boundary rate " + std::to_string(boundary_rate) +
                             " > 0.001, retry with half-width >= " + std::to_string(suggested_half_width)),
          boundary_rate(boundary_rate), suggested_half_width(suggested_half_width) {}
    double boundary_rate;
    double suggested_half_width;
};

/// Malformed data file (bad magic, truncated payload, non-finite values).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tcpd
