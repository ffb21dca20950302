#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tcpd/rng.hpp"
#include "tcpd/screening.hpp"
#include "tcpd/tensor.hpp"

namespace tcpd {

enum class NoiseKind { iid_gaussian, row_correlated, per_element };

/// Error model for the generator. Rows (mode-kappa fibers) are independent;
/// `row_cov` is the p_kappa x p_kappa covariance of one fiber when
/// kind == row_correlated.
struct NoiseModel {
    NoiseKind kind = NoiseKind::iid_gaussian;
    double sigma = 1.0;
    std::vector<double> row_cov;     // row-major p_k x p_k
    std::vector<double> elem_sigma;  // per flattened element
};

/// AR(1)-style covariance with entries rho^|i-j|.
inline std::vector<double> ar_covariance(long long dim, double rho) {
    std::vector<double> cov(static_cast<std::size_t>(dim * dim));
    for (long long i = 0; i < dim; ++i)
        for (long long j = 0; j < dim; ++j)
            cov[static_cast<std::size_t>(i * dim + j)] = std::pow(rho, std::abs(static_cast<double>(i - j)));
    return cov;
}

/// Ground-truth description of a piecewise-constant tensor mean sequence.
struct SimSpec {
    Shape shape;
    long long n = 0;
    std::vector<long long> changepoints;            // z_1 < ... < z_K, inside (0, n)
    std::vector<std::vector<double>> seg_means;     // K+1 flattened mean tensors
    NoiseModel noise;
    std::uint64_t seed = 1;
    std::string label;

    long long K() const { return static_cast<long long>(changepoints.size()); }

    /// 0-based segment index of time i (1-based): E(X_i) = seg_means[segment_of(i)].
    std::size_t segment_of(long long i) const {
        std::size_t k = 0;
        while (k < changepoints.size() && i > changepoints[k]) ++k;
        return k;
    }

    /// Hard validation; returns soft warnings (spacing vs the default window,
    /// zero jumps between adjacent segments).
    std::vector<std::string> validate() const {
        if (n < 1) throw std::invalid_argument("SimSpec: n must be >= 1");
        const long long p = shape.elem_count();
        long long prev = 0;
        for (long long z : changepoints) {
            if (z <= prev || z >= n)
                throw std::invalid_argument("SimSpec: change points must be sorted, distinct, inside (0, n)");
            prev = z;
        }
        if (seg_means.size() != changepoints.size() + 1)
            throw std::invalid_argument("SimSpec: need K+1 segment means");
        for (const auto& m : seg_means)
            if (static_cast<long long>(m.size()) != p)
                throw std::invalid_argument("SimSpec: segment mean length != element count");
        switch (noise.kind) {
            case NoiseKind::iid_gaussian:
                if (!(noise.sigma >= 0)) throw std::invalid_argument("SimSpec: sigma must be >= 0");
                break;
            case NoiseKind::row_correlated: {
                const long long pk = shape.dim(shape.order());
                if (static_cast<long long>(noise.row_cov.size()) != pk * pk)
                    throw std::invalid_argument("SimSpec: row covariance must be p_kappa x p_kappa");
                break;
            }
            case NoiseKind::per_element:
                if (static_cast<long long>(noise.elem_sigma.size()) != p)
                    throw std::invalid_argument("SimSpec: per-element sigma length != element count");
                break;
        }

        std::vector<std::string> warnings;
        if (!changepoints.empty() && n >= 30) {
            long long min_spacing = changepoints.front();
            for (std::size_t k = 1; k < changepoints.size(); ++k)
                min_spacing = std::min(min_spacing, changepoints[k] - changepoints[k - 1]);
            min_spacing = std::min(min_spacing, n - changepoints.back());
            const int a = default_alpha(n);
            if (min_spacing < 2LL * a)
                warnings.push_back("minimum spacing " + std::to_string(min_spacing) +
                                   " is below 2*alpha_n = " + std::to_string(2 * a) +
                                   " for the default window; detection may merge changes");
        }
        for (std::size_t k = 0; k + 1 < seg_means.size(); ++k)
            if (seg_means[k] == seg_means[k + 1])
                warnings.push_back("segments " + std::to_string(k + 1) + " and " + std::to_string(k + 2) +
                                   " have identical means; effective K is reduced");
        return warnings;
    }
};

/// Draw X_i = M^(seg(i)) + noise, deterministic under spec.seed.
inline TensorSeq gen_custom(const SimSpec& spec) {
    spec.validate();
    const long long p = spec.shape.elem_count();
    const long long pk = spec.shape.dim(spec.shape.order());
    const long long fibers = p / pk;
    std::vector<double> data(static_cast<std::size_t>(spec.n * p));
    std::mt19937_64 eng = make_engine(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    Eigen::MatrixXd chol;  // lower factor when row_correlated
    if (spec.noise.kind == NoiseKind::row_correlated) {
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> cov(
            spec.noise.row_cov.data(), pk, pk);
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument("gen_custom: row covariance is not positive definite");
        chol = llt.matrixL();
    }

    std::vector<double> z(static_cast<std::size_t>(pk));
    for (long long i = 1; i <= spec.n; ++i) {
        const std::vector<double>& mean = spec.seg_means[spec.segment_of(i)];
        double* row = data.data() + (i - 1) * p;
        for (long long f = 0; f < fibers; ++f) {
            for (long long j = 0; j < pk; ++j) z[static_cast<std::size_t>(j)] = normal(eng);
            double* fiber = row + f * pk;
            switch (spec.noise.kind) {
                case NoiseKind::iid_gaussian:
                    for (long long j = 0; j < pk; ++j)
                        fiber[j] = spec.noise.sigma * z[static_cast<std::size_t>(j)];
                    break;
                case NoiseKind::per_element:
                    for (long long j = 0; j < pk; ++j)
                        fiber[j] = spec.noise.elem_sigma[static_cast<std::size_t>(f * pk + j)] *
                                   z[static_cast<std::size_t>(j)];
                    break;
                case NoiseKind::row_correlated:
                    for (long long j = 0; j < pk; ++j) {
                        double acc = 0.0;
                        for (long long k = 0; k <= j; ++k) acc += chol(j, k) * z[static_cast<std::size_t>(k)];
                        fiber[j] = acc;
                    }
                    break;
            }
            for (long long j = 0; j < pk; ++j) fiber[j] += mean[static_cast<std::size_t>(f * pk + j)];
        }
    }
    return TensorSeq(spec.shape, spec.n, std::move(data));
}

namespace detail {

inline std::vector<long long> table_changepoints() { return {200, 400, 600, 800, 1000, 1200, 1400, 1600}; }

inline std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace detail

/// Order-one benchmark design: nine segments on n = 1800 alternating between
/// an all-(1+signal) mean (segments 1,3,5,7,9) and an all-ones mean, with
/// N(0, I_p) errors. signal = 0.4 and 0.2 are the tabulated strong/weak runs.
inline std::pair<TensorSeq, SimSpec> gen_dense_order1(long long p, double signal, std::uint64_t seed) {
    if (p < 1) throw std::invalid_argument("gen_dense_order1: p must be >= 1");
    SimSpec spec;
    spec.shape = Shape({p});
    spec.n = 1800;
    spec.changepoints = detail::table_changepoints();
    const std::vector<double> mu1(static_cast<std::size_t>(p), 1.0 + signal);
    const std::vector<double> mu2(static_cast<std::size_t>(p), 1.0);
    for (int k = 0; k < 9; ++k) spec.seg_means.push_back(k % 2 == 0 ? mu1 : mu2);
    spec.noise.kind = NoiseKind::iid_gaussian;
    spec.noise.sigma = 1.0;
    spec.seed = seed;
    spec.label = "dense-order1 p=" + std::to_string(p) + " signal=" + detail::fmt_num(signal);
    return {gen_custom(spec), spec};
}

enum class Order2Design { symmetric, asymmetric };

/// Order-two benchmark design. Symmetric (p2 = p1): all mean entries jump
/// between 1.4 and 1. Asymmetric (p2 = 16*p1): the lower triangle of the
/// first mean follows 0.8^|i-j| and everything else is 1, so only the first
/// p1 columns ever change. Rows of the error matrix are independent
/// N(0, Sigma~); Sigma~ defaults to identity, or 0.8^|i-j| when
/// correlated_rows is set (a preset choice; the tables do not print it).
inline std::pair<TensorSeq, SimSpec> gen_order2(long long p1, long long p2, Order2Design design,
                                                bool correlated_rows, std::uint64_t seed) {
    if (p1 < 1 || p2 < 1) throw std::invalid_argument("gen_order2: dimensions must be >= 1");
    if (design == Order2Design::symmetric && p2 != p1)
        throw std::invalid_argument("gen_order2: symmetric design needs p2 = p1");
    if (design == Order2Design::asymmetric && p2 != 16 * p1)
        throw std::invalid_argument("gen_order2: asymmetric design needs p2 = 16*p1");
    SimSpec spec;
    spec.shape = Shape({p1, p2});
    spec.n = 1800;
    spec.changepoints = detail::table_changepoints();
    std::vector<double> m1(static_cast<std::size_t>(p1 * p2), 1.0);
    const std::vector<double> m2(static_cast<std::size_t>(p1 * p2), 1.0);
    if (design == Order2Design::symmetric) {
        std::fill(m1.begin(), m1.end(), 1.4);
    } else {
        for (long long i = 1; i <= p1; ++i)
            for (long long j = 1; j <= p2; ++j)
                if (j <= i)
                    m1[static_cast<std::size_t>((i - 1) * p2 + (j - 1))] =
                        std::pow(0.8, std::abs(static_cast<double>(i - j)));
    }
    for (int k = 0; k < 9; ++k) spec.seg_means.push_back(k % 2 == 0 ? m1 : m2);
    if (correlated_rows) {
        spec.noise.kind = NoiseKind::row_correlated;
        spec.noise.row_cov = ar_covariance(p2, 0.8);
    } else {
        spec.noise.kind = NoiseKind::iid_gaussian;
        spec.noise.sigma = 1.0;
    }
    spec.seed = seed;
    spec.label = std::string("order2-") + (design == Order2Design::symmetric ? "symmetric" : "asymmetric") +
                 " p1=" + std::to_string(p1) + " p2=" + std::to_string(p2) +
                 (correlated_rows ? " rows=ar(0.8)" : " rows=iid");
    return {gen_custom(spec), spec};
}

/// Sparse order-one preset: only floor(sparsity * p) leading coordinates
/// jump by `signal`; the rest stay at the baseline.
inline SimSpec make_sparse_order1_spec(long long p, double signal, double sparsity, std::uint64_t seed) {
    if (p < 1) throw std::invalid_argument("make_sparse_order1_spec: p must be >= 1");
    if (!(sparsity > 0.0 && sparsity <= 1.0))
        throw std::invalid_argument("make_sparse_order1_spec: sparsity must lie in (0, 1]");
    SimSpec spec;
    spec.shape = Shape({p});
    spec.n = 1800;
    spec.changepoints = detail::table_changepoints();
    std::vector<double> mu1(static_cast<std::size_t>(p), 1.0);
    const long long changed = std::max(1LL, static_cast<long long>(std::floor(sparsity * static_cast<double>(p))));
    for (long long j = 0; j < changed; ++j) mu1[static_cast<std::size_t>(j)] = 1.0 + signal;
    const std::vector<double> mu2(static_cast<std::size_t>(p), 1.0);
    for (int k = 0; k < 9; ++k) spec.seg_means.push_back(k % 2 == 0 ? mu1 : mu2);
    spec.noise.kind = NoiseKind::iid_gaussian;
    spec.noise.sigma = 1.0;
    spec.seed = seed;
    spec.label = "sparse-order1 p=" + std::to_string(p) + " signal=" + detail::fmt_num(signal) +
                 " sparsity=" + detail::fmt_num(sparsity);
    return spec;
}

}  // namespace tcpd
