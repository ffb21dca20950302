#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tcpd/errors.hpp"

namespace tcpd {

/// Tensor shape (p_1, ..., p_kappa). Public indices are 1-based to match the
/// usual multi-index notation; flat storage is 0-based row-major.
class Shape {
public:
    Shape() = default;
    explicit Shape(std::vector<long long> dims) : dims_(std::move(dims)) {
        if (dims_.empty()) throw std::invalid_argument("Shape: order must be >= 1");
        long long p = 1;
        for (long long d : dims_) {
            if (d < 1) throw std::invalid_argument("Shape: every dimension must be >= 1");
            if (p > std::numeric_limits<long long>::max() / d)
                throw std::invalid_argument("Shape: element count overflows");
            p *= d;
        }
        elem_count_ = p;
    }
    Shape(std::initializer_list<long long> dims) : Shape(std::vector<long long>(dims)) {}

    int order() const { return static_cast<int>(dims_.size()); }
    long long dim(int mode) const { return dims_.at(static_cast<std::size_t>(mode - 1)); }
    const std::vector<long long>& dims() const { return dims_; }
    long long elem_count() const { return elem_count_; }

    /// Row-major stride of `mode` (1-based): product of trailing dims.
    long long stride(int mode) const {
        long long s = 1;
        for (int m = order(); m > mode; --m) s *= dim(m);
        return s;
    }

    bool operator==(const Shape& o) const { return dims_ == o.dims_; }

private:
    std::vector<long long> dims_;
    long long elem_count_ = 0;
};

/// Row-major flat index of a 1-based multi-index.
inline long long flatten_index(std::span<const long long> multi, const Shape& shape) {
    if (static_cast<int>(multi.size()) != shape.order())
        throw std::out_of_range("flatten_index: multi-index order mismatch");
    long long flat = 0;
    for (int m = 1; m <= shape.order(); ++m) {
        long long idx = multi[static_cast<std::size_t>(m - 1)];
        if (idx < 1 || idx > shape.dim(m))
            throw std::out_of_range("flatten_index: component " + std::to_string(m) +
                                    " = " + std::to_string(idx) + " outside [1, " +
                                    std::to_string(shape.dim(m)) + "]");
        flat = flat * shape.dim(m) + (idx - 1);
    }
    return flat;
}

inline long long flatten_index(std::initializer_list<long long> multi, const Shape& shape) {
    return flatten_index(std::span<const long long>(multi.begin(), multi.size()), shape);
}

/// Inverse of flatten_index; returns the 1-based multi-index.
inline std::vector<long long> unflatten_index(long long flat, const Shape& shape) {
    if (flat < 0 || flat >= shape.elem_count())
        throw std::out_of_range("unflatten_index: flat index outside [0, p)");
    std::vector<long long> multi(static_cast<std::size_t>(shape.order()));
    for (int m = shape.order(); m >= 1; --m) {
        multi[static_cast<std::size_t>(m - 1)] = flat % shape.dim(m) + 1;
        flat /= shape.dim(m);
    }
    return multi;
}

/// Length-n sequence of order-kappa tensors with common shape, stored as an
/// n x p row-major array (one flattened tensor per time index). Immutable
/// after construction; safe to share across threads read-only.
class TensorSeq {
public:
    TensorSeq(Shape shape, long long n, std::vector<double> data)
        : shape_(std::move(shape)), n_(n), data_(std::move(data)) {
        if (n_ < 1) throw std::invalid_argument("TensorSeq: n must be >= 1");
        if (static_cast<long long>(data_.size()) != n_ * shape_.elem_count())
            throw std::invalid_argument("TensorSeq: data length " + std::to_string(data_.size()) +
                                        " != n*p = " + std::to_string(n_ * shape_.elem_count()));
        for (std::size_t k = 0; k < data_.size(); ++k) {
            if (!std::isfinite(data_[k])) {
                const long long p = shape_.elem_count();
                throw FormatError("TensorSeq: non-finite value at time " +
                                  std::to_string(static_cast<long long>(k) / p + 1) +
                                  ", flat element " + std::to_string(static_cast<long long>(k) % p));
            }
        }
    }

    const Shape& shape() const { return shape_; }
    long long n() const { return n_; }
    long long p() const { return shape_.elem_count(); }

    /// Flattened tensor at time i (1-based).
    std::span<const double> row(long long i) const {
        check_time(i);
        return {data_.data() + (i - 1) * p(), static_cast<std::size_t>(p())};
    }

    double value(long long i, std::span<const long long> multi) const {
        return row(i)[static_cast<std::size_t>(flatten_index(multi, shape_))];
    }

    const std::vector<double>& data() const { return data_; }

private:
    void check_time(long long i) const {
        if (i < 1 || i > n_) throw std::out_of_range("TensorSeq: time index outside [1, n]");
    }

    Shape shape_;
    long long n_;
    std::vector<double> data_;
};

/// View of the mode-`mode` slices at slice index l: the sub-sequence
/// X_{i,l}. No copy; element access is index arithmetic into the parent.
class SliceSeq {
public:
    SliceSeq(const TensorSeq& parent, int mode, long long l)
        : parent_(&parent), mode_(mode), l_(l) {
        const Shape& ps = parent.shape();
        if (mode < 1 || mode > ps.order())
            throw std::invalid_argument("slice_mode: mode " + std::to_string(mode) +
                                        " outside [1, " + std::to_string(ps.order()) + "]");
        if (l < 1 || l > ps.dim(mode))
            throw std::invalid_argument("slice_mode: slice index " + std::to_string(l) +
                                        " outside [1, " + std::to_string(ps.dim(mode)) + "]");
        inner_ = ps.stride(mode);
        outer_count_ = ps.elem_count() / (ps.dim(mode) * inner_);
        base_ = (l - 1) * inner_;
        block_ = ps.dim(mode) * inner_;
        std::vector<long long> dims;
        for (int m = 1; m <= ps.order(); ++m)
            if (m != mode) dims.push_back(ps.dim(m));
        if (dims.empty()) dims.push_back(1);  // order-1 parent: scalar slices
        shape_ = Shape(dims);
    }

    const Shape& shape() const { return shape_; }
    long long elem_count() const { return outer_count_ * inner_; }
    long long n() const { return parent_->n(); }
    int mode() const { return mode_; }
    long long slice_index() const { return l_; }

    /// Flat offset of slice element j within the parent's flattened tensor.
    long long parent_offset(long long j) const {
        const long long outer = j / inner_;
        const long long inner = j % inner_;
        return outer * block_ + base_ + inner;
    }

    /// Value of slice element j (0-based) at time i (1-based).
    double value(long long i, long long j) const { return parent_->row(i)[static_cast<std::size_t>(parent_offset(j))]; }

    /// Materialize the slice values at time i.
    std::vector<double> at_time(long long i) const {
        std::vector<double> out(static_cast<std::size_t>(elem_count()));
        auto r = parent_->row(i);
        for (long long j = 0; j < elem_count(); ++j) out[static_cast<std::size_t>(j)] = r[static_cast<std::size_t>(parent_offset(j))];
        return out;
    }

private:
    const TensorSeq* parent_;
    int mode_;
    long long l_;
    long long inner_ = 1, outer_count_ = 1, base_ = 0, block_ = 1;
    Shape shape_;
};

inline SliceSeq slice_mode(const TensorSeq& seq, int mode, long long l) { return SliceSeq(seq, mode, l); }

}  // namespace tcpd
