#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "scsa/error.hpp"
#include "scsa/rng.hpp"

namespace scsa {

// Extents of a rank 1..4 tensor. Positional semantics follow the host op:
// [B,C,H,W] for rank 4, [B,C,L] for rank 3.
class Shape {
  public:
    Shape() = default;

    Shape(std::initializer_list<std::size_t> dims) {
        if (dims.size() < 1 || dims.size() > 4) {
            throw ShapeError("tensor rank must be 1..4, got " + std::to_string(dims.size()));
        }
        rank_ = dims.size();
        std::size_t i = 0;
        for (std::size_t d : dims) {
            if (d < 1) throw ShapeError("all extents must be >= 1");
            dims_[i++] = d;
        }
    }

    std::size_t rank() const { return rank_; }

    std::size_t operator[](std::size_t i) const {
        assert(i < rank_);
        return dims_[i];
    }

    std::size_t numel() const {
        std::size_t n = 1;
        for (std::size_t i = 0; i < rank_; ++i) n *= dims_[i];
        return rank_ == 0 ? 0 : n;
    }

    bool operator==(const Shape& other) const {
        if (rank_ != other.rank_) return false;
        for (std::size_t i = 0; i < rank_; ++i) {
            if (dims_[i] != other.dims_[i]) return false;
        }
        return true;
    }
    bool operator!=(const Shape& other) const { return !(*this == other); }

    std::string str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < rank_; ++i) {
            if (i) s += ",";
            s += std::to_string(dims_[i]);
        }
        return s + "]";
    }

  private:
    std::array<std::size_t, 4> dims_{};
    std::size_t rank_ = 0;
};

// Dense row-major tensor. The universal value type of the library; real
// scalar type is double for everything that feeds gradient checking and
// float for the benchmark path.
template <class T>
struct TensorT {
    Shape shape;
    std::vector<T> data;

    TensorT() = default;

    explicit TensorT(Shape s) : shape(s), data(s.numel(), T(0)) {}

    TensorT(Shape s, std::vector<T> values) : shape(s), data(std::move(values)) {
        if (shape.numel() != data.size()) {
            throw ShapeError("data size " + std::to_string(data.size()) +
                             " does not match shape " + shape.str());
        }
    }

    static TensorT zeros(Shape s) { return TensorT(s); }

    static TensorT full(Shape s, T value) {
        TensorT t(s);
        std::fill(t.data.begin(), t.data.end(), value);
        return t;
    }

    static TensorT rand_uniform(Shape s, Rng& rng, T lo = T(-1), T hi = T(1)) {
        TensorT t(s);
        for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
        return t;
    }

    static TensorT rand_normal(Shape s, Rng& rng, T mean = T(0), T stddev = T(1)) {
        TensorT t(s);
        for (auto& v : t.data) v = static_cast<T>(rng.normal(mean, stddev));
        return t;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.rank(); }

    T& operator[](std::size_t i) {
        assert(i < data.size());
        return data[i];
    }
    T operator[](std::size_t i) const {
        assert(i < data.size());
        return data[i];
    }

    // Row-major accessors; rank is asserted in debug builds.
    T& at2(std::size_t i, std::size_t j) {
        assert(rank() == 2);
        return data[i * shape[1] + j];
    }
    T at2(std::size_t i, std::size_t j) const {
        assert(rank() == 2);
        return data[i * shape[1] + j];
    }
    T& at3(std::size_t b, std::size_t c, std::size_t l) {
        assert(rank() == 3);
        return data[(b * shape[1] + c) * shape[2] + l];
    }
    T at3(std::size_t b, std::size_t c, std::size_t l) const {
        assert(rank() == 3);
        return data[(b * shape[1] + c) * shape[2] + l];
    }
    T& at4(std::size_t b, std::size_t c, std::size_t h, std::size_t w) {
        assert(rank() == 4);
        return data[((b * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    T at4(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const {
        assert(rank() == 4);
        return data[((b * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }

    bool all_finite() const {
        for (T v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }
};

using Tensor = TensorT<double>;
using TensorF = TensorT<float>;

template <class T>
inline void check_finite(const TensorT<T>& t, const char* where) {
#ifndef NDEBUG
    if (!t.all_finite()) {
        throw NumericError(std::string("non-finite value produced by ") + where);
    }
#else
    (void)t;
    (void)where;
#endif
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) {
        throw ShapeError("max_abs_diff: shape mismatch " + a.shape.str() + " vs " + b.shape.str());
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    }
    return m;
}

}  // namespace scsa
