#pragma once

#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "kseg/errors.hpp"

namespace kseg {

// Dense row-major tensor. The network engine uses the float instantiation;
// the loss functions are also instantiated with double so analytic gradients
// can be checked against finite differences at full precision.
template <class T>
struct TensorT {
    std::vector<long> shape;
    std::vector<T> v;

    TensorT() = default;
    explicit TensorT(std::vector<long> s, T fill = T(0))
        : shape(std::move(s)), v(numel_of(shape), fill) {}

    static long numel_of(const std::vector<long>& s) {
        long n = 1;
        for (long d : s) n *= d;
        return n;
    }

    long numel() const { return static_cast<long>(v.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    long dim(int i) const { return shape[static_cast<size_t>(i)]; }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    void fill(T x) { std::fill(v.begin(), v.end(), x); }
    void zero() { fill(T(0)); }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }
};

using Tensor = TensorT<float>;

template <class T>
TensorT<T> like(const TensorT<T>& t, T fill = T(0)) {
    return TensorT<T>(t.shape, fill);
}

template <class T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* what) {
    if (!a.same_shape(b)) throw ArgumentError(std::string(what) + ": tensor shape mismatch");
}

}  // namespace kseg
