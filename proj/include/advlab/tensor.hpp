#pragma once

#include <cmath>
#include <cstring>
#include <initializer_list>
#include <vector>

#include "advlab/common.hpp"
#include "advlab/rng.hpp"

namespace advlab {

// Dense row-major tensor. Shapes are small (<= 4 dims); all layout
// bookkeeping lives in the ops that consume the tensor.
template <class S>
struct Tensor {
    Shape shape;
    std::vector<S> v;

    Tensor() = default;
    explicit Tensor(Shape sh) : shape(std::move(sh)), v(size_t(numel(shape)), S(0)) {}
    Tensor(Shape sh, std::vector<S> data) : shape(std::move(sh)), v(std::move(data)) {
        ADVLAB_CHECK(int64_t(v.size()) == numel(shape), "tensor data size ", v.size(),
                     " does not match shape ", shape_str(shape));
    }
    Tensor(Shape sh, std::initializer_list<S> data)
        : Tensor(std::move(sh), std::vector<S>(data)) {}

    int64_t size() const { return int64_t(v.size()); }
    S* data() { return v.data(); }
    const S* data() const { return v.data(); }
    S& operator[](int64_t i) { return v[size_t(i)]; }
    const S& operator[](int64_t i) const { return v[size_t(i)]; }

    int dim(int i) const { return shape[size_t(i)]; }

    static Tensor zeros(Shape sh) { return Tensor(std::move(sh)); }

    static Tensor full(Shape sh, S value) {
        Tensor t(std::move(sh));
        std::fill(t.v.begin(), t.v.end(), value);
        return t;
    }

    static Tensor randn(Shape sh, Rng& rng, S stddev = S(1)) {
        Tensor t(std::move(sh));
        for (auto& x : t.v) x = S(rng.normal()) * stddev;
        return t;
    }

    bool all_finite() const {
        for (S x : v)
            if (!std::isfinite(double(x))) return false;
        return true;
    }

    template <class T>
    Tensor<T> cast() const {
        Tensor<T> out;
        out.shape = shape;
        out.v.resize(v.size());
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = T(v[i]);
        return out;
    }

    uint64_t content_hash() const {
        return fnv1a64(v.data(), v.size() * sizeof(S));
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace advlab
