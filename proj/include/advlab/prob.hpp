#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "advlab/common.hpp"
#include "advlab/tensor.hpp"

namespace advlab {

// Probability vector with an explicit validity check. Construction via
// from_raw verifies non-negativity and unit mass; softmax output is valid by
// construction and skips the scan.
template <class S>
struct ProbVector {
    std::vector<S> p;

    static ProbVector from_raw(std::vector<S> raw, double tol = 1e-5) {
        ProbVector out;
        out.p = std::move(raw);
        out.validate(tol);
        return out;
    }

    static ProbVector trusted(std::vector<S> raw) {
        ProbVector out;
        out.p = std::move(raw);
        return out;
    }

    static ProbVector one_hot(int k, int cls) {
        ADVLAB_CHECK(cls >= 0 && cls < k, "one_hot class ", cls, " out of range for k=", k);
        ProbVector out;
        out.p.assign(size_t(k), S(0));
        out.p[size_t(cls)] = S(1);
        return out;
    }

    void validate(double tol = 1e-5) const {
        double sum = 0;
        for (size_t i = 0; i < p.size(); ++i) {
            ADVLAB_CHECK(std::isfinite(double(p[i])) && p[i] >= S(0),
                         "probability vector entry ", i, " is invalid (", p[i], ")");
            sum += double(p[i]);
        }
        ADVLAB_CHECK(std::abs(sum - 1.0) <= tol, "probability vector sums to ", sum,
                     ", not 1 (tol ", tol, ")");
    }

    size_t size() const { return p.size(); }
    S operator[](size_t i) const { return p[i]; }

    int argmax() const {
        // Ties resolve to the lowest index.
        int best = 0;
        for (size_t i = 1; i < p.size(); ++i)
            if (p[i] > p[best]) best = int(i);
        return best;
    }
};

// Softmax with the logits divided by temperature T before exponentiation.
// The row max is subtracted first so large logits cannot overflow.
template <class S>
ProbVector<S> softmax_temperature(const std::vector<S>& q, S temperature) {
    ADVLAB_CHECK(!q.empty(), "softmax_temperature on empty logits");
    ADVLAB_CHECK(temperature > S(0) && std::isfinite(double(temperature)),
                 "softmax temperature must be positive and finite, got ", temperature);
    for (size_t i = 0; i < q.size(); ++i)
        ADVLAB_CHECK(std::isfinite(double(q[i])), "softmax logit ", i, " is not finite");
    S m = *std::max_element(q.begin(), q.end());
    std::vector<S> e(q.size());
    double sum = 0;
    for (size_t i = 0; i < q.size(); ++i) {
        e[i] = std::exp((q[i] - m) / temperature);
        sum += double(e[i]);
    }
    for (auto& x : e) x = S(double(x) / sum);
    return ProbVector<S>::trusted(std::move(e));
}

namespace detail {
template <class S>
void check_pair(const ProbVector<S>& a, const ProbVector<S>& b, const char* op) {
    ADVLAB_CHECK(a.size() == b.size(), op, " on mismatched lengths ", a.size(), " vs ",
                 b.size());
    a.validate();
    b.validate();
}
}  // namespace detail

// Soft-label cross entropy -sum_i y_i log p_i. Log arguments are clamped at
// the precision-dependent floor, so a zero predicted probability yields a
// large finite loss instead of inf.
template <class S>
S sce_soft(const ProbVector<S>& y, const ProbVector<S>& p) {
    detail::check_pair(y, p, "sce_soft");
    double acc = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (y[i] == S(0)) continue;
        acc -= double(y[i]) * std::log(double(std::max(p[i], prob_floor<S>)));
    }
    return S(acc);
}

// KL divergence sum_i p_i log(p_i / q_i) with the 0 log 0 = 0 convention.
template <class S>
S kld(const ProbVector<S>& p, const ProbVector<S>& q) {
    detail::check_pair(p, q, "kld");
    double acc = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] == S(0)) continue;
        double pi = double(std::max(p[i], prob_floor<S>));
        double qi = double(std::max(q[i], prob_floor<S>));
        acc += double(p[i]) * (std::log(pi) - std::log(qi));
    }
    return S(acc);
}

template <class S>
S entropy(const ProbVector<S>& p) {
    p.validate();
    double acc = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] == S(0)) continue;
        acc -= double(p[i]) * std::log(double(std::max(p[i], prob_floor<S>)));
    }
    return S(acc);
}

}  // namespace advlab
