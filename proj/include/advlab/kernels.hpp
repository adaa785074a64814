#pragma once

// Shared compute kernels. The differentiation graph and the plain inference
// path both call into these, so there is exactly one implementation of every
// numeric rule. Image tensors are [N,C,H,W]; matrices are row-major.
//
// Convolutions are fixed to 3x3 kernels with zero padding 1 and stride 1 or
// 2, lowered to im2col + GEMM.

#include <algorithm>
#include <cmath>

#include "advlab/common.hpp"
#include "advlab/gemm.hpp"
#include "advlab/tensor.hpp"

namespace advlab {

inline int conv_out_dim(int in, int stride) {
    ADVLAB_CHECK(stride == 1 || stride == 2, "conv stride must be 1 or 2, got ", stride);
    return (in + 2 - 3) / stride + 1;
}

// col has rows C*9 and columns N*Ho*Wo.
template <class S>
void im2col(const S* x, int n, int c, int h, int w, int stride, S* col) {
    const int ho = conv_out_dim(h, stride);
    const int wo = conv_out_dim(w, stride);
    const int64_t ncols = int64_t(n) * ho * wo;
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                S* dst = col + (int64_t(ci) * 9 + ky * 3 + kx) * ncols;
                for (int ni = 0; ni < n; ++ni) {
                    const S* src = x + (int64_t(ni) * c + ci) * h * w;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride + ky - 1;
                        if (iy < 0 || iy >= h) {
                            for (int ox = 0; ox < wo; ++ox) *dst++ = S(0);
                            continue;
                        }
                        const S* row = src + int64_t(iy) * w;
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox * stride + kx - 1;
                            *dst++ = (ix >= 0 && ix < w) ? row[ix] : S(0);
                        }
                    }
                }
            }
        }
    }
}

template <class S>
void col2im_add(const S* col, int n, int c, int h, int w, int stride, S* dx) {
    const int ho = conv_out_dim(h, stride);
    const int wo = conv_out_dim(w, stride);
    const int64_t ncols = int64_t(n) * ho * wo;
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const S* src = col + (int64_t(ci) * 9 + ky * 3 + kx) * ncols;
                for (int ni = 0; ni < n; ++ni) {
                    S* dst = dx + (int64_t(ni) * c + ci) * h * w;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride + ky - 1;
                        if (iy < 0 || iy >= h) {
                            src += wo;
                            continue;
                        }
                        S* row = dst + int64_t(iy) * w;
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox * stride + kx - 1;
                            if (ix >= 0 && ix < w) row[ix] += *src;
                            ++src;
                        }
                    }
                }
            }
        }
    }
}

// weight is [OC, C*9]; out is [N,OC,Ho,Wo]; out_mat scratch is [OC, N*Ho*Wo].
template <class S>
void conv2d_fwd(const S* x, const S* weight, int n, int c, int h, int w, int oc,
                int stride, S* col, S* out_mat, S* y) {
    const int ho = conv_out_dim(h, stride);
    const int wo = conv_out_dim(w, stride);
    const int64_t ncols = int64_t(n) * ho * wo;
    im2col(x, n, c, h, w, stride, col);
    gemm_nn(weight, col, out_mat, oc, c * 9, int(ncols));
    const int64_t hw = int64_t(ho) * wo;
    for (int ni = 0; ni < n; ++ni)
        for (int oci = 0; oci < oc; ++oci) {
            const S* src = out_mat + oci * ncols + ni * hw;
            S* dst = y + (int64_t(ni) * oc + oci) * hw;
            std::copy(src, src + hw, dst);
        }
}

template <class S>
void relu_fwd(const S* x, int64_t n, S* y) {
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > S(0) ? x[i] : S(0);
}

// Global average pool [N,C,H,W] -> [N,C].
template <class S>
void gap_fwd(const S* x, int n, int c, int hw, S* y) {
    for (int64_t i = 0; i < int64_t(n) * c; ++i) {
        double acc = 0;
        const S* src = x + i * hw;
        for (int j = 0; j < hw; ++j) acc += double(src[j]);
        y[i] = S(acc / hw);
    }
}

// y[N,out] = x[N,in] * w[in,out] + b[out]
template <class S>
void affine_fwd(const S* x, const S* w, const S* b, int n, int in, int out, S* y) {
    gemm_nn(x, w, y, n, in, out);
    if (b)
        for (int ni = 0; ni < n; ++ni)
            for (int oi = 0; oi < out; ++oi) y[int64_t(ni) * out + oi] += b[oi];
}

// Per-channel batch statistics over N*H*W elements; biased variance.
template <class S>
void bn_batch_stats(const S* x, int n, int c, int hw, S* mean, S* var) {
    const int64_t count = int64_t(n) * hw;
    ADVLAB_CHECK(count > 0, "batch norm needs at least one element per channel");
    for (int ci = 0; ci < c; ++ci) {
        double sum = 0, sq = 0;
        for (int ni = 0; ni < n; ++ni) {
            const S* src = x + (int64_t(ni) * c + ci) * hw;
            for (int j = 0; j < hw; ++j) {
                sum += double(src[j]);
                sq += double(src[j]) * double(src[j]);
            }
        }
        const double m = sum / double(count);
        double v = sq / double(count) - m * m;
        if (v < 0) v = 0;  // cancellation guard
        mean[ci] = S(m);
        var[ci] = S(v);
    }
}

template <class S>
void bn_apply(const S* x, int n, int c, int hw, const S* mean, const S* var,
              const S* gamma, const S* beta, S eps, S* y) {
    for (int ci = 0; ci < c; ++ci) {
        const S inv = S(1) / std::sqrt(var[ci] + eps);
        const S g = gamma[ci] * inv;
        const S b = beta[ci] - gamma[ci] * mean[ci] * inv;
        for (int ni = 0; ni < n; ++ni) {
            const S* src = x + (int64_t(ni) * c + ci) * hw;
            S* dst = y + (int64_t(ni) * c + ci) * hw;
            for (int j = 0; j < hw; ++j) dst[j] = g * src[j] + b;
        }
    }
}

// Per-row log softmax with temperature; max is subtracted inside.
template <class S>
void log_softmax_rows(const S* q, int n, int k, S temperature, S* ls) {
    ADVLAB_CHECK(temperature > S(0), "softmax temperature must be positive, got ",
                 temperature);
    for (int ni = 0; ni < n; ++ni) {
        const S* row = q + int64_t(ni) * k;
        S* out = ls + int64_t(ni) * k;
        S m = row[0];
        for (int i = 1; i < k; ++i) m = std::max(m, row[i]);
        double sum = 0;
        for (int i = 0; i < k; ++i) {
            out[i] = (row[i] - m) / temperature;
            sum += std::exp(double(out[i]));
        }
        const S lse = S(std::log(sum));
        for (int i = 0; i < k; ++i) out[i] -= lse;
    }
}

template <class S>
int argmax_row(const S* row, int k) {
    int best = 0;
    for (int i = 1; i < k; ++i)
        if (row[i] > row[best]) best = i;
    return best;
}

// sign with sign(0) = 0, as used by gradient-sign attacks.
template <class S>
S sgn(S x) {
    return x > S(0) ? S(1) : (x < S(0) ? S(-1) : S(0));
}

}  // namespace advlab
