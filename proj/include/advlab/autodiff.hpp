#pragma once

// Define-by-run reverse-mode differentiation over a fixed primitive set:
// elementwise arithmetic, affine, 3x3 convolution (stride 1/2, pad 1), relu,
// global average pooling, batch norm, tempered log-softmax, exp, floored
// log, and sum. Forward values are computed eagerly as nodes are built;
// backward walks the tape in reverse. One graph belongs to one thread.
//
// Graph ops never touch state outside the graph; batch-norm running-average
// updates are the model's job, which reads the saved batch statistics off
// the node after building it.

#include <array>
#include <cmath>
#include <vector>

#include "advlab/common.hpp"
#include "advlab/kernels.hpp"
#include "advlab/tensor.hpp"

namespace advlab {

enum class Op : uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Scale,
    Matmul,
    AddRow,
    Conv2d,
    Relu,
    Gap,
    BnTrain,
    BnEval,
    LogSoftmaxT,
    Exp,
    LogFloor,
    Sum,
};

template <class S>
class Graph {
  public:
    int leaf(const Tensor<S>& t, bool requires_grad) {
        Node n;
        n.op = Op::Leaf;
        n.shape = t.shape;
        n.val = t.v;
        n.needs_grad = requires_grad;
        return push(std::move(n));
    }

    int constant(const Tensor<S>& t) { return leaf(t, false); }

    int add(int a, int b) { return binary(Op::Add, a, b); }
    int sub(int a, int b) { return binary(Op::Sub, a, b); }
    int mul(int a, int b) { return binary(Op::Mul, a, b); }

    int scale(int a, S factor) {
        Node n = unary_like(Op::Scale, a);
        n.s0 = factor;
        for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = factor * at(a).val[i];
        return push(std::move(n));
    }

    // x[N,in] * w[in,out]
    int matmul(int x, int w) {
        const Shape& xs = at(x).shape;
        const Shape& ws = at(w).shape;
        ADVLAB_CHECK(xs.size() == 2 && ws.size() == 2 && xs[1] == ws[0],
                     "matmul shape mismatch ", shape_str(xs), " x ", shape_str(ws));
        Node n;
        n.op = Op::Matmul;
        n.a = x;
        n.b = w;
        n.shape = {xs[0], ws[1]};
        n.val.resize(size_t(numel(n.shape)));
        gemm_nn(at(x).val.data(), at(w).val.data(), n.val.data(), xs[0], xs[1], ws[1]);
        n.needs_grad = at(x).needs_grad || at(w).needs_grad;
        return push(std::move(n));
    }

    // x[N,k] + row vector b[k]
    int add_row(int x, int b) {
        const Shape& xs = at(x).shape;
        const Shape& bs = at(b).shape;
        ADVLAB_CHECK(xs.size() == 2 && bs.size() == 1 && bs[0] == xs[1],
                     "add_row shape mismatch ", shape_str(xs), " + ", shape_str(bs));
        Node n;
        n.op = Op::AddRow;
        n.a = x;
        n.b = b;
        n.shape = xs;
        n.val.resize(at(x).val.size());
        const int rows = xs[0], k = xs[1];
        for (int r = 0; r < rows; ++r)
            for (int i = 0; i < k; ++i)
                n.val[size_t(r) * k + i] = at(x).val[size_t(r) * k + i] + at(b).val[size_t(i)];
        n.needs_grad = at(x).needs_grad || at(b).needs_grad;
        return push(std::move(n));
    }

    // x[N,C,H,W] conv w[OC,C*9], zero pad 1, stride 1 or 2.
    int conv2d(int x, int w, int stride) {
        const Shape& xs = at(x).shape;
        const Shape& ws = at(w).shape;
        ADVLAB_CHECK(xs.size() == 4, "conv2d input must be [N,C,H,W], got ", shape_str(xs));
        ADVLAB_CHECK(ws.size() == 2 && ws[1] == xs[1] * 9, "conv2d weight must be [OC,C*9] with C=",
                     xs[1], ", got ", shape_str(ws));
        const int N = xs[0], C = xs[1], H = xs[2], W = xs[3], OC = ws[0];
        const int Ho = conv_out_dim(H, stride), Wo = conv_out_dim(W, stride);
        Node n;
        n.op = Op::Conv2d;
        n.a = x;
        n.b = w;
        n.i0 = stride;
        n.shape = {N, OC, Ho, Wo};
        n.val.resize(size_t(numel(n.shape)));
        const int64_t ncols = int64_t(N) * Ho * Wo;
        n.aux.resize(size_t(C) * 9 * ncols);          // im2col, reused in backward
        std::vector<S> out_mat(size_t(OC) * ncols);
        conv2d_fwd(at(x).val.data(), at(w).val.data(), N, C, H, W, OC, stride,
                   n.aux.data(), out_mat.data(), n.val.data());
        n.needs_grad = at(x).needs_grad || at(w).needs_grad;
        return push(std::move(n));
    }

    int relu(int a) {
        Node n = unary_like(Op::Relu, a);
        relu_fwd(at(a).val.data(), int64_t(n.val.size()), n.val.data());
        return push(std::move(n));
    }

    // [N,C,H,W] -> [N,C]
    int gap(int a) {
        const Shape& xs = at(a).shape;
        ADVLAB_CHECK(xs.size() == 4, "gap input must be [N,C,H,W], got ", shape_str(xs));
        Node n;
        n.op = Op::Gap;
        n.a = a;
        n.shape = {xs[0], xs[1]};
        n.val.resize(size_t(numel(n.shape)));
        gap_fwd(at(a).val.data(), xs[0], xs[1], xs[2] * xs[3], n.val.data());
        n.needs_grad = at(a).needs_grad;
        return push(std::move(n));
    }

    // Batch statistics normalization, differentiable through the statistics.
    // Saved batch mean/var are readable via bn_batch_mean/bn_batch_var.
    int bn_train(int x, int gamma, int beta, S eps) {
        const Shape& xs = at(x).shape;
        ADVLAB_CHECK(xs.size() == 4, "bn_train input must be [N,C,H,W], got ", shape_str(xs));
        const int C = xs[1];
        check_bn_param(gamma, C, "gamma");
        check_bn_param(beta, C, "beta");
        Node n;
        n.op = Op::BnTrain;
        n.a = x;
        n.b = gamma;
        n.c = beta;
        n.s0 = eps;
        n.shape = xs;
        n.val.resize(at(x).val.size());
        n.aux.resize(size_t(C) * 2);  // mean, var
        S* mean = n.aux.data();
        S* var = n.aux.data() + C;
        bn_batch_stats(at(x).val.data(), xs[0], C, xs[2] * xs[3], mean, var);
        bn_apply(at(x).val.data(), xs[0], C, xs[2] * xs[3], mean, var,
                 at(gamma).val.data(), at(beta).val.data(), eps, n.val.data());
        n.needs_grad = at(x).needs_grad || at(gamma).needs_grad || at(beta).needs_grad;
        return push(std::move(n));
    }

    // Normalization by externally supplied (running) statistics.
    int bn_eval(int x, int gamma, int beta, const Tensor<S>& mean, const Tensor<S>& var,
                S eps) {
        const Shape& xs = at(x).shape;
        ADVLAB_CHECK(xs.size() == 4, "bn_eval input must be [N,C,H,W], got ", shape_str(xs));
        const int C = xs[1];
        check_bn_param(gamma, C, "gamma");
        check_bn_param(beta, C, "beta");
        ADVLAB_CHECK(int(mean.size()) == C && int(var.size()) == C,
                     "bn_eval running stats must have ", C, " channels");
        Node n;
        n.op = Op::BnEval;
        n.a = x;
        n.b = gamma;
        n.c = beta;
        n.s0 = eps;
        n.shape = xs;
        n.val.resize(at(x).val.size());
        n.aux.resize(size_t(C) * 2);
        std::copy(mean.v.begin(), mean.v.end(), n.aux.begin());
        std::copy(var.v.begin(), var.v.end(), n.aux.begin() + C);
        bn_apply(at(x).val.data(), xs[0], C, xs[2] * xs[3], n.aux.data(), n.aux.data() + C,
                 at(gamma).val.data(), at(beta).val.data(), eps, n.val.data());
        n.needs_grad = at(x).needs_grad || at(gamma).needs_grad || at(beta).needs_grad;
        return push(std::move(n));
    }

    // Row-wise log softmax of logits [N,k] at the given temperature.
    int log_softmax_t(int q, S temperature) {
        const Shape& qs = at(q).shape;
        ADVLAB_CHECK(qs.size() == 2, "log_softmax_t input must be [N,k], got ", shape_str(qs));
        Node n;
        n.op = Op::LogSoftmaxT;
        n.a = q;
        n.s0 = temperature;
        n.shape = qs;
        n.val.resize(at(q).val.size());
        log_softmax_rows(at(q).val.data(), qs[0], qs[1], temperature, n.val.data());
        n.needs_grad = at(q).needs_grad;
        return push(std::move(n));
    }

    int exp(int a) {
        Node n = unary_like(Op::Exp, a);
        for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::exp(at(a).val[i]);
        return push(std::move(n));
    }

    // log(max(x, floor)); gradient is zero in the clamped region.
    int log_floor(int a, S floor) {
        Node n = unary_like(Op::LogFloor, a);
        n.s0 = floor;
        for (size_t i = 0; i < n.val.size(); ++i)
            n.val[i] = std::log(std::max(at(a).val[i], floor));
        return push(std::move(n));
    }

    int sum(int a) {
        Node n;
        n.op = Op::Sum;
        n.a = a;
        n.shape = {1};
        double acc = 0;
        for (S x : at(a).val) acc += double(x);
        n.val = {S(acc)};
        n.needs_grad = at(a).needs_grad;
        return push(std::move(n));
    }

    int mean(int a) { return scale(sum(a), S(1.0 / double(at(a).val.size()))); }

    const Shape& shape(int id) const { return at(id).shape; }
    const std::vector<S>& val(int id) const { return at(id).val; }
    std::vector<S>& grad(int id) { return nodes_[size_t(id)].grad; }
    bool requires_grad(int id) const { return at(id).needs_grad; }
    size_t size() const { return nodes_.size(); }

    Tensor<S> value_tensor(int id) const {
        Tensor<S> t;
        t.shape = at(id).shape;
        t.v = at(id).val;
        return t;
    }

    Tensor<S> grad_tensor(int id) const {
        Tensor<S> t;
        t.shape = at(id).shape;
        t.v = nodes_[size_t(id)].grad;
        ADVLAB_CHECK(!t.v.empty(), "grad_tensor before backward reached node ", id);
        return t;
    }

    S bn_batch_mean(int id, int channel) const { return bn_stat(id, channel, 0); }
    S bn_batch_var(int id, int channel) const { return bn_stat(id, channel, 1); }

    // Smallest |preactivation| over relu inputs and |x - floor| over floored
    // logs. Finite-difference checks resample when this is below the step.
    double kink_margin() const {
        double m = 1e300;
        for (const Node& n : nodes_) {
            if (n.op == Op::Relu)
                for (S x : at(n.a).val) m = std::min(m, std::abs(double(x)));
            if (n.op == Op::LogFloor)
                for (S x : at(n.a).val) m = std::min(m, std::abs(double(x) - double(n.s0)));
        }
        return m;
    }

    void backward(int loss) {
        ADVLAB_CHECK(loss >= 0 && loss < int(nodes_.size()), "backward on unknown node ", loss);
        ADVLAB_CHECK(at(loss).val.size() == 1, "backward needs a scalar loss, got shape ",
                     shape_str(at(loss).shape));
        ADVLAB_CHECK(std::isfinite(double(at(loss).val[0])),
                     "backward on non-finite loss value");
        for (auto& n : nodes_) {
            if (n.needs_grad) {
                n.grad.assign(n.val.size(), S(0));
            } else {
                n.grad.clear();
            }
        }
        if (!at(loss).needs_grad) return;  // nothing under the loss requires gradients
        nodes_[size_t(loss)].grad[0] = S(1);
        for (int id = loss; id >= 0; --id) {
            Node& n = nodes_[size_t(id)];
            if (!n.needs_grad || n.grad.empty()) continue;
            step_back(n);
        }
    }

  private:
    struct Node {
        Op op = Op::Leaf;
        int a = -1, b = -1, c = -1;
        Shape shape;
        std::vector<S> val;
        std::vector<S> grad;
        std::vector<S> aux;
        S s0 = S(0);
        int i0 = 0;
        bool needs_grad = false;
    };

    std::vector<Node> nodes_;

    const Node& at(int id) const {
        ADVLAB_CHECK(id >= 0 && id < int(nodes_.size()), "unknown graph node ", id);
        return nodes_[size_t(id)];
    }

    int push(Node&& n) {
        nodes_.push_back(std::move(n));
        return int(nodes_.size()) - 1;
    }

    Node unary_like(Op op, int a) {
        Node n;
        n.op = op;
        n.a = a;
        n.shape = at(a).shape;
        n.val.resize(at(a).val.size());
        n.needs_grad = at(a).needs_grad;
        return n;
    }

    int binary(Op op, int a, int b) {
        ADVLAB_CHECK(at(a).shape == at(b).shape, "elementwise op on mismatched shapes ",
                     shape_str(at(a).shape), " vs ", shape_str(at(b).shape));
        Node n;
        n.op = op;
        n.a = a;
        n.b = b;
        n.shape = at(a).shape;
        n.val.resize(at(a).val.size());
        const auto& va = at(a).val;
        const auto& vb = at(b).val;
        for (size_t i = 0; i < n.val.size(); ++i) {
            switch (op) {
                case Op::Add: n.val[i] = va[i] + vb[i]; break;
                case Op::Sub: n.val[i] = va[i] - vb[i]; break;
                case Op::Mul: n.val[i] = va[i] * vb[i]; break;
                default: fail("not a binary op");
            }
        }
        n.needs_grad = at(a).needs_grad || at(b).needs_grad;
        return push(std::move(n));
    }

    void check_bn_param(int id, int c, const char* name) {
        ADVLAB_CHECK(at(id).shape.size() == 1 && at(id).shape[0] == c, "batch norm ", name,
                     " must have shape [", c, "], got ", shape_str(at(id).shape));
    }

    S bn_stat(int id, int channel, int which) const {
        const Node& n = at(id);
        ADVLAB_CHECK(n.op == Op::BnTrain, "node ", id, " is not a bn_train node");
        const int C = n.shape[1];
        ADVLAB_CHECK(channel >= 0 && channel < C, "bn channel ", channel, " out of range");
        return n.aux[size_t(which * C + channel)];
    }

    std::vector<S>* gr(int id) {
        if (id < 0) return nullptr;
        Node& n = nodes_[size_t(id)];
        if (!n.needs_grad) return nullptr;
        return &n.grad;
    }

    void step_back(Node& n) {
        std::vector<S>* ga = gr(n.a);
        std::vector<S>* gb = gr(n.b);
        std::vector<S>* gc = gr(n.c);
        const std::vector<S>& dy = n.grad;
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Add:
                if (ga)
                    for (size_t i = 0; i < dy.size(); ++i) (*ga)[i] += dy[i];
                if (gb)
                    for (size_t i = 0; i < dy.size(); ++i) (*gb)[i] += dy[i];
                break;
            case Op::Sub:
                if (ga)
                    for (size_t i = 0; i < dy.size(); ++i) (*ga)[i] += dy[i];
                if (gb)
                    for (size_t i = 0; i < dy.size(); ++i) (*gb)[i] -= dy[i];
                break;
            case Op::Mul:
                if (ga)
                    for (size_t i = 0; i < dy.size(); ++i) (*ga)[i] += dy[i] * at(n.b).val[i];
                if (gb)
                    for (size_t i = 0; i < dy.size(); ++i) (*gb)[i] += dy[i] * at(n.a).val[i];
                break;
            case Op::Scale:
                if (ga)
                    for (size_t i = 0; i < dy.size(); ++i) (*ga)[i] += n.s0 * dy[i];
                break;
            case Op::Matmul: {
                const Shape& xs = at(n.a).shape;
                const Shape& ws = at(n.b).shape;
                if (ga) gemm_nt(dy.data(), at(n.b).val.data(), ga->data(), xs[0], ws[1], ws[0], true);
                if (gb) gemm_tn(at(n.a).val.data(), dy.data(), gb->data(), ws[0], xs[0], ws[1], true);
                break;
            }
            case Op::AddRow: {
                const int rows = n.shape[0], k = n.shape[1];
                if (ga)
                    for (size_t i = 0; i < dy.size(); ++i) (*ga)[i] += dy[i];
                if (gb)
                    for (int r = 0; r < rows; ++r)
                        for (int i = 0; i < k; ++i) (*gb)[size_t(i)] += dy[size_t(r) * k + i];
                break;
            }
            case Op::Conv2d:
                conv_back(n, ga, gb);
                break;
            case Op::Relu:
                if (ga)
                    for (size_t i = 0; i < dy.size(); ++i)
                        if (at(n.a).val[i] > S(0)) (*ga)[i] += dy[i];
                break;
            case Op::Gap: {
                const Shape& xs = at(n.a).shape;
                const int hw = xs[2] * xs[3];
                if (ga)
                    for (int64_t i = 0; i < int64_t(xs[0]) * xs[1]; ++i) {
                        const S d = dy[size_t(i)] / S(hw);
                        for (int j = 0; j < hw; ++j) (*ga)[size_t(i * hw + j)] += d;
                    }
                break;
            }
            case Op::BnTrain:
                bn_train_back(n, ga, gb, gc);
                break;
            case Op::BnEval:
                bn_eval_back(n, ga, gb, gc);
                break;
            case Op::LogSoftmaxT: {
                if (!ga) break;
                const int rows = n.shape[0], k = n.shape[1];
                for (int r = 0; r < rows; ++r) {
                    const S* ls = n.val.data() + int64_t(r) * k;
                    const S* d = dy.data() + int64_t(r) * k;
                    S* out = ga->data() + int64_t(r) * k;
                    double dsum = 0;
                    for (int i = 0; i < k; ++i) dsum += double(d[i]);
                    for (int i = 0; i < k; ++i)
                        out[i] += (d[i] - S(std::exp(double(ls[i])) * dsum)) / n.s0;
                }
                break;
            }
            case Op::Exp:
                if (ga)
                    for (size_t i = 0; i < dy.size(); ++i) (*ga)[i] += dy[i] * n.val[i];
                break;
            case Op::LogFloor:
                if (ga)
                    for (size_t i = 0; i < dy.size(); ++i)
                        if (at(n.a).val[i] >= n.s0) (*ga)[i] += dy[i] / at(n.a).val[i];
                break;
            case Op::Sum:
                if (ga)
                    for (size_t i = 0; i < ga->size(); ++i) (*ga)[i] += dy[0];
                break;
        }
    }

    void conv_back(Node& n, std::vector<S>* gx, std::vector<S>* gw) {
        const Shape& xs = at(n.a).shape;
        const int N = xs[0], C = xs[1], H = xs[2], W = xs[3];
        const int OC = n.shape[1], Ho = n.shape[2], Wo = n.shape[3];
        const int64_t ncols = int64_t(N) * Ho * Wo;
        const int64_t hw = int64_t(Ho) * Wo;
        // [N,OC,Ho,Wo] -> [OC, N*Ho*Wo]
        std::vector<S> dout(size_t(OC) * ncols);
        for (int ni = 0; ni < N; ++ni)
            for (int oc = 0; oc < OC; ++oc) {
                const S* src = n.grad.data() + (int64_t(ni) * OC + oc) * hw;
                std::copy(src, src + hw, dout.data() + oc * ncols + ni * hw);
            }
        if (gw) gemm_nt(dout.data(), n.aux.data(), gw->data(), OC, int(ncols), C * 9, true);
        if (gx) {
            std::vector<S> dcol(size_t(C) * 9 * ncols);
            gemm_tn(at(n.b).val.data(), dout.data(), dcol.data(), C * 9, OC, int(ncols));
            col2im_add(dcol.data(), N, C, H, W, n.i0, gx->data());
        }
    }

    void bn_train_back(Node& n, std::vector<S>* gx, std::vector<S>* gg, std::vector<S>* gb) {
        const Shape& xs = n.shape;
        const int N = xs[0], C = xs[1], hw = xs[2] * xs[3];
        const int64_t count = int64_t(N) * hw;
        const S* mean = n.aux.data();
        const S* var = n.aux.data() + C;
        const std::vector<S>& x = at(n.a).val;
        const std::vector<S>& gamma = at(n.b).val;
        for (int c = 0; c < C; ++c) {
            const S inv = S(1) / std::sqrt(var[c] + n.s0);
            double sum_dy = 0, sum_dy_xhat = 0;
            for (int ni = 0; ni < N; ++ni) {
                const int64_t base = (int64_t(ni) * C + c) * hw;
                for (int j = 0; j < hw; ++j) {
                    const double d = double(n.grad[size_t(base + j)]);
                    const double xh = double((x[size_t(base + j)] - mean[c]) * inv);
                    sum_dy += d;
                    sum_dy_xhat += d * xh;
                }
            }
            if (gb) (*gb)[size_t(c)] += S(sum_dy);
            if (gg) (*gg)[size_t(c)] += S(sum_dy_xhat);
            if (gx) {
                const double m_dy = sum_dy / double(count);
                const double m_dy_xhat = sum_dy_xhat / double(count);
                const double g_inv = double(gamma[size_t(c)]) * double(inv);
                for (int ni = 0; ni < N; ++ni) {
                    const int64_t base = (int64_t(ni) * C + c) * hw;
                    for (int j = 0; j < hw; ++j) {
                        const double d = double(n.grad[size_t(base + j)]);
                        const double xh = double((x[size_t(base + j)] - mean[c]) * inv);
                        (*gx)[size_t(base + j)] += S(g_inv * (d - m_dy - xh * m_dy_xhat));
                    }
                }
            }
        }
    }

    void bn_eval_back(Node& n, std::vector<S>* gx, std::vector<S>* gg, std::vector<S>* gb) {
        const Shape& xs = n.shape;
        const int N = xs[0], C = xs[1], hw = xs[2] * xs[3];
        const S* mean = n.aux.data();
        const S* var = n.aux.data() + C;
        const std::vector<S>& x = at(n.a).val;
        const std::vector<S>& gamma = at(n.b).val;
        for (int c = 0; c < C; ++c) {
            const S inv = S(1) / std::sqrt(var[c] + n.s0);
            double sum_dy = 0, sum_dy_xhat = 0;
            for (int ni = 0; ni < N; ++ni) {
                const int64_t base = (int64_t(ni) * C + c) * hw;
                for (int j = 0; j < hw; ++j) {
                    const double d = double(n.grad[size_t(base + j)]);
                    sum_dy += d;
                    sum_dy_xhat += d * double((x[size_t(base + j)] - mean[c]) * inv);
                    if (gx) (*gx)[size_t(base + j)] += S(double(gamma[size_t(c)]) * inv * d);
                }
            }
            if (gb) (*gb)[size_t(c)] += S(sum_dy);
            if (gg) (*gg)[size_t(c)] += S(sum_dy_xhat);
        }
    }
};

// Central-difference gradient verification. build must construct the same
// scalar loss from any parameter values: given a graph and the leaf ids for
// params (in order), it returns the loss node id. Runs in double.
struct GradCheckReport {
    double max_abs_diff = 0;
    int param = -1;
    int64_t index = -1;
    double analytic = 0;
    double numeric = 0;
    double kink_margin = 0;  // smallest relu/log-floor margin seen in the base graph
};

template <class F>
GradCheckReport grad_check(std::vector<Tensor<double>> params, F&& build, double h = 1e-5) {
    Graph<double> g;
    std::vector<int> ids;
    ids.reserve(params.size());
    for (const auto& p : params) ids.push_back(g.leaf(p, true));
    const int loss = build(g, ids);
    g.backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (int id : ids) analytic.push_back(g.grad(id));

    GradCheckReport rep;
    rep.kink_margin = g.kink_margin();
    auto eval = [&](const std::vector<Tensor<double>>& ps) {
        Graph<double> ge;
        std::vector<int> eids;
        for (const auto& p : ps) eids.push_back(ge.leaf(p, false));
        const int l = build(ge, eids);
        return double(ge.val(l)[0]);
    };
    for (size_t pi = 0; pi < params.size(); ++pi) {
        for (int64_t j = 0; j < params[pi].size(); ++j) {
            const double save = params[pi][j];
            params[pi][j] = save + h;
            const double f1 = eval(params);
            params[pi][j] = save - h;
            const double f0 = eval(params);
            params[pi][j] = save;
            const double num = (f1 - f0) / (2 * h);
            const double diff = std::abs(num - analytic[pi][size_t(j)]);
            if (diff > rep.max_abs_diff) {
                rep.max_abs_diff = diff;
                rep.param = int(pi);
                rep.index = j;
                rep.analytic = analytic[pi][size_t(j)];
                rep.numeric = num;
            }
        }
    }
    return rep;
}

}  // namespace advlab
