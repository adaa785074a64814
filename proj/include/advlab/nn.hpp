#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "advlab/autodiff.hpp"
#include "advlab/common.hpp"
#include "advlab/kernels.hpp"
#include "advlab/tensor.hpp"

namespace advlab {

// How batch norm behaves inside a forward pass.
enum class BNMode {
    TrainUpdate,    // normalize by batch stats and fold them into the running stats
    TrainNoUpdate,  // normalize by batch stats, leave running stats alone
    Eval,           // normalize by the stored running stats
};

// Which forward pass feeds batch-norm statistics when a loss sees both the
// natural and the adversarial branch of a batch.
enum class OrderingPolicy {
    AdvFirst,  // adversarial branch updates stats, then the natural branch does
    NatFirst,  // natural branch updates stats, then the adversarial branch does
    NatOnly,   // only the natural branch updates; the adversarial branch runs in Eval mode
    AdvOnly,   // only the adversarial branch updates; the natural branch runs in Eval mode
};

inline const char* to_string(OrderingPolicy p) {
    switch (p) {
        case OrderingPolicy::AdvFirst: return "adv_first";
        case OrderingPolicy::NatFirst: return "nat_first";
        case OrderingPolicy::NatOnly: return "nat_only";
        case OrderingPolicy::AdvOnly: return "adv_only";
    }
    return "?";
}

inline OrderingPolicy parse_ordering_policy(const std::string& s) {
    if (s == "adv_first") return OrderingPolicy::AdvFirst;
    if (s == "nat_first") return OrderingPolicy::NatFirst;
    if (s == "nat_only") return OrderingPolicy::NatOnly;
    if (s == "adv_only") return OrderingPolicy::AdvOnly;
    fail("unknown ordering policy '", s,
         "' (expected adv_first, nat_first, nat_only or adv_only)");
}

enum class LayerKind { Conv3x3, BatchNorm, Relu, Gap, Affine };

struct LayerSpec {
    LayerKind kind;
    int in = 0;      // conv/affine input channels or features
    int out = 0;     // conv/affine output channels or features; bn channel count
    int stride = 1;  // conv only
    int p0 = -1;     // first parameter index (conv weight, bn gamma, affine weight)
    int p1 = -1;     // second parameter index (bn beta, affine bias)
    int s0 = -1;     // running-mean index; running variance sits at s0 + 1
};

// A feed-forward classifier: parameters and batch-norm running statistics
// held as named tensors, topology as a flat layer list. The architecture
// string is enough to rebuild an empty model of the same shape.
template <class S>
struct Model {
    std::string arch;
    int input_channels = 0;  // conv nets: input [N,C,H,W]
    int input_hw = 0;
    int input_dim = 0;  // mlps: input [N,D]
    int classes = 0;
    std::vector<LayerSpec> layers;
    std::vector<std::string> param_names;
    std::vector<Tensor<S>> params;
    std::vector<std::string> stat_names;
    std::vector<Tensor<S>> stats;
    S bn_eps = S(1e-5);
    S bn_momentum = S(0.9);  // running <- momentum * running + (1 - momentum) * batch

    bool expects_images() const { return input_channels > 0; }

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto& p : params) n += p.size();
        return n;
    }

    uint64_t content_hash() const {
        uint64_t h = fnv1a64(arch);
        for (const auto& p : params) h = fnv1a64(p.v.data(), p.v.size() * sizeof(S), h);
        for (const auto& t : stats) h = fnv1a64(t.v.data(), t.v.size() * sizeof(S), h);
        return h;
    }

    template <class T>
    Model<T> cast() const {
        Model<T> out;
        out.arch = arch;
        out.input_channels = input_channels;
        out.input_hw = input_hw;
        out.input_dim = input_dim;
        out.classes = classes;
        out.layers = layers;
        out.param_names = param_names;
        out.stat_names = stat_names;
        out.bn_eps = T(bn_eps);
        out.bn_momentum = T(bn_momentum);
        out.params.reserve(params.size());
        for (const auto& p : params) out.params.push_back(p.template cast<T>());
        out.stats.reserve(stats.size());
        for (const auto& t : stats) out.stats.push_back(t.template cast<T>());
        return out;
    }
};

// running <- momentum * running + (1 - momentum) * batch
template <class S>
void ema_update(Tensor<S>& running, const Tensor<S>& batch, S momentum) {
    ADVLAB_CHECK(running.size() == batch.size(), "ema_update size mismatch: ",
                 running.size(), " vs ", batch.size());
    for (int64_t i = 0; i < running.size(); ++i)
        running[i] = momentum * running[i] + (S(1) - momentum) * batch[i];
}

namespace detail {

template <class S>
int add_param(Model<S>& m, const std::string& name, Tensor<S> t) {
    m.param_names.push_back(name);
    m.params.push_back(std::move(t));
    return int(m.params.size()) - 1;
}

template <class S>
int add_bn(Model<S>& m, const std::string& name, int channels) {
    LayerSpec l;
    l.kind = LayerKind::BatchNorm;
    l.out = channels;
    l.p0 = add_param(m, name + ".gamma", Tensor<S>::full({channels}, S(1)));
    l.p1 = add_param(m, name + ".beta", Tensor<S>::zeros({channels}));
    l.s0 = int(m.stats.size());
    m.stat_names.push_back(name + ".mean");
    m.stats.push_back(Tensor<S>::zeros({channels}));
    m.stat_names.push_back(name + ".var");
    m.stats.push_back(Tensor<S>::full({channels}, S(1)));
    m.layers.push_back(l);
    return l.s0;
}

template <class S>
Tensor<S> he_init(Shape sh, int fan_in, Rng& rng) {
    return Tensor<S>::randn(std::move(sh), rng, S(std::sqrt(2.0 / double(fan_in))));
}

}  // namespace detail

// Three 3x3 conv blocks (stride 1, 2, 2), each followed by batch norm and
// relu, then global average pooling and a linear classifier head. Convs are
// bias-free; the batch norm shift plays that role.
template <class S>
Model<S> make_small_cnn(int in_channels, int hw, int classes, int width, uint64_t seed) {
    ADVLAB_CHECK(in_channels > 0 && hw >= 4 && classes >= 2 && width > 0,
                 "bad small cnn config: c=", in_channels, " hw=", hw, " k=", classes,
                 " w=", width);
    Model<S> m;
    char buf[96];
    std::snprintf(buf, sizeof buf, "smallcnn-c%d-s%d-w%d-k%d", in_channels, hw, width,
                  classes);
    m.arch = buf;
    m.input_channels = in_channels;
    m.input_hw = hw;
    m.classes = classes;
    Rng rng = Rng::stream(seed, /*id=*/0x6d6f64656c);  // parameter-init stream

    const int widths[3] = {width, width * 2, width * 4};
    const int strides[3] = {1, 2, 2};
    int c = in_channels;
    for (int i = 0; i < 3; ++i) {
        LayerSpec conv;
        conv.kind = LayerKind::Conv3x3;
        conv.in = c;
        conv.out = widths[i];
        conv.stride = strides[i];
        std::string name = "conv" + std::to_string(i + 1);
        conv.p0 = detail::add_param(
            m, name + ".w", detail::he_init<S>({widths[i], c * 9}, c * 9, rng));
        m.layers.push_back(conv);
        detail::add_bn(m, "bn" + std::to_string(i + 1), widths[i]);
        m.layers.push_back({LayerKind::Relu});
        c = widths[i];
    }
    m.layers.push_back({LayerKind::Gap});
    LayerSpec fc;
    fc.kind = LayerKind::Affine;
    fc.in = c;
    fc.out = classes;
    fc.p0 = detail::add_param(m, "fc.w", detail::he_init<S>({c, classes}, c, rng));
    fc.p1 = detail::add_param(m, "fc.b", Tensor<S>::zeros({classes}));
    m.layers.push_back(fc);
    return m;
}

// Two-layer perceptron for low-dimensional inputs. No batch norm, so the
// ordering policy has no effect on it.
template <class S>
Model<S> make_mlp(int in_dim, int hidden, int classes, uint64_t seed) {
    ADVLAB_CHECK(in_dim > 0 && hidden > 0 && classes >= 2, "bad mlp config: d=", in_dim,
                 " h=", hidden, " k=", classes);
    Model<S> m;
    char buf[96];
    std::snprintf(buf, sizeof buf, "mlp-d%d-h%d-k%d", in_dim, hidden, classes);
    m.arch = buf;
    m.input_dim = in_dim;
    m.classes = classes;
    Rng rng = Rng::stream(seed, /*id=*/0x6d6f64656c);

    LayerSpec fc1;
    fc1.kind = LayerKind::Affine;
    fc1.in = in_dim;
    fc1.out = hidden;
    fc1.p0 = detail::add_param(m, "fc1.w", detail::he_init<S>({in_dim, hidden}, in_dim, rng));
    fc1.p1 = detail::add_param(m, "fc1.b", Tensor<S>::zeros({hidden}));
    m.layers.push_back(fc1);
    m.layers.push_back({LayerKind::Relu});
    LayerSpec fc2;
    fc2.kind = LayerKind::Affine;
    fc2.in = hidden;
    fc2.out = classes;
    fc2.p0 = detail::add_param(m, "fc2.w", detail::he_init<S>({hidden, classes}, hidden, rng));
    fc2.p1 = detail::add_param(m, "fc2.b", Tensor<S>::zeros({classes}));
    m.layers.push_back(fc2);
    return m;
}

// Rebuild an empty (freshly initialized) model from its architecture string.
template <class S>
Model<S> model_from_arch(const std::string& arch, uint64_t seed = 0) {
    int a = 0, b = 0, c = 0, d = 0;
    if (std::sscanf(arch.c_str(), "smallcnn-c%d-s%d-w%d-k%d", &a, &b, &c, &d) == 4)
        return make_small_cnn<S>(a, b, d, c, seed);
    if (std::sscanf(arch.c_str(), "mlp-d%d-h%d-k%d", &a, &b, &c) == 3)
        return make_mlp<S>(a, b, c, seed);
    fail("unknown architecture string '", arch, "'");
}

// Graph leaves for every learnable parameter, in Model::params order.
template <class S>
struct GraphBinding {
    std::vector<int> params;
};

template <class S>
GraphBinding<S> bind_params(Graph<S>& g, const Model<S>& m, bool requires_grad = true) {
    GraphBinding<S> b;
    b.params.reserve(m.params.size());
    for (const auto& p : m.params) b.params.push_back(g.leaf(p, requires_grad));
    return b;
}

// Build the model's forward pass on the graph, returning the logits node.
// In TrainUpdate mode the model's running statistics move toward the batch
// statistics of this very pass, so call order across branches matters.
template <class S>
int model_forward(Graph<S>& g, Model<S>& m, const GraphBinding<S>& bind, int x,
                  BNMode mode) {
    int h = x;
    for (const auto& l : m.layers) {
        switch (l.kind) {
            case LayerKind::Conv3x3:
                h = g.conv2d(h, bind.params[size_t(l.p0)], l.stride);
                break;
            case LayerKind::BatchNorm: {
                if (mode == BNMode::Eval) {
                    h = g.bn_eval(h, bind.params[size_t(l.p0)], bind.params[size_t(l.p1)],
                                  m.stats[size_t(l.s0)], m.stats[size_t(l.s0) + 1],
                                  m.bn_eps);
                } else {
                    h = g.bn_train(h, bind.params[size_t(l.p0)], bind.params[size_t(l.p1)],
                                   m.bn_eps);
                    if (mode == BNMode::TrainUpdate) {
                        Tensor<S> bm({l.out}), bv({l.out});
                        for (int ci = 0; ci < l.out; ++ci) {
                            bm[ci] = g.bn_batch_mean(h, ci);
                            bv[ci] = g.bn_batch_var(h, ci);
                        }
                        ema_update(m.stats[size_t(l.s0)], bm, m.bn_momentum);
                        ema_update(m.stats[size_t(l.s0) + 1], bv, m.bn_momentum);
                    }
                }
                break;
            }
            case LayerKind::Relu:
                h = g.relu(h);
                break;
            case LayerKind::Gap:
                h = g.gap(h);
                break;
            case LayerKind::Affine:
                h = g.matmul(h, bind.params[size_t(l.p0)]);
                h = g.add_row(h, bind.params[size_t(l.p1)]);
                break;
        }
    }
    return h;
}

// Forward pass that cannot update running stats, so the model stays const.
template <class S>
int model_forward(Graph<S>& g, const Model<S>& m, const GraphBinding<S>& bind, int x,
                  BNMode mode) {
    ADVLAB_CHECK(mode != BNMode::TrainUpdate,
                 "TrainUpdate forward needs a mutable model");
    return model_forward(g, const_cast<Model<S>&>(m), bind, x, mode);
}

// Plain eval-mode forward pass (running batch-norm stats, no graph). Returns
// logits [N, classes].
template <class S>
Tensor<S> forward_eval(const Model<S>& m, const Tensor<S>& x) {
    Tensor<S> cur = x;
    for (const auto& l : m.layers) {
        switch (l.kind) {
            case LayerKind::Conv3x3: {
                ADVLAB_CHECK(cur.shape.size() == 4, "conv input must be [N,C,H,W], got ",
                             shape_str(cur.shape));
                const int n = cur.dim(0), c = cur.dim(1), hh = cur.dim(2), ww = cur.dim(3);
                const int ho = conv_out_dim(hh, l.stride), wo = conv_out_dim(ww, l.stride);
                const int64_t ncols = int64_t(n) * ho * wo;
                std::vector<S> col(size_t(c) * 9 * ncols);
                std::vector<S> out_mat(size_t(l.out) * ncols);
                Tensor<S> next({n, l.out, ho, wo});
                conv2d_fwd(cur.data(), m.params[size_t(l.p0)].data(), n, c, hh, ww, l.out,
                           l.stride, col.data(), out_mat.data(), next.data());
                cur = std::move(next);
                break;
            }
            case LayerKind::BatchNorm: {
                Tensor<S> next(cur.shape);
                bn_apply(cur.data(), cur.dim(0), cur.dim(1), cur.dim(2) * cur.dim(3),
                         m.stats[size_t(l.s0)].data(), m.stats[size_t(l.s0) + 1].data(),
                         m.params[size_t(l.p0)].data(), m.params[size_t(l.p1)].data(),
                         m.bn_eps, next.data());
                cur = std::move(next);
                break;
            }
            case LayerKind::Relu:
                relu_fwd(cur.data(), cur.size(), cur.data());
                break;
            case LayerKind::Gap: {
                Tensor<S> next({cur.dim(0), cur.dim(1)});
                gap_fwd(cur.data(), cur.dim(0), cur.dim(1), cur.dim(2) * cur.dim(3),
                        next.data());
                cur = std::move(next);
                break;
            }
            case LayerKind::Affine: {
                ADVLAB_CHECK(cur.shape.size() == 2 && cur.dim(1) == l.in,
                             "affine input must be [N,", l.in, "], got ",
                             shape_str(cur.shape));
                Tensor<S> next({cur.dim(0), l.out});
                affine_fwd(cur.data(), m.params[size_t(l.p0)].data(),
                           m.params[size_t(l.p1)].data(), cur.dim(0), l.in, l.out,
                           next.data());
                cur = std::move(next);
                break;
            }
        }
    }
    return cur;
}

template <class S>
std::vector<int> predict(const Model<S>& m, const Tensor<S>& x) {
    Tensor<S> logits = forward_eval(m, x);
    const int n = logits.dim(0), k = logits.dim(1);
    std::vector<int> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out[size_t(i)] = argmax_row(logits.data() + int64_t(i) * k, k);
    return out;
}

namespace detail {

template <class S>
Tensor<S> slice_rows(const Tensor<S>& x, int64_t row0, int64_t rows) {
    Shape sh = x.shape;
    const int64_t stride = numel(sh) / sh[0];
    sh[0] = int(rows);
    Tensor<S> out(sh);
    std::copy(x.data() + row0 * stride, x.data() + (row0 + rows) * stride, out.data());
    return out;
}

}  // namespace detail

// Eval-mode classification accuracy, batched to bound scratch memory.
template <class S>
double accuracy(const Model<S>& m, const Tensor<S>& x, const std::vector<int>& y,
                int batch = 256) {
    const int64_t n = x.dim(0);
    ADVLAB_CHECK(n == int64_t(y.size()), "accuracy: ", n, " inputs vs ", y.size(),
                 " labels");
    ADVLAB_CHECK(n > 0, "accuracy needs at least one example");
    int64_t correct = 0;
    for (int64_t i0 = 0; i0 < n; i0 += batch) {
        const int64_t b = std::min<int64_t>(batch, n - i0);
        Tensor<S> xb = detail::slice_rows(x, i0, b);
        std::vector<int> pred = predict(m, xb);
        for (int64_t i = 0; i < b; ++i)
            if (pred[size_t(i)] == y[size_t(i0 + i)]) ++correct;
    }
    return double(correct) / double(n);
}

}  // namespace advlab
