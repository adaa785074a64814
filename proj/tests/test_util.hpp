#pragma once

// Helpers shared by unit tests and the acceptance suite.

#include <algorithm>
#include <functional>
#include <vector>

#include "advlab/autodiff.hpp"
#include "advlab/nn.hpp"
#include "advlab/prob.hpp"
#include "advlab/rng.hpp"
#include "advlab/tensor.hpp"

namespace advlab::testing {

// Plain full-batch gradient descent on cross entropy, enough to give tests a
// genuinely trained (nonlinear) victim.
template <class S>
void naive_train(Model<S>& m, const Tensor<S>& x, const std::vector<int>& y, int steps,
                 S lr) {
    const int n = int(x.dim(0)), k = m.classes;
    Tensor<S> onehot = Tensor<S>::zeros({n, k});
    for (int i = 0; i < n; ++i) onehot[int64_t(i) * k + y[size_t(i)]] = S(1);
    for (int s = 0; s < steps; ++s) {
        Graph<S> g;
        auto bind = bind_params(g, m, true);
        const int logits = model_forward(g, m, bind, g.constant(x), BNMode::TrainUpdate);
        const int ls = g.log_softmax_t(logits, S(1));
        const int loss = g.scale(g.sum(g.mul(ls, g.constant(onehot))), S(-1.0 / n));
        g.backward(loss);
        for (size_t pi = 0; pi < m.params.size(); ++pi) {
            const auto& grad = g.grad(bind.params[pi]);
            for (int64_t j = 0; j < m.params[pi].size(); ++j)
                m.params[pi][j] -= lr * grad[size_t(j)];
        }
    }
}

// Two well-separated blobs mapped into the unit square.
template <class S>
void make_blobs(int n, uint64_t seed, Tensor<S>& x, std::vector<int>& y) {
    Rng rng = Rng::stream(seed, 900);
    x = Tensor<S>({n, 2});
    y.resize(size_t(n));
    for (int i = 0; i < n; ++i) {
        const int cls = i % 2;
        const double mu = cls == 0 ? 0.35 : 0.65;
        for (int d = 0; d < 2; ++d) {
            double v = mu + 0.05 * rng.normal();
            x[int64_t(i) * 2 + d] = S(std::min(std::max(v, 0.0), 1.0));
        }
        y[size_t(i)] = cls;
    }
}

// 8x8 images: class 0 lights the top half, class 1 the bottom half.
template <class S>
void make_halves(int n, uint64_t seed, Tensor<S>& x, std::vector<int>& y) {
    Rng rng = Rng::stream(seed, 901);
    x = Tensor<S>({n, 1, 8, 8});
    y.resize(size_t(n));
    for (int i = 0; i < n; ++i) {
        const int cls = i % 2;
        for (int r = 0; r < 8; ++r)
            for (int cc = 0; cc < 8; ++cc) {
                const bool lit = (cls == 0) == (r < 4);
                double v = (lit ? 0.8 : 0.2) + 0.08 * rng.normal();
                x[(int64_t(i) * 8 + r) * 8 + cc] = S(std::min(std::max(v, 0.0), 1.0));
            }
        y[size_t(i)] = cls;
    }
}

inline ProbVector<double> random_simplex(Rng& rng, int k) {
    std::vector<double> q(static_cast<size_t>(k));
    for (auto& x : q) x = rng.normal() * 2.0;
    return softmax_temperature(q, 1.0);
}

// A randomly parameterized scalar-valued composition of the graph
// primitives, for finite-difference verification. Returns the parameter
// tensors and a builder usable with grad_check. Kinds cycle through affine
// chains, conv stacks with batch norm, tempered-softmax losses, and a
// two-branch divergence so every primitive's backward rule gets exercised
// in context.
struct Composition {
    std::vector<Tensor<double>> params;
    std::function<int(Graph<double>&, const std::vector<int>&)> build;
};

inline Composition make_random_composition(uint64_t seed) {
    Rng rng(seed);
    const int kind = rng.uniform_int(4);
    Composition c;
    switch (kind) {
        case 0: {  // affine -> relu -> affine -> tempered sce
            const int n = 2 + rng.uniform_int(2);
            const int in = 3 + rng.uniform_int(3);
            const int hid = 3 + rng.uniform_int(4);
            const int k = 2 + rng.uniform_int(3);
            const double temp = rng.uniform(0.5, 4.0);
            Rng pr(seed ^ 0xabcd);
            c.params.push_back(Tensor<double>::randn({n, in}, pr));
            c.params.push_back(Tensor<double>::randn({in, hid}, pr, 0.7));
            c.params.push_back(Tensor<double>::randn({hid}, pr, 0.5));
            c.params.push_back(Tensor<double>::randn({hid, k}, pr, 0.7));
            Tensor<double> y({n, k});
            for (int r = 0; r < n; ++r) {
                auto p = random_simplex(pr, k);
                for (int i = 0; i < k; ++i) y[int64_t(r) * k + i] = p[size_t(i)];
            }
            c.build = [=](Graph<double>& g, const std::vector<int>& ids) {
                int h = g.relu(g.add_row(g.matmul(ids[0], ids[1]), ids[2]));
                int q = g.matmul(h, ids[3]);
                int ls = g.log_softmax_t(q, temp);
                int t = g.mul(ls, g.constant(y));
                return g.scale(g.sum(t), -1.0 / n);
            };
            break;
        }
        case 1: {  // conv -> bn -> relu -> conv s2 -> gap -> affine -> sum
            const int n = 2;
            const int cin = 1 + rng.uniform_int(2);
            const int c1 = 2 + rng.uniform_int(2);
            const int c2 = 2 + rng.uniform_int(2);
            const int hw = 5 + rng.uniform_int(3);
            const int s2 = 1 + rng.uniform_int(2);
            Rng pr(seed ^ 0xbeef);
            c.params.push_back(Tensor<double>::randn({n, cin, hw, hw}, pr));
            c.params.push_back(Tensor<double>::randn({c1, cin * 9}, pr, 0.4));
            c.params.push_back(Tensor<double>::randn({c1}, pr, 0.3));  // gamma offset
            c.params.push_back(Tensor<double>::randn({c1}, pr, 0.3));  // beta
            c.params.push_back(Tensor<double>::randn({c2, c1 * 9}, pr, 0.4));
            c.params.push_back(Tensor<double>::randn({c2, 3}, pr, 0.6));
            c.build = [=](Graph<double>& g, const std::vector<int>& ids) {
                Tensor<double> ones({c1});
                for (auto& v : ones.v) v = 1.0;
                int gamma = g.add(ids[2], g.constant(ones));  // keep gamma near 1
                int h = g.bn_train(g.conv2d(ids[0], ids[1], 1), gamma, ids[3], 1e-5);
                h = g.relu(h);
                h = g.conv2d(h, ids[4], s2);
                int pooled = g.gap(h);
                int q = g.matmul(pooled, ids[5]);
                return g.mean(q);
            };
            break;
        }
        case 2: {  // two-branch divergence through a shared affine
            const int n = 2 + rng.uniform_int(2);
            const int in = 4;
            const int k = 2 + rng.uniform_int(4);
            Rng pr(seed ^ 0x77aa);
            c.params.push_back(Tensor<double>::randn({n, in}, pr));
            c.params.push_back(Tensor<double>::randn({n, in}, pr));
            c.params.push_back(Tensor<double>::randn({in, k}, pr, 0.8));
            c.build = [=](Graph<double>& g, const std::vector<int>& ids) {
                int lsa = g.log_softmax_t(g.matmul(ids[0], ids[2]), 1.0);
                int lsb = g.log_softmax_t(g.matmul(ids[1], ids[2]), 1.0);
                int p = g.exp(lsa);
                int d = g.mul(p, g.sub(lsa, lsb));
                return g.scale(g.sum(d), 1.0 / n);
            };
            break;
        }
        default: {  // bn_eval + floored log path
            const int n = 2;
            const int ch = 2 + rng.uniform_int(2);
            const int hw = 4 + rng.uniform_int(3);
            Rng pr(seed ^ 0x5151);
            c.params.push_back(Tensor<double>::randn({n, ch, hw, hw}, pr));
            c.params.push_back(Tensor<double>::randn({ch}, pr, 0.3));
            c.params.push_back(Tensor<double>::randn({ch}, pr, 0.3));
            Tensor<double> mean = Tensor<double>::randn({ch}, pr, 0.2);
            Tensor<double> var = Tensor<double>::full({ch}, 1.0);
            for (auto& v : var.v) v = 0.5 + 0.5 * pr.uniform();
            c.build = [=](Graph<double>& g, const std::vector<int>& ids) {
                Tensor<double> ones({ch});
                for (auto& v : ones.v) v = 1.0;
                int gamma = g.add(ids[1], g.constant(ones));
                int h = g.bn_eval(ids[0], gamma, ids[2], mean, var, 1e-5);
                int sq = g.mul(h, h);  // strictly positive, away from the log floor
                Tensor<double> eps_t = Tensor<double>::full(Shape{n, ch, hw, hw}, 0.1);
                int shifted = g.add(sq, g.constant(eps_t));
                return g.mean(g.log_floor(shifted, 1e-12));
            };
            break;
        }
    }
    return c;
}

// Resamples until the composition's kinks are comfortably away from the
// finite-difference step.
inline Composition make_checkable_composition(uint64_t& seed, double h = 1e-5) {
    for (;;) {
        Composition c = make_random_composition(seed);
        Graph<double> g;
        std::vector<int> ids;
        for (const auto& p : c.params) ids.push_back(g.leaf(p, true));
        c.build(g, ids);
        const double margin = g.kink_margin();
        if (margin > 200 * h) return c;
        seed = Rng::mix(seed);
    }
}

}  // namespace advlab::testing
