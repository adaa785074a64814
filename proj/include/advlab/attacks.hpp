#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "advlab/nn.hpp"
#include "advlab/prob.hpp"

namespace advlab {

// What the inner maximization climbs.
enum class AttackLoss {
    CrossEntropy,  // untargeted: raise CE against the true label
    KlToNatural,   // raise KLD(p(x) || p(x')), reference frozen at attack start
    Margin,        // CW-style logit margin; targeted when cfg.target >= 0
    TargetedCE,    // push the prediction toward cfg.target
};

inline const char* to_string(AttackLoss l) {
    switch (l) {
        case AttackLoss::CrossEntropy: return "ce";
        case AttackLoss::KlToNatural: return "kl";
        case AttackLoss::Margin: return "margin";
        case AttackLoss::TargetedCE: return "targeted_ce";
    }
    return "?";
}

inline AttackLoss parse_attack_loss(const std::string& s) {
    if (s == "ce") return AttackLoss::CrossEntropy;
    if (s == "kl") return AttackLoss::KlToNatural;
    if (s == "margin") return AttackLoss::Margin;
    if (s == "targeted_ce") return AttackLoss::TargetedCE;
    fail("unknown attack loss '", s, "' (expected ce, kl, margin or targeted_ce)");
}

struct AttackConfig {
    double eps = 8.0 / 255;
    int steps = 20;
    double alpha = 0;  // step size; <= 0 means 2 * eps / steps
    int restarts = 1;
    AttackLoss loss = AttackLoss::CrossEntropy;
    int target = -1;        // class for TargetedCE / targeted Margin
    int64_t budget = 1000;  // proposal budget for the gradient-free attack
    uint64_t seed = 0;
    bool random_start = true;
    BNMode bn_mode = BNMode::Eval;

    double step_size() const { return alpha > 0 ? alpha : 2.0 * eps / std::max(steps, 1); }
    bool targeted() const {
        return loss == AttackLoss::TargetedCE ||
               (loss == AttackLoss::Margin && target >= 0);
    }
};

template <class S>
struct AttackResult {
    Tensor<S> x_adv;
    std::vector<uint8_t> success;   // prediction flipped (or reached the target)
    std::vector<int> steps_used;    // gradient steps or queries spent per example
    std::vector<double> final_loss; // objective value at the returned iterate
};

// Examples are processed in fixed-size shards with their own RNG streams, so
// results do not depend on how shards are scheduled.
inline constexpr int kAttackShard = 32;

// Clamp into the eps-ball around x0, then into pixel range.
template <class S>
void project_linf(const Tensor<S>& x0, Tensor<S>& x, S eps) {
    ADVLAB_CHECK(x0.shape == x.shape, "project_linf shape mismatch: ",
                 shape_str(x0.shape), " vs ", shape_str(x.shape));
    ADVLAB_CHECK(eps >= S(0), "eps must be non-negative, got ", eps);
    for (int64_t i = 0; i < x.size(); ++i) {
        S v = std::min(std::max(x[i], x0[i] - eps), x0[i] + eps);
        x[i] = std::min(std::max(v, S(0)), S(1));
    }
}

namespace detail {

template <class S>
void write_rows(Tensor<S>& dst, const Tensor<S>& rows, int64_t row0) {
    const int64_t stride = numel(dst.shape) / dst.dim(0);
    std::copy(rows.data(), rows.data() + rows.size(), dst.data() + row0 * stride);
}

// Objective bookkeeping for one shard at one iterate: per-example values,
// predictions, and (for gradient attacks) the graph node to differentiate.
template <class S>
struct ShardEval {
    std::vector<double> obj;
    std::vector<int> pred;
    int loss_node = -1;
};

// Build the forward pass plus the attack objective on the graph. `ref` is
// the frozen natural distribution for the KL objective (rows of size k).
template <class S>
ShardEval<S> shard_objective(Graph<S>& g, const Model<S>& m, const GraphBinding<S>& bind,
                             int xnode, const std::vector<int>& y,
                             const AttackConfig& cfg, const std::vector<double>& ref,
                             const std::vector<double>& ref_entropy) {
    const int logits = model_forward(g, m, bind, xnode, cfg.bn_mode);
    const Tensor<S> q = g.value_tensor(logits);
    const int n = q.dim(0), k = q.dim(1);
    ADVLAB_CHECK(int(y.size()) == n, "attack labels: ", y.size(), " for ", n, " examples");

    ShardEval<S> ev;
    ev.obj.resize(size_t(n));
    ev.pred.resize(size_t(n));
    for (int i = 0; i < n; ++i) ev.pred[size_t(i)] = argmax_row(q.data() + int64_t(i) * k, k);

    switch (cfg.loss) {
        case AttackLoss::CrossEntropy:
        case AttackLoss::TargetedCE: {
            const bool targeted = cfg.loss == AttackLoss::TargetedCE;
            if (targeted)
                ADVLAB_CHECK(cfg.target >= 0 && cfg.target < k, "attack target ",
                             cfg.target, " out of range for ", k, " classes");
            const int ls = g.log_softmax_t(logits, S(1));
            const Tensor<S> lsv = g.value_tensor(ls);
            Tensor<S> sel = Tensor<S>::zeros({n, k});
            for (int i = 0; i < n; ++i) {
                const int cls = targeted ? cfg.target : y[size_t(i)];
                ADVLAB_CHECK(cls >= 0 && cls < k, "label ", cls, " out of range");
                sel[int64_t(i) * k + cls] = targeted ? S(1) : S(-1);
                const double l = double(lsv[int64_t(i) * k + cls]);
                ev.obj[size_t(i)] = targeted ? l : -l;
            }
            ev.loss_node = g.sum(g.mul(ls, g.constant(sel)));
            break;
        }
        case AttackLoss::Margin: {
            ADVLAB_CHECK(cfg.target < k, "attack target ", cfg.target,
                         " out of range for ", k, " classes");
            // Rival class re-chosen every call; the graph sees a fixed
            // two-entry selector so the gradient targets exactly that pair.
            Tensor<S> sel = Tensor<S>::zeros({n, k});
            for (int i = 0; i < n; ++i) {
                const S* row = q.data() + int64_t(i) * k;
                int up, dn;
                if (cfg.target >= 0) {
                    up = cfg.target;
                    dn = up == 0 ? 1 : 0;
                    for (int j = 0; j < k; ++j)
                        if (j != up && row[j] > row[dn]) dn = j;
                } else {
                    dn = y[size_t(i)];
                    up = dn == 0 ? 1 : 0;
                    for (int j = 0; j < k; ++j)
                        if (j != dn && row[j] > row[up]) up = j;
                }
                sel[int64_t(i) * k + up] = S(1);
                sel[int64_t(i) * k + dn] = S(-1);
                ev.obj[size_t(i)] = double(row[up]) - double(row[dn]);
            }
            ev.loss_node = g.sum(g.mul(logits, g.constant(sel)));
            break;
        }
        case AttackLoss::KlToNatural: {
            ADVLAB_CHECK(int64_t(ref.size()) == int64_t(n) * k,
                         "KL attack reference has ", ref.size(), " entries, wants ",
                         int64_t(n) * k);
            const int ls = g.log_softmax_t(logits, S(1));
            const Tensor<S> lsv = g.value_tensor(ls);
            Tensor<S> refs({n, k});
            for (int64_t i = 0; i < refs.size(); ++i) refs[i] = S(ref[size_t(i)]);
            for (int i = 0; i < n; ++i) {
                double ce = 0;
                for (int j = 0; j < k; ++j)
                    ce -= ref[size_t(i * k + j)] * double(lsv[int64_t(i) * k + j]);
                ev.obj[size_t(i)] = ce - ref_entropy[size_t(i)];  // true KLD value
            }
            ev.loss_node = g.scale(g.sum(g.mul(ls, g.constant(refs))), S(-1));
            break;
        }
    }
    return ev;
}

template <class S>
bool iterate_success(const AttackConfig& cfg, int pred, int label) {
    return cfg.targeted() ? pred == cfg.target : pred != label;
}

}  // namespace detail

// Multi-step projected gradient ascent on the configured objective, with
// uniform random starts per restart. Per example the returned iterate is the
// best-objective one (untargeted) or the first successful one (targeted).
template <class S>
AttackResult<S> pgd(const Model<S>& m, const Tensor<S>& x, const std::vector<int>& y,
                    const AttackConfig& cfg) {
    ADVLAB_CHECK(cfg.bn_mode != BNMode::TrainUpdate,
                 "attacks must not update batch-norm running stats");
    ADVLAB_CHECK(cfg.steps >= 1 && cfg.restarts >= 1, "pgd needs steps >= 1, restarts",
                 " >= 1; got ", cfg.steps, ", ", cfg.restarts);
    ADVLAB_CHECK(cfg.eps >= 0, "eps must be non-negative");
    const int64_t n = x.dim(0);
    ADVLAB_CHECK(n == int64_t(y.size()), "pgd: ", n, " inputs vs ", y.size(), " labels");
    const S eps = S(cfg.eps);
    const S alpha = S(cfg.step_size());

    AttackResult<S> res;
    res.x_adv = x;
    res.success.assign(size_t(n), 0);
    res.steps_used.assign(size_t(n), 0);
    res.final_loss.assign(size_t(n), 0.0);

    for (int64_t s0 = 0, shard = 0; s0 < n; s0 += kAttackShard, ++shard) {
        const int b = int(std::min<int64_t>(kAttackShard, n - s0));
        const Tensor<S> x0 = detail::slice_rows(x, s0, b);
        std::vector<int> yb(y.begin() + s0, y.begin() + s0 + b);

        // Frozen reference distribution for the KL objective.
        std::vector<double> ref, ref_entropy;
        if (cfg.loss == AttackLoss::KlToNatural) {
            Graph<S> g;
            auto bind = bind_params(g, m, false);
            const int logits = model_forward(g, m, bind, g.constant(x0), cfg.bn_mode);
            const Tensor<S> q = g.value_tensor(logits);
            const int k = q.dim(1);
            ref.resize(size_t(b) * k);
            ref_entropy.resize(size_t(b));
            for (int i = 0; i < b; ++i) {
                std::vector<double> row(static_cast<size_t>(k));
                for (int j = 0; j < k; ++j) row[size_t(j)] = double(q[int64_t(i) * k + j]);
                auto p = softmax_temperature(row, 1.0);
                for (int j = 0; j < k; ++j) ref[size_t(i * k + j)] = p[size_t(j)];
                ref_entropy[size_t(i)] = entropy(p);
            }
        }

        Tensor<S> best_x = x0;
        std::vector<double> best_obj(size_t(b), -1e300);
        std::vector<uint8_t> done(size_t(b), 0);  // targeted: first success frozen
        std::vector<int> used(size_t(b), 0);

        for (int r = 0; r < cfg.restarts; ++r) {
            Rng rng = Rng::stream(cfg.seed, (uint64_t(1) << 40) | uint64_t(shard), uint64_t(r));
            Tensor<S> cur = x0;
            if (cfg.random_start && eps > S(0)) {
                for (int64_t i = 0; i < cur.size(); ++i)
                    cur[i] += S(rng.uniform(-double(eps), double(eps)));
                project_linf(x0, cur, eps);
            }

            auto score = [&](const detail::ShardEval<S>& ev, int step_idx) {
                for (int i = 0; i < b; ++i) {
                    if (done[size_t(i)]) continue;
                    const bool hit =
                        detail::iterate_success<S>(cfg, ev.pred[size_t(i)], yb[size_t(i)]);
                    if (cfg.targeted()) {
                        if (hit) {
                            done[size_t(i)] = 1;
                            best_obj[size_t(i)] = ev.obj[size_t(i)];
                            used[size_t(i)] = step_idx;
                            const int64_t stride = numel(cur.shape) / b;
                            std::copy(cur.data() + i * stride, cur.data() + (i + 1) * stride,
                                      best_x.data() + i * stride);
                        }
                    } else if (ev.obj[size_t(i)] > best_obj[size_t(i)]) {
                        best_obj[size_t(i)] = ev.obj[size_t(i)];
                        used[size_t(i)] = step_idx;
                        const int64_t stride = numel(cur.shape) / b;
                        std::copy(cur.data() + i * stride, cur.data() + (i + 1) * stride,
                                  best_x.data() + i * stride);
                    }
                }
            };

            for (int step = 0; step < cfg.steps; ++step) {
                Graph<S> g;
                auto bind = bind_params(g, m, false);
                const int xnode = g.leaf(cur, true);
                auto ev = detail::shard_objective(g, m, bind, xnode, yb, cfg, ref,
                                                  ref_entropy);
                score(ev, r * cfg.steps + step);
                g.backward(ev.loss_node);
                const std::vector<S>& grad = g.grad(xnode);
                for (S v : grad)
                    ADVLAB_CHECK(std::isfinite(double(v)),
                                 "attack gradient non-finite at restart ", r, " step ",
                                 step);
                for (int64_t i = 0; i < cur.size(); ++i)
                    cur[i] += alpha * sgn(grad[size_t(i)]);
                project_linf(x0, cur, eps);
            }
            {
                Graph<S> g;
                auto bind = bind_params(g, m, false);
                const int xnode = g.constant(cur);
                auto ev = detail::shard_objective(g, m, bind, xnode, yb, cfg, ref,
                                                  ref_entropy);
                score(ev, (r + 1) * cfg.steps);
            }
        }

        detail::write_rows(res.x_adv, best_x, s0);
        // Success judged at the returned iterate.
        Graph<S> g;
        auto bind = bind_params(g, m, false);
        auto ev = detail::shard_objective(g, m, bind, g.constant(best_x), yb, cfg, ref,
                                          ref_entropy);
        for (int i = 0; i < b; ++i) {
            res.success[size_t(s0 + i)] =
                detail::iterate_success<S>(cfg, ev.pred[size_t(i)], yb[size_t(i)]) ? 1 : 0;
            res.steps_used[size_t(s0 + i)] =
                cfg.targeted() && done[size_t(i)] ? used[size_t(i)] : cfg.steps * cfg.restarts;
            res.final_loss[size_t(s0 + i)] = ev.obj[size_t(i)];
        }
    }
    return res;
}

// Single gradient-sign step at the full radius: pgd with steps=1, restarts=1,
// alpha=eps and no random start.
template <class S>
AttackResult<S> fgsm(const Model<S>& m, const Tensor<S>& x, const std::vector<int>& y,
                     AttackConfig cfg) {
    cfg.steps = 1;
    cfg.restarts = 1;
    cfg.alpha = cfg.eps;
    cfg.random_start = false;
    return pgd(m, x, y, cfg);
}

// The three-conjunct membership test: the clean point is classified as y,
// the perturbed point changes the prediction, and the pair stays within eps.
template <class S>
std::vector<uint8_t> is_adversarial(const Model<S>& m, const Tensor<S>& x,
                                    const Tensor<S>& xp, const std::vector<int>& y,
                                    double eps) {
    ADVLAB_CHECK(x.shape == xp.shape, "is_adversarial shape mismatch");
    const int64_t n = x.dim(0);
    const int64_t stride = numel(x.shape) / n;
    std::vector<int> pc = predict(m, x);
    std::vector<int> pa = predict(m, xp);
    std::vector<uint8_t> out(size_t(n), 0);
    for (int64_t i = 0; i < n; ++i) {
        double dist = 0;
        for (int64_t j = 0; j < stride; ++j)
            dist = std::max(dist, std::abs(double(xp[i * stride + j]) -
                                           double(x[i * stride + j])));
        out[size_t(i)] = pc[size_t(i)] == y[size_t(i)] &&
                         pa[size_t(i)] != pc[size_t(i)] && dist <= eps + 1e-6;
    }
    return out;
}

// Gradient-free attack: propose square sign patches at the eps boundary and
// keep any proposal that raises the untargeted logit margin. Each proposal
// evaluation costs one query from the per-example budget.
template <class S>
AttackResult<S> random_search_attack(const Model<S>& m, const Tensor<S>& x,
                                     const std::vector<int>& y, const AttackConfig& cfg) {
    ADVLAB_CHECK(x.shape.size() == 4, "random search expects image input [N,C,H,W]");
    ADVLAB_CHECK(cfg.budget >= 0, "budget must be non-negative");
    const int64_t n = x.dim(0);
    const int c = x.dim(1), h = x.dim(2), w = x.dim(3);
    ADVLAB_CHECK(n == int64_t(y.size()), "random search: ", n, " inputs vs ", y.size(),
                 " labels");
    const S eps = S(cfg.eps);

    AttackResult<S> res;
    res.x_adv = x;
    res.success.assign(size_t(n), 0);
    res.steps_used.assign(size_t(n), 0);
    res.final_loss.assign(size_t(n), 0.0);

    auto margins = [&](const Tensor<S>& xb, const std::vector<int>& yb) {
        Tensor<S> q = forward_eval(m, xb);
        const int k = q.dim(1);
        std::vector<double> mg(size_t(xb.dim(0)));
        for (int i = 0; i < xb.dim(0); ++i) {
            const S* row = q.data() + int64_t(i) * k;
            const int t = yb[size_t(i)];
            int up = t == 0 ? 1 : 0;
            for (int j = 0; j < k; ++j)
                if (j != t && row[j] > row[up]) up = j;
            mg[size_t(i)] = double(row[up]) - double(row[t]);
        }
        return mg;
    };

    for (int64_t s0 = 0, shard = 0; s0 < n; s0 += kAttackShard, ++shard) {
        const int b = int(std::min<int64_t>(kAttackShard, n - s0));
        const Tensor<S> x0 = detail::slice_rows(x, s0, b);
        std::vector<int> yb(y.begin() + s0, y.begin() + s0 + b);
        Rng rng = Rng::stream(cfg.seed, (uint64_t(2) << 40) | uint64_t(shard));

        Tensor<S> cur = x0;
        std::vector<double> best = margins(cur, yb);
        std::vector<uint8_t> live(static_cast<size_t>(b));
        std::vector<int> used(size_t(b), 0);
        for (int i = 0; i < b; ++i) live[size_t(i)] = best[size_t(i)] <= 0;

        for (int64_t t = 0; t < cfg.budget; ++t) {
            bool any = false;
            for (auto v : live) any = any || v;
            if (!any) break;

            // Patch side shrinks as the budget burns down.
            const double frac = double(t) / double(std::max<int64_t>(cfg.budget, 1));
            int side = h / 2;
            if (frac > 0.2) side = h / 4;
            if (frac > 0.5) side = h / 8;
            if (frac > 0.8) side = 1;
            side = std::max(side, 1);

            Tensor<S> prop = cur;
            std::vector<std::array<int, 2>> corner(static_cast<size_t>(b));
            std::vector<std::vector<S>> signs(static_cast<size_t>(b));
            for (int i = 0; i < b; ++i) {
                if (!live[size_t(i)]) continue;
                const int r0 = int(rng.uniform_int(uint64_t(h - side + 1)));
                const int c0 = int(rng.uniform_int(uint64_t(w - side + 1)));
                corner[size_t(i)] = {r0, c0};
                signs[size_t(i)].resize(size_t(c));
                for (int ch = 0; ch < c; ++ch) signs[size_t(i)][size_t(ch)] = S(rng.sign());
                for (int ch = 0; ch < c; ++ch)
                    for (int rr = 0; rr < side; ++rr)
                        for (int cc = 0; cc < side; ++cc) {
                            const int64_t idx =
                                ((int64_t(i) * c + ch) * h + (r0 + rr)) * w + (c0 + cc);
                            prop[idx] = x0[idx] + signs[size_t(i)][size_t(ch)] * eps;
                        }
            }
            project_linf(x0, prop, eps);

            std::vector<double> mg = margins(prop, yb);
            for (int i = 0; i < b; ++i) {
                if (!live[size_t(i)]) continue;
                used[size_t(i)] = int(t) + 1;
                if (mg[size_t(i)] > best[size_t(i)]) {
                    best[size_t(i)] = mg[size_t(i)];
                    const int64_t stride = numel(cur.shape) / b;
                    std::copy(prop.data() + i * stride, prop.data() + (i + 1) * stride,
                              cur.data() + i * stride);
                }
                if (best[size_t(i)] > 0) live[size_t(i)] = 0;  // prediction flipped
            }
        }

        detail::write_rows(res.x_adv, cur, s0);
        std::vector<int> pred = predict(m, cur);
        for (int i = 0; i < b; ++i) {
            res.success[size_t(s0 + i)] = pred[size_t(i)] != yb[size_t(i)] ? 1 : 0;
            res.steps_used[size_t(s0 + i)] = used[size_t(i)];
            res.final_loss[size_t(s0 + i)] = best[size_t(i)];
        }
    }
    return res;
}

}  // namespace advlab
