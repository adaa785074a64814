#pragma once

#include <iostream>
#include <string>
#include <vector>

#include "advlab/attacks.hpp"
#include "advlab/autodiff.hpp"
#include "advlab/nn.hpp"
#include "advlab/prob.hpp"
#include "advlab/tensor.hpp"

namespace advlab {

enum class LossKind { Natural, Madry, Trades, KD, LTD };

inline const char* to_string(LossKind k) {
    switch (k) {
        case LossKind::Natural: return "natural";
        case LossKind::Madry: return "madry";
        case LossKind::Trades: return "trades";
        case LossKind::KD: return "kd";
        case LossKind::LTD: return "ltd";
    }
    return "?";
}

inline LossKind parse_loss_kind(const std::string& s) {
    if (s == "natural") return LossKind::Natural;
    if (s == "madry") return LossKind::Madry;
    if (s == "trades") return LossKind::Trades;
    if (s == "kd") return LossKind::KD;
    if (s == "ltd") return LossKind::LTD;
    fail("unknown loss kind '", s, "' (expected natural, madry, trades, kd or ltd)");
}

// Reported per step; total == sce + lambda * delta up to roundoff.
struct LossBreakdown {
    double total = 0;
    double sce = 0;
    double delta = 0;
    double lambda = 0;
};

template <class S>
struct LossResult {
    LossBreakdown breakdown;
    std::vector<Tensor<S>> grads;  // aligned with Model::params
    Tensor<S> x_adv;               // inner-attack batch; empty for natural/kd
    bool attack_fell_back = false;
};

namespace detail {

struct LossNodes {
    int total = -1;
    int sce = -1;
    int delta = -1;  // -1 when the loss has no regularizer
    double lambda = 0;
};

// Batch-mean soft-label cross entropy -1/B sum_i sum_j t_ij ls_ij against an
// already built log-softmax node.
template <class S>
int sce_soft_node(Graph<S>& g, int ls, const Tensor<S>& targets) {
    const int64_t b = targets.dim(0);
    return g.scale(g.sum(g.mul(ls, g.constant(targets))), S(-1) / S(b));
}

template <class S>
Tensor<S> one_hot_rows(const std::vector<int>& y, int k) {
    Tensor<S> t = Tensor<S>::zeros({int(y.size()), k});
    for (size_t i = 0; i < y.size(); ++i) {
        ADVLAB_CHECK(y[i] >= 0 && y[i] < k, "label ", y[i], " out of range for ", k,
                     " classes");
        t[int64_t(i) * k + y[i]] = S(1);
    }
    return t;
}

// Batch-mean KLD between the distributions behind two log-softmax nodes,
// reference first; gradients flow through both branches.
template <class S>
int kld_node(Graph<S>& g, int ls_ref, int ls_other) {
    const int64_t rows = g.value_tensor(ls_ref).dim(0);
    const int p_ref = g.exp(ls_ref);
    return g.scale(g.sum(g.mul(p_ref, g.sub(ls_ref, ls_other))), S(1) / S(rows));
}

// The two forward passes of a two-branch objective, in the order and
// batch-norm modes the ordering policy dictates. Single-source policies run
// the excluded branch in Eval mode against the running statistics as they
// stood at step entry, before the kept branch refreshes them; the loss is
// then a clean function of the parameters given the state.
template <class S>
std::pair<int, int> two_branch_logits(Graph<S>& g, Model<S>& m,
                                      const GraphBinding<S>& bind, int xn, int xa,
                                      OrderingPolicy pol) {
    int zn = -1, za = -1;
    switch (pol) {
        case OrderingPolicy::AdvFirst:
            za = model_forward(g, m, bind, xa, BNMode::TrainUpdate);
            zn = model_forward(g, m, bind, xn, BNMode::TrainUpdate);
            break;
        case OrderingPolicy::NatFirst:
            zn = model_forward(g, m, bind, xn, BNMode::TrainUpdate);
            za = model_forward(g, m, bind, xa, BNMode::TrainUpdate);
            break;
        case OrderingPolicy::NatOnly:
            za = model_forward(g, m, bind, xa, BNMode::Eval);
            zn = model_forward(g, m, bind, xn, BNMode::TrainUpdate);
            break;
        case OrderingPolicy::AdvOnly:
            zn = model_forward(g, m, bind, xn, BNMode::Eval);
            za = model_forward(g, m, bind, xa, BNMode::TrainUpdate);
            break;
    }
    return {zn, za};
}

template <class S>
LossNodes build_natural(Graph<S>& g, Model<S>& m, const GraphBinding<S>& bind,
                        const Tensor<S>& x, const std::vector<int>& y) {
    const int z = model_forward(g, m, bind, g.constant(x), BNMode::TrainUpdate);
    const int ls = g.log_softmax_t(z, S(1));
    LossNodes n;
    n.sce = sce_soft_node(g, ls, one_hot_rows<S>(y, m.classes));
    n.total = n.sce;
    return n;
}

// Shared core of the TRADES and LTD objectives: cross entropy between the
// given targets and the natural branch, plus lambda times the divergence
// between the natural and adversarial branches.
template <class S>
LossNodes build_two_branch(Graph<S>& g, Model<S>& m, const GraphBinding<S>& bind,
                           const Tensor<S>& x, const Tensor<S>& x_adv,
                           const Tensor<S>& targets, double lambda,
                           OrderingPolicy pol, bool reverse_kl) {
    ADVLAB_CHECK(lambda >= 0, "lambda must be non-negative, got ", lambda);
    ADVLAB_CHECK(x.shape == x_adv.shape, "natural and adversarial batches differ: ",
                 shape_str(x.shape), " vs ", shape_str(x_adv.shape));
    ADVLAB_CHECK(targets.dim(0) == x.dim(0) && targets.dim(1) == m.classes,
                 "targets are ", shape_str(targets.shape), " for a batch of ",
                 x.dim(0), " and ", m.classes, " classes");
    auto [zn, za] = two_branch_logits(g, m, bind, g.constant(x), g.constant(x_adv), pol);
    const int ls_nat = g.log_softmax_t(zn, S(1));
    const int ls_adv = g.log_softmax_t(za, S(1));
    LossNodes n;
    n.lambda = lambda;
    n.sce = sce_soft_node(g, ls_nat, targets);
    n.delta = reverse_kl ? kld_node(g, ls_adv, ls_nat) : kld_node(g, ls_nat, ls_adv);
    n.total = g.add(n.sce, g.scale(n.delta, S(lambda)));
    return n;
}

template <class S>
LossNodes build_trades(Graph<S>& g, Model<S>& m, const GraphBinding<S>& bind,
                       const Tensor<S>& x, const Tensor<S>& x_adv,
                       const std::vector<int>& y, double lambda, OrderingPolicy pol,
                       bool reverse_kl = false) {
    return build_two_branch(g, m, bind, x, x_adv, one_hot_rows<S>(y, m.classes),
                            lambda, pol, reverse_kl);
}

template <class S>
LossNodes build_ltd(Graph<S>& g, Model<S>& m, const GraphBinding<S>& bind,
                    const Tensor<S>& soft_targets, const Tensor<S>& x,
                    const Tensor<S>& x_adv, double lambda, OrderingPolicy pol,
                    bool reverse_kl = false) {
    ADVLAB_CHECK(soft_targets.dim(0) == x.dim(0),
                 "soft labels cover ", soft_targets.dim(0),
                 " examples but the batch has ", x.dim(0));
    for (int64_t i = 0; i < soft_targets.dim(0); ++i) {
        std::vector<S> row(soft_targets.data() + i * m.classes,
                           soft_targets.data() + (i + 1) * m.classes);
        ProbVector<S>::from_raw(std::move(row));
    }
    return build_two_branch(g, m, bind, x, x_adv, soft_targets, lambda, pol,
                            reverse_kl);
}

template <class S>
LossNodes build_kd(Graph<S>& g, Model<S>& m, const GraphBinding<S>& bind,
                   const Tensor<S>& teacher_probs_tau, const Tensor<S>& x,
                   const std::vector<int>& y, double tau, double lambda,
                   double sce_temp) {
    ADVLAB_CHECK(tau > 0, "temperature must be positive, got ", tau);
    ADVLAB_CHECK(sce_temp > 0, "sce temperature must be positive, got ", sce_temp);
    if (lambda < 0) lambda = tau * tau;
    const int64_t b = x.dim(0);
    ADVLAB_CHECK(teacher_probs_tau.dim(0) == b && teacher_probs_tau.dim(1) == m.classes,
                 "teacher labels are ", shape_str(teacher_probs_tau.shape),
                 " for a batch of ", b, " and ", m.classes, " classes");

    const int z = model_forward(g, m, bind, g.constant(x), BNMode::TrainUpdate);
    LossNodes n;
    n.lambda = lambda;
    n.sce = sce_soft_node(g, g.log_softmax_t(z, S(sce_temp)),
                          one_hot_rows<S>(y, m.classes));

    // KLD(teacher^tau || student^tau): the cross-entropy part carries the
    // gradient, the teacher-entropy part is a constant shift that makes the
    // reported value a true divergence.
    const int ls_tau = g.log_softmax_t(z, S(tau));
    double ent = 0;
    for (int64_t i = 0; i < b; ++i) {
        std::vector<S> row(teacher_probs_tau.data() + i * m.classes,
                           teacher_probs_tau.data() + (i + 1) * m.classes);
        ent += double(entropy(ProbVector<S>::from_raw(std::move(row))));
    }
    const int ce = sce_soft_node(g, ls_tau, teacher_probs_tau);
    n.delta = g.add(ce, g.constant(Tensor<S>({1}, {S(-ent / double(b))})));
    n.total = g.add(n.sce, g.scale(n.delta, S(lambda)));
    return n;
}

template <class S>
LossResult<S> finish(Graph<S>& g, Model<S>& m, const GraphBinding<S>& bind,
                     const LossNodes& n) {
    g.backward(n.total);
    LossResult<S> r;
    r.breakdown.total = double(g.val(n.total)[0]);
    r.breakdown.sce = double(g.val(n.sce)[0]);
    r.breakdown.delta = n.delta >= 0 ? double(g.val(n.delta)[0]) : 0.0;
    r.breakdown.lambda = n.lambda;
    r.grads.reserve(m.params.size());
    for (size_t i = 0; i < m.params.size(); ++i)
        r.grads.push_back(g.grad_tensor(bind.params[i]));
    return r;
}

}  // namespace detail

template <class S>
LossResult<S> natural_loss(Model<S>& m, const Tensor<S>& x, const std::vector<int>& y) {
    Graph<S> g;
    auto bind = bind_params(g, m);
    return detail::finish(g, m, bind, detail::build_natural(g, m, bind, x, y));
}

// Plain cross entropy on an externally supplied adversarial batch.
template <class S>
LossResult<S> madry_loss_on(Model<S>& m, const Tensor<S>& x_adv,
                            const std::vector<int>& y) {
    LossResult<S> r = natural_loss(m, x_adv, y);
    r.x_adv = x_adv;
    return r;
}

template <class S>
LossResult<S> trades_loss_on(Model<S>& m, const Tensor<S>& x, const Tensor<S>& x_adv,
                             const std::vector<int>& y, double lambda,
                             OrderingPolicy pol = OrderingPolicy::AdvFirst,
                             bool reverse_kl = false) {
    Graph<S> g;
    auto bind = bind_params(g, m);
    auto n = detail::build_trades(g, m, bind, x, x_adv, y, lambda, pol, reverse_kl);
    LossResult<S> r = detail::finish(g, m, bind, n);
    r.x_adv = x_adv;
    return r;
}

template <class S>
LossResult<S> ltd_loss_on(Model<S>& m, const Tensor<S>& soft_targets,
                          const Tensor<S>& x, const Tensor<S>& x_adv, double lambda,
                          OrderingPolicy pol = OrderingPolicy::AdvFirst,
                          bool reverse_kl = false) {
    Graph<S> g;
    auto bind = bind_params(g, m);
    auto n = detail::build_ltd(g, m, bind, soft_targets, x, x_adv, lambda, pol,
                               reverse_kl);
    LossResult<S> r = detail::finish(g, m, bind, n);
    r.x_adv = x_adv;
    return r;
}

// Tempered teacher labels for a batch, computed with the teacher untouched.
template <class S>
Tensor<S> teacher_soft_batch(const Model<S>& teacher, const Tensor<S>& x, double tau) {
    ADVLAB_CHECK(tau > 0, "temperature must be positive, got ", tau);
    const Tensor<S> q = forward_eval(teacher, x);
    const int64_t b = q.dim(0), k = q.dim(1);
    Tensor<S> t({int(b), int(k)});
    for (int64_t i = 0; i < b; ++i) {
        std::vector<S> row(q.data() + i * k, q.data() + (i + 1) * k);
        auto p = softmax_temperature(row, S(tau));
        std::copy(p.p.begin(), p.p.end(), t.data() + i * k);
    }
    return t;
}

// Eq-5 style distillation; lambda < 0 selects the tau^2 default. sce_temp
// tempers the one-hot term as well, which stock distillation leaves at 1.
template <class S>
LossResult<S> kd_loss(Model<S>& student, const Model<S>& teacher, const Tensor<S>& x,
                      const std::vector<int>& y, double tau, double lambda = -1,
                      double sce_temp = 1.0) {
    ADVLAB_CHECK(teacher.classes == student.classes, "kd teacher predicts ",
                 teacher.classes, " classes but the student predicts ",
                 student.classes);
    ADVLAB_CHECK(tau > 0, "temperature must be positive, got ", tau);
    const Tensor<S> tp = teacher_soft_batch(teacher, x, tau);
    Graph<S> g;
    auto bind = bind_params(g, student);
    auto n = detail::build_kd(g, student, bind, tp, x, y, tau, lambda, sce_temp);
    return detail::finish(g, student, bind, n);
}

namespace detail {

// Inner maximization with a procedural-failure fallback: a thrown attack
// error must not kill a long run, so the step degrades to clean data.
template <class S>
Tensor<S> inner_attack(const Model<S>& m, const Tensor<S>& x, const std::vector<int>& y,
                       AttackConfig cfg, AttackLoss objective, bool* fell_back) {
    cfg.loss = objective;
    cfg.bn_mode = BNMode::Eval;
    *fell_back = false;
    if (cfg.eps <= 0) return x;
    try {
        return pgd(m, x, y, cfg).x_adv;
    } catch (const Error& e) {
        std::cerr << "warning: inner attack failed (" << e.what()
                  << "); training on the clean batch\n";
        *fell_back = true;
        return x;
    }
}

}  // namespace detail

template <class S>
LossResult<S> madry_loss(Model<S>& m, const Tensor<S>& x, const std::vector<int>& y,
                         const AttackConfig& atk) {
    bool fell_back = false;
    Tensor<S> xa =
        detail::inner_attack(m, x, y, atk, AttackLoss::CrossEntropy, &fell_back);
    LossResult<S> r = madry_loss_on(m, xa, y);
    r.attack_fell_back = fell_back;
    return r;
}

template <class S>
LossResult<S> trades_loss(Model<S>& m, const Tensor<S>& x, const std::vector<int>& y,
                          double lambda, const AttackConfig& atk,
                          OrderingPolicy pol = OrderingPolicy::AdvFirst,
                          AttackLoss inner = AttackLoss::KlToNatural,
                          bool reverse_kl = false) {
    bool fell_back = false;
    Tensor<S> xa = detail::inner_attack(m, x, y, atk, inner, &fell_back);
    LossResult<S> r = trades_loss_on(m, x, xa, y, lambda, pol, reverse_kl);
    r.attack_fell_back = fell_back;
    return r;
}

// The adversarial branch is searched with the original hard label by
// default; the soft targets only shape the natural-branch cross entropy.
template <class S>
LossResult<S> ltd_loss(Model<S>& m, const Tensor<S>& soft_targets, const Tensor<S>& x,
                       const std::vector<int>& y, double lambda,
                       const AttackConfig& atk,
                       OrderingPolicy pol = OrderingPolicy::AdvFirst,
                       AttackLoss inner = AttackLoss::CrossEntropy,
                       bool reverse_kl = false) {
    bool fell_back = false;
    Tensor<S> xa = detail::inner_attack(m, x, y, atk, inner, &fell_back);
    LossResult<S> r = ltd_loss_on(m, soft_targets, x, xa, lambda, pol, reverse_kl);
    r.attack_fell_back = fell_back;
    return r;
}

}  // namespace advlab
