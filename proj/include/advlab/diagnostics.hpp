#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "advlab/attacks.hpp"

namespace advlab {

// Input-gradient split for the cross-entropy loss: the target term
// (p_t - 1) d q_t / dx and the rival term sum_{i != t} p_i d q_i / dx.
// Their sum must reproduce the directly backpropagated gradient; when p_t
// saturates at 1 both terms die and the attack signal vanishes with them.
struct GradientDecomposition {
    Tensor<double> term_target;
    Tensor<double> term_rivals;
    Tensor<double> autodiff;       // d CE / dx, one backward pass
    std::vector<double> p_target;  // per example
    std::vector<double> grad_inf;  // per-example inf norm of the autodiff gradient
    double max_discrepancy = 0;    // worst |target + rivals - autodiff| entry
};

template <class S>
GradientDecomposition gradient_decomposition(const Model<S>& m, const Tensor<S>& x,
                                             const std::vector<int>& y) {
    const int64_t n = x.dim(0);
    ADVLAB_CHECK(n >= 1 && n == int64_t(y.size()), "decomposition needs one label per",
                 " example, got ", y.size(), " for ", n);
    const int64_t stride = numel(x.shape) / n;

    Tensor<S> q = forward_eval(m, x);
    const int k = q.dim(1);
    for (int i : y) ADVLAB_CHECK(i >= 0 && i < k, "label ", i, " out of range for ", k);

    std::vector<std::vector<double>> p(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        std::vector<double> row(static_cast<size_t>(k));
        for (int j = 0; j < k; ++j) row[size_t(j)] = double(q[i * k + j]);
        auto soft = softmax_temperature(row, 1.0);
        p[size_t(i)] = std::vector<double>(soft.p.begin(), soft.p.end());
    }

    // One backward pass per class gives d q_j / dx for the whole batch, since
    // example gradients never mix across rows.
    auto input_grad = [&](const Tensor<S>& selector, bool log_space) {
        Graph<S> g;
        auto bind = bind_params(g, m, false);
        const int xnode = g.leaf(x, true);
        int node = model_forward(g, m, bind, xnode, BNMode::Eval);
        if (log_space) node = g.log_softmax_t(node, S(1));
        g.backward(g.sum(g.mul(node, g.constant(selector))));
        const std::vector<S>& grad = g.grad(xnode);
        Tensor<double> out(x.shape);
        for (int64_t i = 0; i < out.size(); ++i) out[i] = double(grad[size_t(i)]);
        return out;
    };

    GradientDecomposition d;
    d.term_target = Tensor<double>::zeros(x.shape);
    d.term_rivals = Tensor<double>::zeros(x.shape);
    for (int j = 0; j < k; ++j) {
        Tensor<S> sel = Tensor<S>::zeros({int(n), k});
        for (int64_t i = 0; i < n; ++i) sel[i * k + j] = S(1);
        Tensor<double> gj = input_grad(sel, false);
        for (int64_t i = 0; i < n; ++i) {
            const int t = y[size_t(i)];
            const double w = j == t ? p[size_t(i)][size_t(j)] - 1.0 : p[size_t(i)][size_t(j)];
            Tensor<double>& dst = j == t ? d.term_target : d.term_rivals;
            for (int64_t e = 0; e < stride; ++e)
                dst[i * stride + e] += w * gj[i * stride + e];
        }
    }

    Tensor<S> sel = Tensor<S>::zeros({int(n), k});
    for (int64_t i = 0; i < n; ++i) sel[i * k + y[size_t(i)]] = S(-1);
    d.autodiff = input_grad(sel, true);

    d.p_target.resize(size_t(n));
    d.grad_inf.resize(size_t(n));
    for (int64_t i = 0; i < n; ++i) {
        d.p_target[size_t(i)] = p[size_t(i)][size_t(y[size_t(i)])];
        double inf = 0;
        for (int64_t e = 0; e < stride; ++e) {
            inf = std::max(inf, std::abs(d.autodiff[i * stride + e]));
            const double gap = std::abs(d.term_target[i * stride + e] +
                                        d.term_rivals[i * stride + e] -
                                        d.autodiff[i * stride + e]);
            d.max_discrepancy = std::max(d.max_discrepancy, gap);
        }
        d.grad_inf[size_t(i)] = inf;
    }
    return d;
}

// Share of examples whose loss gradient is numerically dead at the input.
inline double vanishing_fraction(const GradientDecomposition& d, double tol = 1e-8) {
    if (d.grad_inf.empty()) return 0;
    int64_t dead = 0;
    for (double v : d.grad_inf)
        if (v <= tol) ++dead;
    return double(dead) / double(d.grad_inf.size());
}

struct RuleResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Accuracies after each stage of the filtered attack pipeline, in percent
// over the full probe set. -1 marks a stage that was not run.
struct StagedAccuracies {
    double clean = -1;
    double pgd_ce = -1;
    double targeted = -1;
    double margin = -1;
    double random_search = -1;
};

struct DiagnosticsReport {
    std::vector<RuleResult> rules;
    double vanishing = -1;  // fraction from gradient_decomposition, when measured
    StagedAccuracies staged;

    bool masking_flagged() const {
        for (const RuleResult& r : rules)
            if (!r.pass) return true;
        return false;
    }
};

struct MaskingConfig {
    double eps = 0.3;                // operating radius for the attack comparisons
    std::vector<double> eps_grid;    // defaults to {eps/2, eps, 2eps, large_eps}
    double large_eps = 0.5;          // any honest model collapses at half the range
    double collapse_acc = 10.0;      // percent the large-eps accuracy must not exceed
    int pgd_steps = 20;
    int restarts = 1;
    double slack = 2.5;              // percentage points of probe noise tolerated
    uint64_t seed = 0;
};

namespace detail {

template <class S>
double post_attack_accuracy(const Model<S>& m, const std::vector<int>& y,
                            const AttackResult<S>& r) {
    std::vector<int> pred = predict(m, r.x_adv);
    int64_t hits = 0;
    for (size_t i = 0; i < y.size(); ++i)
        if (pred[i] == y[i]) ++hits;
    return 100.0 * double(hits) / double(y.size());
}

}  // namespace detail

// Three sanity rules that a gradient-masking model breaks: attacks must get
// stronger with radius and collapse eventually (R1), more gradient steps must
// not be weaker than one step (R2), and gradients must not lose to blind
// search at the same query budget (R3).
template <class S>
DiagnosticsReport masking_battery(const Model<S>& m, const Tensor<S>& x,
                                  const std::vector<int>& y, const MaskingConfig& cfg) {
    ADVLAB_CHECK(x.shape.size() == 4,
                 "masking battery needs image input [N,C,H,W] for the search stage");
    ADVLAB_CHECK(cfg.eps > 0 && cfg.large_eps >= cfg.eps, "need 0 < eps <= large_eps");

    std::vector<double> grid = cfg.eps_grid;
    if (grid.empty()) grid = {0.5 * cfg.eps, cfg.eps, 2.0 * cfg.eps, cfg.large_eps};
    std::sort(grid.begin(), grid.end());

    AttackConfig base;
    base.steps = cfg.pgd_steps;
    base.restarts = cfg.restarts;
    base.seed = cfg.seed;

    DiagnosticsReport rep;

    {
        RuleResult r;
        r.name = "r1-eps-collapse";
        bool monotone = true;
        double prev = 1e300;
        std::ostringstream det;
        double last = 100.0;
        for (size_t i = 0; i < grid.size(); ++i) {
            AttackConfig a = base;
            a.eps = grid[i];
            const double acc = detail::post_attack_accuracy(m, y, pgd(m, x, y, a));
            if (acc > prev + cfg.slack) monotone = false;
            prev = acc;
            last = acc;
            if (i) det << ' ';
            det << "acc@" << fmt_double(grid[i]) << '=' << fmt_double(acc);
        }
        const bool collapsed = last <= cfg.collapse_acc;
        r.pass = monotone && collapsed;
        det << (monotone ? " monotone" : " NOT-monotone");
        det << (collapsed ? " collapsed" : " NOT-collapsed");
        r.detail = det.str();
        rep.rules.push_back(std::move(r));
    }

    AttackConfig at = base;
    at.eps = cfg.eps;
    const double acc_pgd = detail::post_attack_accuracy(m, y, pgd(m, x, y, at));
    {
        RuleResult r;
        r.name = "r2-multistep-vs-fgsm";
        const double acc_fgsm = detail::post_attack_accuracy(m, y, fgsm(m, x, y, at));
        r.pass = acc_pgd <= acc_fgsm + cfg.slack;
        std::ostringstream det;
        det << "pgd=" << fmt_double(acc_pgd) << " fgsm=" << fmt_double(acc_fgsm);
        r.detail = det.str();
        rep.rules.push_back(std::move(r));
    }
    {
        RuleResult r;
        r.name = "r3-gradient-vs-random";
        AttackConfig rs = at;
        rs.budget = int64_t(cfg.pgd_steps) * cfg.restarts;  // one step, one query
        const double acc_rs =
            detail::post_attack_accuracy(m, y, random_search_attack(m, x, y, rs));
        r.pass = acc_pgd <= acc_rs + cfg.slack;
        std::ostringstream det;
        det << "pgd=" << fmt_double(acc_pgd) << " random=" << fmt_double(acc_rs)
            << " budget=" << rs.budget;
        r.detail = det.str();
        rep.rules.push_back(std::move(r));
    }
    return rep;
}

struct AaLiteConfig {
    double eps = 0.3;
    int steps = 20;
    int restarts = 5;  // first stage only
    int64_t budget = 1000;
    uint64_t seed = 0;
};

namespace detail {

template <class S>
Tensor<S> take_rows(const Tensor<S>& x, const std::vector<int64_t>& idx) {
    const int64_t stride = numel(x.shape) / x.dim(0);
    Shape s = x.shape;
    s[0] = int(idx.size());
    Tensor<S> out(s);
    for (size_t i = 0; i < idx.size(); ++i)
        std::copy(x.data() + idx[i] * stride, x.data() + (idx[i] + 1) * stride,
                  out.data() + int64_t(i) * stride);
    return out;
}

}  // namespace detail

// Filtered attack pipeline: each stage only sees the examples every earlier
// stage failed to break, so the reported accuracies can only go down. The
// stages change character on purpose: plain CE ascent, a sweep of targeted
// margin attacks, an untargeted margin attack, then gradient-free search.
template <class S>
DiagnosticsReport aa_lite(const Model<S>& m, const Tensor<S>& x,
                          const std::vector<int>& y, const AaLiteConfig& cfg) {
    ADVLAB_CHECK(x.shape.size() == 4,
                 "aa-lite needs image input [N,C,H,W] for the search stage");
    const int64_t n = x.dim(0);
    ADVLAB_CHECK(n >= 1 && n == int64_t(y.size()), "aa-lite needs one label per example");
    const int k = m.classes;

    DiagnosticsReport rep;
    std::vector<int64_t> alive;
    {
        std::vector<int> pred = predict(m, x);
        for (int64_t i = 0; i < n; ++i)
            if (pred[size_t(i)] == y[size_t(i)]) alive.push_back(i);
    }
    const auto acc_now = [&] { return 100.0 * double(alive.size()) / double(n); };
    rep.staged.clean = acc_now();

    auto labels_of = [&](const std::vector<int64_t>& idx) {
        std::vector<int> out(idx.size());
        for (size_t i = 0; i < idx.size(); ++i) out[i] = y[size_t(idx[i])];
        return out;
    };
    auto filter = [&](const AttackResult<S>& r, const std::vector<int64_t>& idx) {
        std::vector<int64_t> next;
        for (size_t i = 0; i < idx.size(); ++i)
            if (!r.success[i]) next.push_back(idx[i]);
        return next;
    };

    AttackConfig base;
    base.eps = cfg.eps;
    base.steps = cfg.steps;
    base.seed = cfg.seed;

    if (!alive.empty()) {
        AttackConfig a = base;
        a.restarts = cfg.restarts;
        Tensor<S> xs = detail::take_rows(x, alive);
        alive = filter(pgd(m, xs, labels_of(alive), a), alive);
    }
    rep.staged.pgd_ce = acc_now();

    for (int target = 0; target < k && !alive.empty(); ++target) {
        std::vector<int64_t> idx;
        for (int64_t i : alive)
            if (y[size_t(i)] != target) idx.push_back(i);
        if (idx.empty()) continue;
        AttackConfig a = base;
        a.loss = AttackLoss::Margin;
        a.target = target;
        a.seed = cfg.seed + 101 + uint64_t(target);  // avoid replaying stage 1 starts
        Tensor<S> xs = detail::take_rows(x, idx);
        AttackResult<S> r = pgd(m, xs, labels_of(idx), a);
        std::vector<int64_t> broken;
        for (size_t i = 0; i < idx.size(); ++i)
            if (r.success[i]) broken.push_back(idx[i]);
        if (!broken.empty()) {
            std::vector<int64_t> next;
            std::set_difference(alive.begin(), alive.end(), broken.begin(), broken.end(),
                                std::back_inserter(next));
            alive = std::move(next);
        }
    }
    rep.staged.targeted = acc_now();

    if (!alive.empty()) {
        AttackConfig a = base;
        a.loss = AttackLoss::Margin;
        a.seed = cfg.seed + 7919;
        Tensor<S> xs = detail::take_rows(x, alive);
        alive = filter(pgd(m, xs, labels_of(alive), a), alive);
    }
    rep.staged.margin = acc_now();

    if (!alive.empty()) {
        AttackConfig a = base;
        a.budget = cfg.budget;
        a.seed = cfg.seed + 104729;
        Tensor<S> xs = detail::take_rows(x, alive);
        alive = filter(random_search_attack(m, xs, labels_of(alive), a), alive);
    }
    rep.staged.random_search = acc_now();

    ADVLAB_CHECK(rep.staged.clean >= rep.staged.pgd_ce &&
                     rep.staged.pgd_ce >= rep.staged.targeted &&
                     rep.staged.targeted >= rep.staged.margin &&
                     rep.staged.margin >= rep.staged.random_search,
                 "stage accuracies must not increase");
    return rep;
}

}  // namespace advlab
