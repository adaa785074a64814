#pragma once

#include <array>
#include <cmath>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "advlab/datasets.hpp"
#include "advlab/losses.hpp"

namespace advlab {

// Two-class mixture of 2-D Gaussians with a shared covariance. The posterior
// and the optimal error rate are both closed-form, which makes the mixture a
// ground-truth oracle for generalization measurements.
struct OracleGenerator {
    std::array<double, 2> mu0{-1.0, -1.0};
    std::array<double, 2> mu1{1.0, 1.0};
    std::array<double, 4> cov{1, 0, 0, 1};  // row-major 2x2, shared by both classes
    double prior1 = 0.5;
};

// Means on the diagonal at a distance giving roughly 5% optimal error.
inline OracleGenerator default_oracle_generator() {
    OracleGenerator g;
    const double m = 1.645 / std::sqrt(2.0);
    g.mu0 = {-m, -m};
    g.mu1 = {m, m};
    return g;
}

namespace detail {

inline void check_generator(const OracleGenerator& g) {
    ADVLAB_CHECK(g.cov[1] == g.cov[2], "covariance must be symmetric, got ", g.cov[1],
                 " vs ", g.cov[2]);
    const double det = g.cov[0] * g.cov[3] - g.cov[1] * g.cov[2];
    ADVLAB_CHECK(g.cov[0] > 0 && det > 0, "covariance is not positive definite");
    ADVLAB_CHECK(g.prior1 > 0 && g.prior1 < 1, "class prior must lie in (0,1), got ",
                 g.prior1);
}

// Solve cov * out = v for the 2x2 shared covariance.
inline std::array<double, 2> cov_solve(const OracleGenerator& g,
                                       const std::array<double, 2>& v) {
    const double det = g.cov[0] * g.cov[3] - g.cov[1] * g.cov[2];
    return {(g.cov[3] * v[0] - g.cov[1] * v[1]) / det,
            (g.cov[0] * v[1] - g.cov[2] * v[0]) / det};
}

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace detail

// Exact posterior P(class | x) from the generator, in class order (0, 1).
inline ProbVector<double> oracle_posterior(const OracleGenerator& g, double x0,
                                           double x1) {
    detail::check_generator(g);
    const std::array<double, 2> diff{g.mu1[0] - g.mu0[0], g.mu1[1] - g.mu0[1]};
    const std::array<double, 2> w = detail::cov_solve(g, diff);
    const std::array<double, 2> mid{0.5 * (g.mu0[0] + g.mu1[0]),
                                    0.5 * (g.mu0[1] + g.mu1[1])};
    const double logit = std::log(g.prior1 / (1.0 - g.prior1)) +
                         w[0] * (x0 - mid[0]) + w[1] * (x1 - mid[1]);
    const double p1 = 1.0 / (1.0 + std::exp(-logit));
    return ProbVector<double>::trusted({1.0 - p1, p1});
}

inline int bayes_predict(const OracleGenerator& g, double x0, double x1) {
    return oracle_posterior(g, x0, x1).argmax();
}

// Expected error of the optimal rule, via the Mahalanobis distance between
// the class means.
inline double bayes_error(const OracleGenerator& g) {
    detail::check_generator(g);
    const std::array<double, 2> diff{g.mu1[0] - g.mu0[0], g.mu1[1] - g.mu0[1]};
    const std::array<double, 2> w = detail::cov_solve(g, diff);
    const double d = std::sqrt(diff[0] * w[0] + diff[1] * w[1]);
    ADVLAB_CHECK(d > 0, "class means coincide, the mixture has no separator");
    const double kappa = std::log(g.prior1 / (1.0 - g.prior1));
    return (1.0 - g.prior1) * detail::std_normal_cdf(-d / 2 + kappa / d) +
           g.prior1 * detail::std_normal_cdf(-d / 2 - kappa / d);
}

// A draw from the mixture: points, their exact posteriors, and the class
// that generated each point as the hard label.
struct OracleDataset {
    OracleGenerator gen;
    Tensor<float> x;            // [n, 2]
    Tensor<double> posteriors;  // [n, 2] closed-form P(class | x)
    std::vector<int> y;         // generating class per point
};

inline OracleDataset sample_oracle(const OracleGenerator& g, int n, uint64_t seed) {
    detail::check_generator(g);
    ADVLAB_CHECK(n > 0, "oracle sample size must be positive, got ", n);
    // Cholesky factor of the shared covariance.
    const double la = std::sqrt(g.cov[0]);
    const double lb = g.cov[1] / la;
    const double lc = std::sqrt(g.cov[3] - lb * lb);

    OracleDataset d;
    d.gen = g;
    d.x = Tensor<float>({n, 2});
    d.posteriors = Tensor<double>({n, 2});
    d.y.resize(size_t(n));
    Rng rng = Rng::stream(seed, 0x6f7261);
    for (int i = 0; i < n; ++i) {
        const int cls = rng.uniform() < g.prior1 ? 1 : 0;
        const auto& mu = cls == 1 ? g.mu1 : g.mu0;
        const double z0 = rng.normal();
        const double z1 = rng.normal();
        // Posteriors are evaluated at the stored single-precision coordinates
        // so they can be recomputed exactly from the dataset alone.
        const float x0 = float(mu[0] + la * z0);
        const float x1 = float(mu[1] + lb * z0 + lc * z1);
        d.x[i * 2 + 0] = x0;
        d.x[i * 2 + 1] = x1;
        ProbVector<double> yp = oracle_posterior(g, double(x0), double(x1));
        d.posteriors[i * 2 + 0] = yp[0];
        d.posteriors[i * 2 + 1] = yp[1];
        d.y[size_t(i)] = cls;
    }
    return d;
}

inline Dataset to_dataset(const OracleDataset& od, std::string name) {
    Dataset d;
    d.name = std::move(name);
    d.x = od.x;
    d.y = od.y;
    d.classes = 2;
    return d;
}

// Mean -sum_i y^p_i log p_i of a model against the oracle posteriors. `raw`
// is the expression itself; the headline metric is its reciprocal, and the
// mean oracle entropy is the floor no model can beat.
struct GeneralizationLoss {
    double raw = 0;
    double reciprocal = 0;
    double entropy_floor = 0;
};

template <class S>
GeneralizationLoss generalization_loss(const Model<S>& m, const OracleDataset& od,
                                       int batch = 256) {
    const int64_t n = od.x.dim(0);
    ADVLAB_CHECK(n > 0, "generalization_loss on an empty oracle sample");
    GeneralizationLoss out;
    for (int64_t i0 = 0; i0 < n; i0 += batch) {
        const int64_t b = std::min<int64_t>(batch, n - i0);
        Tensor<S> xb({int(b), 2});
        for (int64_t i = 0; i < b * 2; ++i) xb[i] = S(od.x[i0 * 2 + i]);
        Tensor<S> p = teacher_soft_batch(m, xb, 1.0);
        const int k = p.dim(1);
        ADVLAB_CHECK(k == 2, "oracle comparisons need a two-class model, got ", k,
                     " outputs");
        for (int64_t i = 0; i < b; ++i) {
            ProbVector<double> yp = ProbVector<double>::trusted(
                {od.posteriors[(i0 + i) * 2], od.posteriors[(i0 + i) * 2 + 1]});
            ProbVector<double> pi = ProbVector<double>::trusted(
                {double(p[i * 2]), double(p[i * 2 + 1])});
            out.raw += double(sce_soft(yp, pi));
            out.entropy_floor += double(entropy(yp));
        }
    }
    out.raw /= double(n);
    out.entropy_floor /= double(n);
    out.reciprocal = out.raw > 0 ? 1.0 / out.raw
                                 : std::numeric_limits<double>::infinity();
    return out;
}

namespace detail {
inline double floored_log(double p) { return std::log(std::max(p, prob_floor<double>)); }
}  // namespace detail

// Mean over rows of -sum_i y^p_i log(p_t2_i / p_t1_i): how much the t2 model
// loses (positive) or gains (negative) in generalization relative to t1.
inline double delta_generalization(const Tensor<double>& yp, const Tensor<double>& p_t1,
                                   const Tensor<double>& p_t2) {
    ADVLAB_CHECK(yp.shape == p_t1.shape && yp.shape == p_t2.shape,
                 "delta_generalization needs aligned rows, got ", shape_str(yp.shape),
                 " vs ", shape_str(p_t1.shape), " vs ", shape_str(p_t2.shape));
    ADVLAB_CHECK(yp.shape.size() == 2 && yp.dim(0) > 0, "expected [n, k] inputs, got ",
                 shape_str(yp.shape));
    const int64_t n = yp.dim(0);
    const int64_t k = yp.dim(1);
    double acc = 0;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < k; ++j) {
            const double y = yp[i * k + j];
            if (y == 0) continue;
            acc -= y * (detail::floored_log(p_t2[i * k + j]) -
                        detail::floored_log(p_t1[i * k + j]));
        }
    return acc / double(n);
}

// One evaluated instance of the sufficient condition. `rhs` is
// |log(p2_t2/p2_t1) / log(p1_t2/p1_t1)| and `threshold` = 1/(1+rhs) is the
// smallest oracle mass on class 2 that satisfies it. The guarantee
// (contribution <= 0) needs every premise flag at once: class 1 dominant at
// both temperatures, t2 the softer output, and a non-degenerate oracle.
struct TheoremCheck {
    ProbVector<double> yp, p_t1, p_t2;
    double rhs = 0;
    double threshold = 0;
    bool ordering_ok = false;  // p1 > p2 at both temperatures
    bool softened = false;     // p1 does not grow from t1 to t2
    bool vacuous = false;      // oracle puts zero mass on class 2
    bool condition = false;    // y1/y2 <= rhs
    double contribution = 0;   // this row's term of the generalization delta
};

inline TheoremCheck theorem1_check(const ProbVector<double>& yp,
                                   const ProbVector<double>& p_t1,
                                   const ProbVector<double>& p_t2) {
    ADVLAB_CHECK(yp.size() == 2 && p_t1.size() == 2 && p_t2.size() == 2,
                 "theorem check is two-class; reduce wider vectors first");
    yp.validate();
    p_t1.validate();
    p_t2.validate();

    TheoremCheck c;
    c.yp = yp;
    c.p_t1 = p_t1;
    c.p_t2 = p_t2;
    c.ordering_ok = p_t1[0] > p_t1[1] && p_t2[0] > p_t2[1];
    c.softened = p_t2[0] <= p_t1[0];
    c.vacuous = yp[1] == 0;

    const double log_r1 = detail::floored_log(p_t2[0]) - detail::floored_log(p_t1[0]);
    const double log_r2 = detail::floored_log(p_t2[1]) - detail::floored_log(p_t1[1]);
    c.contribution = -yp[0] * log_r1 - yp[1] * log_r2;
    c.rhs = log_r1 == 0 ? 0.0 : std::abs(log_r2 / log_r1);
    c.threshold = 1.0 / (1.0 + c.rhs);
    c.condition = !c.vacuous && yp[0] / yp[1] <= c.rhs;

    ADVLAB_CHECK(!(c.ordering_ok && c.softened && c.condition) ||
                     c.contribution <= 1e-12,
                 "sufficient condition held but the contribution is positive (",
                 c.contribution, ")");
    return c;
}

// Wider vectors collapse onto the model's favorite class and its strongest
// rival (renormalized pairs); the guarantee is only stated for two classes.
inline TheoremCheck theorem1_check_multiclass(const ProbVector<double>& yp,
                                              const ProbVector<double>& p_t1,
                                              const ProbVector<double>& p_t2) {
    const size_t k = p_t1.size();
    ADVLAB_CHECK(yp.size() == k && p_t2.size() == k,
                 "theorem check needs aligned vectors, got ", yp.size(), "/", k, "/",
                 p_t2.size());
    ADVLAB_CHECK(k >= 2, "theorem check needs at least two classes, got ", k);
    if (k == 2) return theorem1_check(yp, p_t1, p_t2);

    static bool warned = false;
    if (!warned) {
        std::cerr << "note: reducing " << k
                  << "-class vectors to (favorite, strongest rival) pairs for the "
                     "two-class condition\n";
        warned = true;
    }
    const size_t target = size_t(p_t1.argmax());
    size_t rival = target == 0 ? 1 : 0;
    for (size_t i = 0; i < k; ++i)
        if (i != target && p_t1[i] > p_t1[rival]) rival = i;

    auto pair_of = [&](const ProbVector<double>& v, const char* what) {
        const double mass = v[target] + v[rival];
        ADVLAB_CHECK(mass > 0, what, " has no mass on the reduced pair (classes ",
                     target, ", ", rival, ")");
        return ProbVector<double>::trusted({v[target] / mass, v[rival] / mass});
    };
    return theorem1_check(pair_of(yp, "oracle label"), pair_of(p_t1, "t1 output"),
                          pair_of(p_t2, "t2 output"));
}

// Brute-force check of the guarantee: sample genuine tempered pairs (so the
// ordering and softening premises hold by construction), pick an oracle that
// satisfies the condition with margin, and count sign violations.
struct TheoremFuzzResult {
    int trials = 0;
    int violations = 0;
    double worst_contribution = -std::numeric_limits<double>::infinity();
};

inline TheoremFuzzResult theorem1_fuzz(int trials, uint64_t seed) {
    ADVLAB_CHECK(trials > 0, "fuzz trial count must be positive, got ", trials);
    Rng rng = Rng::stream(seed, 0x746831);
    TheoremFuzzResult res;
    res.trials = trials;
    for (int t = 0; t < trials; ++t) {
        const double gap = rng.uniform(0.05, 10.0);
        const double t1 = rng.uniform(1.0, 20.0);
        const double t2 = t1 + rng.uniform(0.25, 10.0);
        ProbVector<double> p1 = softmax_temperature<double>({gap, 0.0}, t1);
        ProbVector<double> p2 = softmax_temperature<double>({gap, 0.0}, t2);

        const double log_r1 = std::log(p2[0]) - std::log(p1[0]);
        const double log_r2 = std::log(p2[1]) - std::log(p1[1]);
        const double rhs = std::abs(log_r2 / log_r1);
        const double lo = 1.0 / (1.0 + rhs);
        // Interior draw keeps the condition satisfied with slack, so sign
        // flips cannot be rounding artifacts.
        const double y2 = lo + (0.05 + 0.9 * rng.uniform()) * (0.5 - lo);
        ProbVector<double> yp = ProbVector<double>::trusted({1.0 - y2, y2});

        TheoremCheck c = theorem1_check(yp, p1, p2);
        if (!(c.ordering_ok && c.softened && c.condition))
            fail("fuzz constructed a triple that misses its own premises at trial ", t);
        res.worst_contribution = std::max(res.worst_contribution, c.contribution);
        if (c.contribution > 0) ++res.violations;
    }
    return res;
}

}  // namespace advlab
