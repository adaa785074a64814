#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "advlab/theory.hpp"
#include "advlab/train.hpp"

using namespace advlab;

namespace {

// Exact-posterior network. relu(w.x) - relu(-w.x) recovers the linear logit,
// so softmax over (0, w.x + b) reproduces the logistic posterior.
Model<double> posterior_mimic(const OracleGenerator& g, double scale = 1.0) {
    Model<double> m = make_mlp<double>(2, 2, 2, 1);
    const std::array<double, 2> diff{g.mu1[0] - g.mu0[0], g.mu1[1] - g.mu0[1]};
    const double det = g.cov[0] * g.cov[3] - g.cov[1] * g.cov[2];
    const std::array<double, 2> w{(g.cov[3] * diff[0] - g.cov[1] * diff[1]) / det,
                                  (g.cov[0] * diff[1] - g.cov[2] * diff[0]) / det};
    const std::array<double, 2> mid{0.5 * (g.mu0[0] + g.mu1[0]),
                                    0.5 * (g.mu0[1] + g.mu1[1])};
    const double bias = std::log(g.prior1 / (1.0 - g.prior1)) - w[0] * mid[0] -
                        w[1] * mid[1];
    for (size_t i = 0; i < m.param_names.size(); ++i) {
        Tensor<double>& p = m.params[i];
        if (m.param_names[i] == "fc1.w") {
            p[0] = w[0];
            p[1] = -w[0];
            p[2] = w[1];
            p[3] = -w[1];
        } else if (m.param_names[i] == "fc1.b") {
            p[0] = p[1] = 0;
        } else if (m.param_names[i] == "fc2.w") {
            p[0] = 0;
            p[1] = scale;
            p[2] = 0;
            p[3] = -scale;
        } else if (m.param_names[i] == "fc2.b") {
            p[0] = 0;
            p[1] = scale * bias;
        }
    }
    return m;
}

ProbVector<double> pv(double a, double b) {
    return ProbVector<double>::trusted({a, b});
}

}  // namespace

TEST_CASE("oracle posterior matches the closed form at landmark points") {
    OracleGenerator g = default_oracle_generator();
    const double m = 1.645 / std::sqrt(2.0);
    CHECK(g.mu1[0] == doctest::Approx(m).epsilon(1e-15));

    ProbVector<double> center = oracle_posterior(g, 0.0, 0.0);
    CHECK(center[0] == 0.5);
    CHECK(center[1] == 0.5);

    ProbVector<double> at1 = oracle_posterior(g, g.mu1[0], g.mu1[1]);
    CHECK(at1[1] == doctest::Approx(0.9955573425436802).epsilon(1e-12));
    CHECK(at1[1] > 0.99);
    ProbVector<double> at0 = oracle_posterior(g, g.mu0[0], g.mu0[1]);
    CHECK(at0[0] == doctest::Approx(0.9955573425436802).epsilon(1e-12));

    double prev = -1;
    for (int i = 0; i <= 24; ++i) {
        const double s = -3.0 + 0.25 * i;
        ProbVector<double> p = oracle_posterior(g, s, s);
        CHECK(p[1] > prev);
        prev = p[1];
    }

    OracleGenerator skew = g;
    skew.prior1 = 0.9;
    CHECK(oracle_posterior(skew, 0.0, 0.0)[1] == doctest::Approx(0.9).epsilon(1e-12));

    OracleGenerator bad = g;
    bad.cov = {1, 0.2, 0.1, 1};
    CHECK_THROWS_WITH_AS((void)oracle_posterior(bad, 0, 0),
                         doctest::Contains("symmetric"), Error);
    bad.cov = {1, 2, 2, 1};
    CHECK_THROWS_WITH_AS((void)oracle_posterior(bad, 0, 0),
                         doctest::Contains("not positive definite"), Error);
    bad = g;
    bad.prior1 = 0;
    CHECK_THROWS_WITH_AS((void)oracle_posterior(bad, 0, 0),
                         doctest::Contains("class prior"), Error);
}

TEST_CASE("bayes error hits the frozen value and tracks overlap") {
    OracleGenerator g = default_oracle_generator();
    CHECK(bayes_error(g) == doctest::Approx(0.04998490553912138).epsilon(1e-12));

    OracleGenerator wide = g;
    wide.cov = {4, 0, 0, 4};
    CHECK(bayes_error(wide) > bayes_error(g));

    OracleGenerator apart = g;
    apart.mu0 = {-3, -3};
    apart.mu1 = {3, 3};
    CHECK(bayes_error(apart) < bayes_error(g));

    OracleGenerator skew = g;
    skew.prior1 = 0.9;
    CHECK(bayes_error(skew) < 0.1);  // majority guessing already achieves 0.1

    OracleGenerator degenerate = g;
    degenerate.mu0 = degenerate.mu1;
    CHECK_THROWS_WITH_AS((void)bayes_error(degenerate),
                         doctest::Contains("no separator"), Error);
}

TEST_CASE("oracle samples carry exactly recomputable posteriors") {
    OracleGenerator g = default_oracle_generator();
    OracleDataset od = sample_oracle(g, 4000, 11);
    REQUIRE(od.x.shape == Shape{4000, 2});
    REQUIRE(od.posteriors.shape == Shape{4000, 2});
    REQUIRE(od.y.size() == 4000);

    int ones = 0, bayes_hits = 0;
    for (int i = 0; i < 4000; ++i) {
        CHECK(od.posteriors[i * 2] + od.posteriors[i * 2 + 1] ==
              doctest::Approx(1.0).epsilon(1e-14));
        ProbVector<double> re =
            oracle_posterior(g, double(od.x[i * 2]), double(od.x[i * 2 + 1]));
        CHECK(re[1] == od.posteriors[i * 2 + 1]);
        REQUIRE((od.y[size_t(i)] == 0 || od.y[size_t(i)] == 1));
        ones += od.y[size_t(i)];
        if (bayes_predict(g, double(od.x[i * 2]), double(od.x[i * 2 + 1])) ==
            od.y[size_t(i)])
            ++bayes_hits;
    }
    CHECK(ones > 4000 * 0.45);
    CHECK(ones < 4000 * 0.55);
    const double bayes_acc = double(bayes_hits) / 4000.0;
    CHECK(bayes_acc > 0.925);  // 1 - bayes_error within sampling noise
    CHECK(bayes_acc < 0.975);

    OracleDataset again = sample_oracle(g, 4000, 11);
    CHECK(again.x.content_hash() == od.x.content_hash());
    OracleDataset other = sample_oracle(g, 4000, 12);
    CHECK(other.x.content_hash() != od.x.content_hash());

    Dataset d = to_dataset(od, "oracle toy");
    CHECK(d.name == "oracle toy");
    CHECK(d.classes == 2);
    CHECK(d.size() == 4000);
    CHECK(d.fingerprint() != 0);
}

TEST_CASE("generalization loss is floored by the oracle entropy") {
    OracleGenerator g = default_oracle_generator();
    OracleDataset od = sample_oracle(g, 1500, 3);

    Model<double> mimic = posterior_mimic(g);
    // The mimic reproduces the frozen landmark, which also pins the affine
    // weight layout the construction assumes.
    Tensor<double> at1({1, 2}, {g.mu1[0], g.mu1[1]});
    Tensor<double> p = teacher_soft_batch(mimic, at1, 1.0);
    REQUIRE(p[1] == doctest::Approx(0.9955573425436802).epsilon(1e-12));

    GeneralizationLoss gl = generalization_loss(mimic, od);
    CHECK(gl.raw == doctest::Approx(gl.entropy_floor).epsilon(1e-9));
    CHECK(gl.raw > 0);
    CHECK(gl.reciprocal == doctest::Approx(1.0 / gl.raw).epsilon(1e-12));

    Model<double> hard = posterior_mimic(g, 400.0);  // near one-hot at the Bayes class
    GeneralizationLoss glh = generalization_loss(hard, od);
    CHECK(std::isfinite(glh.raw));
    CHECK(glh.raw > gl.entropy_floor + 0.01);
    CHECK(glh.reciprocal < gl.reciprocal);
}

TEST_CASE("delta generalization: frozen value, zero, antisymmetry") {
    Tensor<double> yp({1, 2}, {0.996, 0.004});
    Tensor<double> p1({1, 2}, {0.999, 0.001});
    Tensor<double> p2({1, 2}, {0.99, 0.01});
    const double d = delta_generalization(yp, p1, p2);
    CHECK(d == doctest::Approx(-0.00019670419413792863).epsilon(1e-12));
    CHECK(d < 0);
    CHECK(delta_generalization(yp, p2, p1) == -d);

    Rng rng = Rng::stream(4, 0x7468);
    Tensor<double> ypr({20, 3}), a({20, 3}), b({20, 3});
    for (int i = 0; i < 20; ++i) {
        auto fill = [&](Tensor<double>& t) {
            ProbVector<double> v = softmax_temperature<double>(
                {rng.normal(), rng.normal(), rng.normal()}, 1.0);
            for (int j = 0; j < 3; ++j) t[i * 3 + j] = v[size_t(j)];
        };
        fill(ypr);
        fill(a);
        fill(b);
    }
    CHECK(delta_generalization(ypr, a, a) == 0.0);
    CHECK(delta_generalization(ypr, a, b) == -delta_generalization(ypr, b, a));

    Tensor<double> mis({2, 2});
    CHECK_THROWS_WITH_AS((void)delta_generalization(yp, p1, mis),
                         doctest::Contains("aligned rows"), Error);
}

TEST_CASE("theorem check reproduces the first worked example") {
    TheoremCheck c = theorem1_check(pv(0.996, 0.004), pv(0.999, 0.001), pv(0.99, 0.01));
    CHECK(c.rhs == doctest::Approx(254.43391627684832).epsilon(1e-12));
    CHECK(c.rhs == doctest::Approx(254.0).epsilon(0.02));
    CHECK(c.threshold == doctest::Approx(0.003914906894807832).epsilon(1e-12));
    CHECK(c.threshold == doctest::Approx(0.004).epsilon(0.03));
    CHECK(c.ordering_ok);
    CHECK(c.softened);
    CHECK(!c.vacuous);
    CHECK(c.condition);
    CHECK(c.contribution == doctest::Approx(-0.00019670419413792863).epsilon(1e-12));
    CHECK(c.contribution < 0);

    // Just below the threshold the guarantee is gone and the sign flips.
    TheoremCheck below =
        theorem1_check(pv(0.9965, 0.0035), pv(0.999, 0.001), pv(0.99, 0.01));
    CHECK(!below.condition);
    CHECK(below.contribution > 0);
}

TEST_CASE("theorem check reproduces the second worked example") {
    TheoremCheck c = theorem1_check(pv(0.7, 0.3), pv(0.80, 0.20), pv(0.75, 0.25));
    CHECK(c.rhs == doctest::Approx(3.4575250157739745).epsilon(1e-12));
    CHECK(c.threshold == doctest::Approx(0.22433973930853346).epsilon(1e-12));
    CHECK(c.threshold == doctest::Approx(0.224).epsilon(0.01));
    CHECK(c.condition);  // 0.7/0.3 is under the directly evaluated rhs
    CHECK(c.contribution < 0);

    TheoremCheck tight = theorem1_check(pv(0.8, 0.2), pv(0.80, 0.20), pv(0.75, 0.25));
    CHECK(!tight.condition);  // 4 > 3.46: an oracle this confident breaks it
    CHECK(tight.contribution > 0);
}

TEST_CASE("theorem check flags degeneracies and premise violations") {
    TheoremCheck onehot = theorem1_check(pv(1, 0), pv(0.999, 0.001), pv(0.99, 0.01));
    CHECK(onehot.vacuous);
    CHECK(!onehot.condition);
    CHECK(onehot.contribution > 0);  // one-hot oracles lose generality when softened

    TheoremCheck same = theorem1_check(pv(0.9, 0.1), pv(0.8, 0.2), pv(0.8, 0.2));
    CHECK(same.rhs == 0.0);
    CHECK(same.threshold == 1.0);
    CHECK(same.contribution == 0.0);
    CHECK(!same.condition);

    TheoremCheck flipped = theorem1_check(pv(0.9, 0.1), pv(0.4, 0.6), pv(0.45, 0.55));
    CHECK(!flipped.ordering_ok);

    // Sharpening instead of softening: the abs-ratio condition can hold while
    // the contribution is positive, which is exactly why the flag exists.
    TheoremCheck sharper = theorem1_check(pv(0.5, 0.5), pv(0.9, 0.1), pv(0.95, 0.05));
    CHECK(!sharper.softened);
    CHECK(sharper.condition);
    CHECK(sharper.contribution > 0);

    CHECK_THROWS_WITH_AS(
        (void)theorem1_check(ProbVector<double>::trusted({0.5, 0.3, 0.2}),
                             pv(0.9, 0.1), pv(0.8, 0.2)),
        doctest::Contains("two-class"), Error);
}

TEST_CASE("fuzz over premise-satisfying triples finds no sign violations") {
    TheoremFuzzResult res = theorem1_fuzz(100000, 2026);
    CHECK(res.trials == 100000);
    CHECK(res.violations == 0);
    CHECK(res.worst_contribution <= 0.0);

    TheoremFuzzResult again = theorem1_fuzz(100000, 2026);
    CHECK(again.worst_contribution == res.worst_contribution);
    TheoremFuzzResult other = theorem1_fuzz(1000, 7);
    CHECK(other.violations == 0);
}

TEST_CASE("multiclass inputs reduce to the favorite and strongest rival") {
    ProbVector<double> yp = ProbVector<double>::trusted({0.1, 0.6, 0.3});
    ProbVector<double> p1 = ProbVector<double>::trusted({0.7, 0.2, 0.1});
    ProbVector<double> p2 = ProbVector<double>::trusted({0.6, 0.25, 0.15});
    TheoremCheck wide = theorem1_check_multiclass(yp, p1, p2);

    TheoremCheck direct = theorem1_check(pv(0.1 / 0.7, 0.6 / 0.7),
                                         pv(0.7 / 0.9, 0.2 / 0.9),
                                         pv(0.6 / 0.85, 0.25 / 0.85));
    CHECK(wide.rhs == doctest::Approx(direct.rhs).epsilon(1e-12));
    CHECK(wide.contribution == doctest::Approx(direct.contribution).epsilon(1e-12));
    CHECK(wide.condition == direct.condition);

    TheoremCheck two =
        theorem1_check_multiclass(pv(0.7, 0.3), pv(0.80, 0.20), pv(0.75, 0.25));
    CHECK(two.rhs == doctest::Approx(3.4575250157739745).epsilon(1e-12));

    ProbVector<double> dead = ProbVector<double>::trusted({0.0, 0.0, 1.0});
    CHECK_THROWS_WITH_AS((void)theorem1_check_multiclass(dead, p1, p2),
                         doctest::Contains("no mass"), Error);
}

TEST_CASE("oracle pieces plug into the trainer") {
    OracleGenerator g = default_oracle_generator();
    OracleDataset od_train = sample_oracle(g, 300, 5);
    OracleDataset od_eval = sample_oracle(g, 1500, 6);
    Dataset tr = to_dataset(od_train, "oracle train");
    Dataset val = to_dataset(od_eval, "oracle eval");

    TrainConfig cfg;
    cfg.kind = LossKind::Natural;
    cfg.epochs = 10;
    cfg.batch = 50;
    cfg.eval_attack.eps = 0;
    cfg.pad = 0;
    cfg.seed = 17;
    Model<float> hard = make_mlp<float>(2, 8, 2, 21);
    hard = train(cfg, tr, val, hard).best;
    GeneralizationLoss gl_hard = generalization_loss(hard, od_eval);

    Tensor<float> soft({300, 2});
    for (int64_t i = 0; i < 600; ++i) soft[i] = float(od_train.posteriors[i]);
    TrainConfig scfg = cfg;
    scfg.kind = LossKind::LTD;
    scfg.lambda = 0;
    scfg.attack.eps = 0;
    Model<float> softm = make_mlp<float>(2, 8, 2, 21);
    TeacherRef<float> ref;
    ref.soft = &soft;
    softm = train(scfg, tr, val, softm, ref).best;
    GeneralizationLoss gl_soft = generalization_loss(softm, od_eval);

    for (const GeneralizationLoss& gl : {gl_hard, gl_soft}) {
        CHECK(std::isfinite(gl.raw));
        CHECK(gl.raw >= gl.entropy_floor - 1e-9);  // no model beats the oracle
        CHECK(gl.reciprocal > 0);
    }
}
