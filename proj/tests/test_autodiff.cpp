#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "advlab/autodiff.hpp"
#include "test_util.hpp"

using namespace advlab;

namespace {

// FNV over a double vector, for bitwise-identity checks.
uint64_t hash_vec(const std::vector<double>& v) {
    return fnv1a64(v.data(), v.size() * sizeof(double));
}

}  // namespace

TEST_CASE("forward values of basic primitives") {
    Graph<double> g;
    int x = g.leaf(Tensor<double>({2, 2}, {1.0, -2.0, 3.0, 0.0}), false);
    int r = g.relu(x);
    CHECK(g.val(r) == std::vector<double>{1.0, 0.0, 3.0, 0.0});

    int w = g.leaf(Tensor<double>({2, 1}, {2.0, -1.0}), false);
    int y = g.matmul(x, w);
    CHECK(g.val(y)[0] == doctest::Approx(4.0));   // 1*2 + (-2)(-1)
    CHECK(g.val(y)[1] == doctest::Approx(6.0));   // 3*2 + 0

    int s = g.sum(y);
    CHECK(g.val(s)[0] == doctest::Approx(10.0));
    int m = g.mean(y);
    CHECK(g.val(m)[0] == doctest::Approx(5.0));
}

TEST_CASE("gap averages spatial positions") {
    Graph<double> g;
    int x = g.leaf(Tensor<double>({1, 2, 1, 2}, {1.0, 3.0, 10.0, 20.0}), false);
    int p = g.gap(x);
    CHECK(g.shape(p) == Shape{1, 2});
    CHECK(g.val(p)[0] == doctest::Approx(2.0));
    CHECK(g.val(p)[1] == doctest::Approx(15.0));
}

TEST_CASE("log_softmax_t rows are normalized and match the plain kernel") {
    Graph<double> g;
    int q = g.leaf(Tensor<double>({1, 3}, {3.0, 1.0, 0.0}), false);
    int ls = g.log_softmax_t(q, 1.0);
    double sum = 0;
    for (double v : g.val(ls)) sum += std::exp(v);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    auto p = softmax_temperature<double>({3.0, 1.0, 0.0}, 1.0);
    for (int i = 0; i < 3; ++i)
        CHECK(std::exp(g.val(ls)[size_t(i)]) == doctest::Approx(p[size_t(i)]).epsilon(1e-12));
}

TEST_CASE("shape mismatches are rejected") {
    Graph<double> g;
    int a = g.leaf(Tensor<double>({2, 2}), false);
    int b = g.leaf(Tensor<double>({2, 3}), false);
    CHECK_THROWS_AS(g.add(a, b), Error);
    CHECK_THROWS_AS(g.matmul(b, b), Error);
    CHECK_THROWS_AS(g.gap(a), Error);
    CHECK_THROWS_AS(g.backward(g.sum(g.mul(a, a)) + 999), Error);
}

TEST_CASE("backward demands a finite scalar") {
    Graph<double> g;
    int a = g.leaf(Tensor<double>({2}, {1.0, 2.0}), true);
    CHECK_THROWS_WITH_AS(g.backward(a), doctest::Contains("scalar"), Error);
    int bad = g.log_floor(g.leaf(Tensor<double>({1}, {-1.0}), true), 1e-12);
    // log of clamped negative input is finite; force a nan through 0*inf instead
    (void)bad;
    int inf_leaf = g.leaf(Tensor<double>({1}, {std::numeric_limits<double>::infinity()}), true);
    int zero = g.leaf(Tensor<double>({1}, {0.0}), true);
    int nan_node = g.mul(inf_leaf, zero);
    CHECK_THROWS_WITH_AS(g.backward(nan_node), doctest::Contains("non-finite"), Error);
}

TEST_CASE("per-primitive gradients match central differences") {
    Rng pr(100);
    const double tol = 1e-6;

    SUBCASE("affine chain with relu") {
        std::vector<Tensor<double>> params = {
            Tensor<double>::randn({3, 4}, pr),
            Tensor<double>::randn({4, 5}, pr, 0.6),
            Tensor<double>::randn({5}, pr, 0.4),
        };
        auto rep = grad_check(params, [](Graph<double>& g, const std::vector<int>& ids) {
            return g.mean(g.relu(g.add_row(g.matmul(ids[0], ids[1]), ids[2])));
        });
        CHECK(rep.max_abs_diff <= tol);
    }

    SUBCASE("conv stride 1 and 2") {
        for (int stride = 1; stride <= 2; ++stride) {
            std::vector<Tensor<double>> params = {
                Tensor<double>::randn({2, 2, 5, 5}, pr),
                Tensor<double>::randn({3, 18}, pr, 0.4),
            };
            auto rep = grad_check(params, [stride](Graph<double>& g, const std::vector<int>& ids) {
                return g.mean(g.conv2d(ids[0], ids[1], stride));
            });
            CHECK(rep.max_abs_diff <= tol);
        }
    }

    SUBCASE("conv gradient is nontrivial") {
        std::vector<Tensor<double>> params = {
            Tensor<double>::randn({1, 1, 4, 4}, pr),
            Tensor<double>::randn({2, 9}, pr, 0.5),
        };
        Graph<double> g;
        int x = g.leaf(params[0], true);
        int w = g.leaf(params[1], true);
        int loss = g.mean(g.mul(g.conv2d(x, w, 1), g.conv2d(x, w, 1)));
        g.backward(loss);
        double nx = 0, nw = 0;
        for (double v : g.grad(x)) nx += std::abs(v);
        for (double v : g.grad(w)) nw += std::abs(v);
        CHECK(nx > 1e-6);
        CHECK(nw > 1e-6);
    }

    SUBCASE("bn_train through batch statistics") {
        std::vector<Tensor<double>> params = {
            Tensor<double>::randn({3, 2, 4, 4}, pr),
            Tensor<double>({2}, {1.1, 0.9}),
            Tensor<double>({2}, {0.1, -0.2}),
        };
        auto rep = grad_check(params, [](Graph<double>& g, const std::vector<int>& ids) {
            int h = g.bn_train(ids[0], ids[1], ids[2], 1e-5);
            return g.mean(g.mul(h, h));
        });
        CHECK(rep.max_abs_diff <= tol);
    }

    SUBCASE("bn_eval with fixed statistics") {
        Tensor<double> mean({2}, {0.3, -0.1});
        Tensor<double> var({2}, {0.8, 1.3});
        std::vector<Tensor<double>> params = {
            Tensor<double>::randn({2, 2, 3, 3}, pr),
            Tensor<double>({2}, {1.2, 0.8}),
            Tensor<double>({2}, {0.05, -0.3}),
        };
        auto rep = grad_check(params, [=](Graph<double>& g, const std::vector<int>& ids) {
            int h = g.bn_eval(ids[0], ids[1], ids[2], mean, var, 1e-5);
            return g.mean(g.mul(h, h));
        });
        CHECK(rep.max_abs_diff <= tol);
    }

    SUBCASE("tempered log softmax with soft targets") {
        std::vector<Tensor<double>> params = {Tensor<double>::randn({4, 6}, pr, 2.0)};
        Tensor<double> y({4, 6});
        Rng yr(7);
        for (int r = 0; r < 4; ++r) {
            auto p = testing::random_simplex(yr, 6);
            for (int i = 0; i < 6; ++i) y[int64_t(r) * 6 + i] = p[size_t(i)];
        }
        for (double temp : {0.7, 1.0, 3.5}) {
            auto rep = grad_check(params, [&, temp](Graph<double>& g, const std::vector<int>& ids) {
                int ls = g.log_softmax_t(ids[0], temp);
                return g.scale(g.sum(g.mul(ls, g.constant(y))), -0.25);
            });
            CHECK(rep.max_abs_diff <= tol);
        }
    }

    SUBCASE("exp, log_floor, mul, sub") {
        std::vector<Tensor<double>> params = {
            Tensor<double>::randn({3, 3}, pr, 0.5),
            Tensor<double>::randn({3, 3}, pr, 0.5),
        };
        auto rep = grad_check(params, [](Graph<double>& g, const std::vector<int>& ids) {
            int e = g.exp(ids[0]);
            int prod = g.mul(e, g.sub(ids[0], ids[1]));
            int sq = g.add(g.mul(prod, prod), g.constant(Tensor<double>::full({3, 3}, 0.2)));
            return g.mean(g.log_floor(sq, 1e-12));
        });
        CHECK(rep.max_abs_diff <= tol);
    }
}

TEST_CASE("log_floor gradient is zero in the clamped region") {
    Graph<double> g;
    int x = g.leaf(Tensor<double>({2}, {0.5, 1e-15}), true);
    int loss = g.sum(g.log_floor(x, 1e-12));
    g.backward(loss);
    CHECK(g.grad(x)[0] == doctest::Approx(2.0));
    CHECK(g.grad(x)[1] == 0.0);
}

TEST_CASE("backward is bitwise deterministic") {
    auto run = [](uint64_t seed) {
        auto comp = testing::make_random_composition(seed);
        Graph<double> g;
        std::vector<int> ids;
        for (const auto& p : comp.params) ids.push_back(g.leaf(p, true));
        int loss = comp.build(g, ids);
        g.backward(loss);
        uint64_t h = 0;
        for (int id : ids) h ^= hash_vec(g.grad(id));
        return h;
    };
    for (uint64_t seed : {1ull, 2ull, 3ull}) CHECK(run(seed) == run(seed));
}

TEST_CASE("constant-only graphs backward to nothing") {
    Graph<double> g;
    int x = g.constant(Tensor<double>({2}, {1.0, 2.0}));
    int loss = g.sum(g.mul(x, x));
    g.backward(loss);  // no-op, nothing requires grad
    CHECK(g.val(loss)[0] == doctest::Approx(5.0));
}

TEST_CASE("random compositions pass finite-difference verification") {
    // Smaller cousin of the acceptance criterion: 12 random graphs here.
    uint64_t seed = 2024;
    for (int i = 0; i < 12; ++i) {
        auto comp = testing::make_checkable_composition(seed);
        auto rep = grad_check(comp.params, comp.build);
        INFO("seed ", seed, " param ", rep.param, " index ", rep.index, " analytic ",
             rep.analytic, " numeric ", rep.numeric);
        CHECK(rep.max_abs_diff <= 1e-4);
        seed = Rng::mix(seed + 17);
    }
}

TEST_CASE("tempered log softmax equals unit-temperature on scaled logits") {
    Graph<double> g;
    Rng pr(55);
    Tensor<double> q = Tensor<double>::randn({3, 5}, pr, 3.0);
    int a = g.log_softmax_t(g.leaf(q, false), 4.0);
    Tensor<double> qs = q;
    for (auto& v : qs.v) v /= 4.0;
    int b = g.log_softmax_t(g.leaf(qs, false), 1.0);
    for (size_t i = 0; i < g.val(a).size(); ++i)
        CHECK(std::abs(g.val(a)[i] - g.val(b)[i]) <= 1e-12);
}
