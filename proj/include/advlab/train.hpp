#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "advlab/attacks.hpp"
#include "advlab/checkpoint.hpp"
#include "advlab/datasets.hpp"
#include "advlab/losses.hpp"

namespace advlab {

struct SgdConfig {
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;  // classical L2-in-gradient
    bool nesterov = true;
    std::vector<int> drops = {20, 25};  // epochs after which lr is divided
    double drop_factor = 10.0;
};

// Piecewise-constant schedule: one division per passed drop epoch.
inline double lr_at(const SgdConfig& cfg, int epoch) {
    double lr = cfg.lr;
    for (int d : cfg.drops)
        if (epoch >= d) lr /= cfg.drop_factor;
    return lr;
}

template <class S>
struct SgdState {
    std::vector<Tensor<S>> velocity;
};

template <class S>
void sgd_step(Model<S>& m, const std::vector<Tensor<S>>& grads, SgdState<S>& st,
              const SgdConfig& cfg, int epoch) {
    ADVLAB_CHECK(grads.size() == m.params.size(), "sgd_step got ", grads.size(),
                 " gradients for ", m.params.size(), " parameters");
    if (st.velocity.empty())
        for (const auto& p : m.params) st.velocity.push_back(Tensor<S>::zeros(p.shape));
    const double lr = lr_at(cfg, epoch);
    for (size_t pi = 0; pi < m.params.size(); ++pi) {
        Tensor<S>& w = m.params[pi];
        const Tensor<S>& g = grads[pi];
        Tensor<S>& v = st.velocity[pi];
        ADVLAB_CHECK(g.shape == w.shape, "gradient shape mismatch for ",
                     m.param_names[pi]);
        for (int64_t i = 0; i < w.size(); ++i) {
            const double gi = double(g[i]);
            if (!std::isfinite(gi))
                throw Error("non-finite gradient " + std::to_string(gi) + " in " +
                            m.param_names[pi] + " at flat index " + std::to_string(i));
            const double gp = gi + cfg.weight_decay * double(w[i]);
            const double vn = cfg.momentum * double(v[i]) + gp;
            v[i] = S(vn);
            const double step = cfg.nesterov ? gp + cfg.momentum * vn : vn;
            w[i] = S(double(w[i]) - lr * step);
        }
    }
}

struct TrainConfig {
    LossKind kind = LossKind::Natural;
    int epochs = 30;
    int batch = 128;
    SgdConfig sgd;
    OrderingPolicy policy = OrderingPolicy::AdvFirst;
    AttackConfig attack;       // inner maximization during training
    AttackConfig eval_attack;  // validation probe; eps <= 0 reuses clean accuracy
    double lambda = 6.0;       // trades / ltd balance
    double tau = 2.0;          // distillation temperature
    double kd_lambda = -1;     // kd balance; negative asks for the tau^2 default
    double kd_sce_temp = 1.0;  // temperature of kd's hard-label term
    bool ltd_attack_kl = false;  // search x' by maximizing the KL term instead of CE on y
    bool reverse_kl = false;
    int pad = 4;
    bool hflip = false;
    uint64_t seed = 0;
    std::string checkpoint_dir;  // empty: keep checkpoints off disk
    std::string metrics_path;    // empty: no JSONL stream
};

struct TrainRecord {
    int epoch = 0;  // 1-based
    double lr = 0;
    double train_total = 0, train_sce = 0, train_delta = 0;  // epoch means
    double nat_acc = 0, pgd_acc = 0;                         // validation, percent
    double seconds = 0;
};

template <class S>
struct TrainResult {
    std::vector<TrainRecord> records;
    int best_epoch = 0;  // 1-based; chosen by (pgd_acc, nat_acc)
    Model<S> best;
};

// Teacher hookup for KD and LTD. `soft` holds one row of class probabilities
// per training example; when it is absent LTD tempers `model` on each
// augmented batch instead.
template <class S>
struct TeacherRef {
    const Model<S>* model = nullptr;
    const Tensor<S>* soft = nullptr;
};

namespace detail {

template <class T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<int64_t>& order,
                      int64_t i0, int64_t b) {
    const int64_t stride = numel(x.shape) / x.dim(0);
    Shape s = x.shape;
    s[0] = int(b);
    Tensor<T> out(s);
    for (int64_t i = 0; i < b; ++i) {
        const T* src = x.data() + order[size_t(i0 + i)] * stride;
        std::copy(src, src + stride, out.data() + i * stride);
    }
    return out;
}

template <class S>
Tensor<S> cast_tensor(const Tensor<float>& x) {
    Tensor<S> out(x.shape);
    for (int64_t i = 0; i < x.size(); ++i) out[i] = S(x[i]);
    return out;
}

inline std::string epoch_filename(int epoch) {
    std::ostringstream oss;
    oss << "epoch_";
    oss.width(3);
    oss.fill('0');
    oss << epoch << ".alb";
    return oss.str();
}

}  // namespace detail

// Robust accuracy in percent: rerun classification on the attacked points.
template <class S>
double robust_accuracy(const Model<S>& m, const Tensor<S>& x, const std::vector<int>& y,
                       const AttackConfig& cfg) {
    AttackResult<S> res = pgd(m, x, y, cfg);
    return 100.0 * accuracy(m, res.x_adv, y);
}

// One full training run. The model is updated in place; attacks inside the
// loop read it by const reference, which in this single-threaded loop is the
// frozen-weights snapshot the attack contract asks for.
template <class S>
TrainResult<S> train(const TrainConfig& cfg, const Dataset& tr, const Dataset& val,
                     Model<S>& m, const TeacherRef<S>& teacher = {}) {
    ADVLAB_CHECK(cfg.epochs >= 1, "epochs must be at least 1, got ", cfg.epochs);
    ADVLAB_CHECK(cfg.batch >= 1, "batch size must be at least 1, got ", cfg.batch);
    ADVLAB_CHECK(cfg.sgd.lr > 0, "learning rate must be positive, got ", cfg.sgd.lr);
    ADVLAB_CHECK(cfg.tau > 0, "temperature must be positive, got ", cfg.tau);
    ADVLAB_CHECK(cfg.lambda >= 0, "lambda must be non-negative, got ", cfg.lambda);
    ADVLAB_CHECK(tr.size() > 0, "empty training set");
    ADVLAB_CHECK(val.size() > 0, "empty validation set");
    if (cfg.kind == LossKind::KD)
        ADVLAB_CHECK(teacher.model != nullptr, "kd training needs a teacher model");
    if (cfg.kind == LossKind::LTD) {
        ADVLAB_CHECK(teacher.soft != nullptr || teacher.model != nullptr,
                     "ltd training needs soft labels or a teacher to temper");
        if (teacher.soft != nullptr)
            ADVLAB_CHECK(teacher.soft->dim(0) == int(tr.size()), "soft labels cover ",
                         teacher.soft->dim(0), " examples but the training set has ",
                         tr.size());
    }
    if (!cfg.checkpoint_dir.empty())
        std::filesystem::create_directories(cfg.checkpoint_dir);

    const int64_t n = tr.size();
    const Tensor<S> vx = detail::cast_tensor<S>(val.x);
    TrainResult<S> result;
    SgdState<S> opt;
    double best_pgd = -1, best_nat = -1;

    std::vector<int64_t> order(static_cast<size_t>(n));
    for (int64_t e = 0; e < cfg.epochs; ++e) {
        const auto t0 = std::chrono::steady_clock::now();
        for (size_t i = 0; i < order.size(); ++i) order[i] = int64_t(i);
        Rng shuffle = Rng::stream(cfg.seed, 0x736866, uint64_t(e));
        for (int64_t i = n - 1; i > 0; --i)
            std::swap(order[size_t(i)], order[size_t(shuffle.uniform_int(int(i + 1)))]);
        Rng aug = Rng::stream(cfg.seed, 0x617567, uint64_t(e));
        Rng atk_seeds = Rng::stream(cfg.seed, 0x61746b, uint64_t(e));

        double sum_total = 0, sum_sce = 0, sum_delta = 0;
        int64_t step = 0;
        try {
            for (int64_t i0 = 0; i0 < n; i0 += cfg.batch, ++step) {
                const int64_t b = std::min<int64_t>(cfg.batch, n - i0);
                Tensor<float> xb = detail::gather_rows(tr.x, order, i0, b);
                std::vector<int> yb(static_cast<size_t>(b));
                for (int64_t i = 0; i < b; ++i)
                    yb[size_t(i)] = tr.y[size_t(order[size_t(i0 + i)])];
                xb = augment_batch(xb, aug, cfg.pad, cfg.hflip);
                const Tensor<S> xs = detail::cast_tensor<S>(xb);

                AttackConfig acfg = cfg.attack;
                acfg.seed = atk_seeds.next();

                LossResult<S> r;
                switch (cfg.kind) {
                    case LossKind::Natural:
                        r = natural_loss(m, xs, yb);
                        break;
                    case LossKind::Madry:
                        r = madry_loss(m, xs, yb, acfg);
                        break;
                    case LossKind::Trades:
                        r = trades_loss(m, xs, yb, cfg.lambda, acfg, cfg.policy,
                                        AttackLoss::KlToNatural, cfg.reverse_kl);
                        break;
                    case LossKind::KD:
                        r = kd_loss(m, *teacher.model, xs, yb, cfg.tau, cfg.kd_lambda,
                                    cfg.kd_sce_temp);
                        break;
                    case LossKind::LTD: {
                        Tensor<S> soft =
                            teacher.soft != nullptr
                                ? detail::gather_rows(*teacher.soft, order, i0, b)
                                : teacher_soft_batch(*teacher.model, xs, cfg.tau);
                        r = ltd_loss(m, soft, xs, yb, cfg.lambda, acfg, cfg.policy,
                                     cfg.ltd_attack_kl ? AttackLoss::KlToNatural
                                                       : AttackLoss::CrossEntropy,
                                     cfg.reverse_kl);
                        break;
                    }
                }
                sum_total += r.breakdown.total * double(b);
                sum_sce += r.breakdown.sce * double(b);
                sum_delta += r.breakdown.delta * double(b);
                sgd_step(m, r.grads, opt, cfg.sgd, int(e));
            }
        } catch (const Error& err) {
            throw Error("epoch " + std::to_string(e + 1) + " aborted at step " +
                        std::to_string(step + 1) + ": " + err.what());
        }

        TrainRecord rec;
        rec.epoch = int(e) + 1;
        rec.lr = lr_at(cfg.sgd, int(e));
        rec.train_total = sum_total / double(n);
        rec.train_sce = sum_sce / double(n);
        rec.train_delta = sum_delta / double(n);
        rec.nat_acc = 100.0 * accuracy(m, vx, val.y);
        if (cfg.eval_attack.eps > 0) {
            AttackConfig ecfg = cfg.eval_attack;
            ecfg.seed = Rng::stream(cfg.seed, 0x65766c, uint64_t(e)).next();
            rec.pgd_acc = robust_accuracy(m, vx, val.y, ecfg);
        } else {
            rec.pgd_acc = rec.nat_acc;
        }
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        result.records.push_back(rec);

        if (!cfg.checkpoint_dir.empty()) {
            nlohmann::json meta = {{"epoch", rec.epoch},
                                   {"nat_acc", rec.nat_acc},
                                   {"pgd_acc", rec.pgd_acc},
                                   {"loss", rec.train_total}};
            save_model(cfg.checkpoint_dir + "/" + detail::epoch_filename(rec.epoch), m,
                       meta.dump());
        }
        if (rec.pgd_acc > best_pgd ||
            (rec.pgd_acc == best_pgd && rec.nat_acc > best_nat)) {
            best_pgd = rec.pgd_acc;
            best_nat = rec.nat_acc;
            result.best_epoch = rec.epoch;
            result.best = m;
        }
        if (!cfg.metrics_path.empty()) {
            nlohmann::json line = {
                {"epoch", rec.epoch},         {"lr", rec.lr},
                {"loss", rec.train_total},    {"sce", rec.train_sce},
                {"delta", rec.train_delta},   {"nat_acc", rec.nat_acc},
                {"pgd_acc", rec.pgd_acc},     {"seconds", rec.seconds},
            };
            std::ofstream out(cfg.metrics_path, std::ios::app);
            ADVLAB_CHECK(out.good(), "cannot append to ", cfg.metrics_path);
            out << line.dump() << "\n";
        }
    }

    if (!cfg.checkpoint_dir.empty()) {
        nlohmann::json meta = {{"epoch", result.best_epoch},
                               {"selected_by", "validation pgd accuracy"}};
        save_model(cfg.checkpoint_dir + "/best.alb", result.best, meta.dump());
    }
    return result;
}

}  // namespace advlab
