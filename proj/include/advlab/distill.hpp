#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "advlab/train.hpp"

namespace advlab {

enum class LabelMode { Precomputed, OnFly };

inline std::string to_string(LabelMode m) {
    return m == LabelMode::Precomputed ? "precomputed" : "on-fly";
}

inline LabelMode parse_label_mode(const std::string& s) {
    if (s == "precomputed") return LabelMode::Precomputed;
    if (s == "on-fly") return LabelMode::OnFly;
    fail("unknown label mode '", s, "' (want precomputed or on-fly)");
}

// Tempered teacher outputs for a whole dataset, plus the provenance needed
// to refuse them when the teacher or the data changes underneath.
struct SoftLabelSet {
    Tensor<float> probs;  // one row per example
    double tau = 1.0;
    uint64_t teacher_hash = 0;
    uint64_t dataset_fingerprint = 0;
    LabelMode mode = LabelMode::Precomputed;
};

void save_soft_labels(const std::string& path, const SoftLabelSet& s);
SoftLabelSet load_soft_labels(const std::string& path);

inline void require_soft_label_match(const SoftLabelSet& s, uint64_t teacher_hash,
                                     uint64_t dataset_fp) {
    ADVLAB_CHECK(s.teacher_hash == teacher_hash,
                 "soft labels were generated by teacher ", hex64(s.teacher_hash),
                 " but the current teacher hashes to ", hex64(teacher_hash));
    ADVLAB_CHECK(s.dataset_fingerprint == dataset_fp, "soft labels cover dataset ",
                 hex64(s.dataset_fingerprint), " but the current data hashes to ",
                 hex64(dataset_fp));
}

// Tempered probabilities for one batch, teacher in eval mode.
template <class S>
Tensor<S> soft_labels(const Model<S>& teacher, const Tensor<S>& x, double tau) {
    ADVLAB_CHECK(tau > 0, "temperature must be positive, got ", tau);
    return teacher_soft_batch(teacher, x, tau);
}

// Precomputed labels over canonical (un-augmented) images.
inline SoftLabelSet make_soft_label_set(const Model<float>& teacher, const Dataset& d,
                                        double tau, int batch = 256) {
    ADVLAB_CHECK(tau > 0, "temperature must be positive, got ", tau);
    ADVLAB_CHECK(d.size() > 0, "cannot label an empty dataset");
    SoftLabelSet out;
    out.tau = tau;
    out.teacher_hash = teacher.content_hash();
    out.dataset_fingerprint = d.fingerprint();
    out.mode = LabelMode::Precomputed;
    const int64_t n = d.size();
    const int64_t stride = numel(d.x.shape) / n;
    int k = -1;
    std::vector<float> rows;
    for (int64_t i0 = 0; i0 < n; i0 += batch) {
        const int64_t b = std::min<int64_t>(batch, n - i0);
        Shape s = d.x.shape;
        s[0] = int(b);
        Tensor<float> xb(s);
        std::copy(d.x.data() + i0 * stride, d.x.data() + (i0 + b) * stride, xb.data());
        Tensor<float> p = teacher_soft_batch(teacher, xb, tau);
        k = p.dim(1);
        rows.insert(rows.end(), p.data(), p.data() + p.size());
    }
    out.probs = Tensor<float>({int(n), k});
    std::copy(rows.begin(), rows.end(), out.probs.data());
    return out;
}

// Plain SCE training of the teacher; checkpoints are ranked by clean
// accuracy since robustness is not the point here.
template <class S>
TrainResult<S> train_teacher(TrainConfig cfg, const Dataset& tr, const Dataset& val,
                             Model<S>& m) {
    cfg.kind = LossKind::Natural;
    cfg.eval_attack.eps = 0;
    return train(cfg, tr, val, m);
}

struct TemperatureRecord {
    double tau = 0;
    double step1_nat = -1;  // natural-only run, percent; -1 when not run
    bool feasible = false;
    double step2_nat = -1;  // full run at this temperature
    double step2_pgd = -1;
};

struct TemperatureSearchResult {
    double tau_max = 0;
    double tau_best = 0;
    double threshold = 0;  // absolute percent the step-1 runs had to clear
    double teacher_nat = 0;
    std::vector<double> grid;
    std::vector<TemperatureRecord> records;
};

struct TempSearchConfig {
    TrainConfig base;  // budget shared by both steps
    std::vector<double> grid = {1, 2, 3, 5, 8, 10, 12, 15, 20};
    double nat_threshold_frac = 0.9;  // of teacher natural accuracy
    LabelMode mode = LabelMode::OnFly;
};

// Two-step temperature selection. Step 1 trains on natural data only
// (lambda 0, no attack) at each grid temperature and keeps those whose
// natural accuracy stays above the threshold; tau_max is the largest kept.
// Step 2 reruns the kept temperatures with the full objective and picks the
// best validation robustness.
inline TemperatureSearchResult select_temperature(const TempSearchConfig& cfg,
                                                  const Model<float>& teacher,
                                                  const Dataset& tr,
                                                  const Dataset& val) {
    ADVLAB_CHECK(!cfg.grid.empty(), "temperature grid is empty");
    std::vector<double> grid = cfg.grid;
    std::sort(grid.begin(), grid.end());
    ADVLAB_CHECK(grid.front() >= 1, "temperature grid must start at 1 or above, got ",
                 grid.front());

    TemperatureSearchResult res;
    res.grid = grid;
    res.teacher_nat = 100.0 * accuracy(teacher, val.x, val.y);
    res.threshold = cfg.nat_threshold_frac * res.teacher_nat;

    SoftLabelSet precomputed;  // reused per temperature when precomputed
    auto run_at = [&](double tau, bool full, uint64_t salt) {
        TrainConfig rc = cfg.base;
        rc.kind = LossKind::LTD;
        rc.tau = tau;
        if (!full) {
            rc.lambda = 0;
            rc.attack.eps = 0;
            rc.eval_attack.eps = 0;
        }
        Rng seeds = Rng::stream(cfg.base.seed, 0x746d70, salt);
        rc.seed = seeds.next();
        Model<float> student = model_from_arch<float>(teacher.arch, seeds.next());
        TeacherRef<float> ref;
        if (cfg.mode == LabelMode::Precomputed) {
            precomputed = make_soft_label_set(teacher, tr, tau);
            ref.soft = &precomputed.probs;
        } else {
            ref.model = &teacher;
        }
        TrainResult<float> r = train(rc, tr, val, student, ref);
        return r.records[size_t(r.best_epoch - 1)];
    };

    for (size_t gi = 0; gi < grid.size(); ++gi) {
        TemperatureRecord rec;
        rec.tau = grid[gi];
        TrainRecord best = run_at(grid[gi], false, gi);
        rec.step1_nat = best.nat_acc;
        rec.feasible = rec.step1_nat >= res.threshold;
        if (rec.feasible) res.tau_max = grid[gi];
        res.records.push_back(rec);
    }
    if (res.tau_max < 1)
        throw Error("temperature search failed: no grid point kept natural accuracy "
                    "at or above " +
                    fmt_double(res.threshold) + "% (tau_max < 1)");

    double best_pgd = -1;
    for (size_t gi = 0; gi < grid.size(); ++gi) {
        TemperatureRecord& rec = res.records[gi];
        if (!rec.feasible || rec.tau > res.tau_max) continue;
        TrainRecord best = run_at(rec.tau, true, 1000 + gi);
        rec.step2_nat = best.nat_acc;
        rec.step2_pgd = best.pgd_acc;
        if (rec.step2_pgd > best_pgd) {  // ties keep the lower temperature
            best_pgd = rec.step2_pgd;
            res.tau_best = rec.tau;
        }
    }
    return res;
}

struct SpectrumCurve {
    double tau = 0;
    std::vector<double> mean_sorted;  // descending, averaged over the dataset
};

// Fig. 3 style curves: per temperature, the mean of the descending-sorted
// tempered output over all examples.
inline std::vector<SpectrumCurve> label_spectrum(const Model<float>& teacher,
                                                 const Dataset& d,
                                                 const std::vector<double>& taus,
                                                 int batch = 256) {
    ADVLAB_CHECK(d.size() > 0, "cannot build a spectrum from an empty dataset");
    std::vector<SpectrumCurve> curves;
    const int64_t n = d.size();
    const int64_t stride = numel(d.x.shape) / n;
    for (double tau : taus) {
        ADVLAB_CHECK(tau > 0, "temperature must be positive, got ", tau);
        SpectrumCurve c;
        c.tau = tau;
        for (int64_t i0 = 0; i0 < n; i0 += batch) {
            const int64_t b = std::min<int64_t>(batch, n - i0);
            Shape s = d.x.shape;
            s[0] = int(b);
            Tensor<float> xb(s);
            std::copy(d.x.data() + i0 * stride, d.x.data() + (i0 + b) * stride,
                      xb.data());
            Tensor<float> p = teacher_soft_batch(teacher, xb, tau);
            const int k = p.dim(1);
            if (c.mean_sorted.empty()) c.mean_sorted.assign(size_t(k), 0.0);
            std::vector<double> row(static_cast<size_t>(k));
            for (int64_t i = 0; i < b; ++i) {
                for (int j = 0; j < k; ++j) row[size_t(j)] = p[i * k + j];
                std::sort(row.begin(), row.end(), std::greater<>());
                for (int j = 0; j < k; ++j) c.mean_sorted[size_t(j)] += row[size_t(j)];
            }
        }
        for (double& v : c.mean_sorted) v /= double(n);
        curves.push_back(std::move(c));
    }
    return curves;
}

void write_label_spectrum_csv(const std::string& path,
                              const std::vector<SpectrumCurve>& curves);

}  // namespace advlab
