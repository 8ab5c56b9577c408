#ifndef POACHPRED_EVALUATION_HPP
#define POACHPRED_EVALUATION_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "augmentation.hpp"
#include "dataset.hpp"
#include "model.hpp"

namespace poach {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    [[nodiscard]] std::size_t total() const noexcept { return tp + fp + tn + fn; }

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
        return *this;
    }

    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

[[nodiscard]] inline ConfusionCounts confusion(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size()) throw ShapeError("truth and prediction lengths differ");
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (predicted[i]) (truth[i] ? c.tp : c.fp) += 1;
        else (truth[i] ? c.fn : c.tn) += 1;
    }
    return c;
}

// Undefined ratios are NaN with the matching flag cleared.
struct MetricsReport {
    ConfusionCounts counts;
    double precision = 0, recall = 0, f1 = 0, ll = 0;
    bool precision_defined = false, recall_defined = false;

    [[nodiscard]] bool ll_defined() const noexcept { return precision_defined && recall_defined; }
};

[[nodiscard]] inline MetricsReport metrics(const ConfusionCounts& c) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    MetricsReport m;
    m.counts = c;
    const std::size_t predicted = c.tp + c.fp;
    const std::size_t actual = c.tp + c.fn;
    m.precision_defined = predicted > 0;
    m.recall_defined = actual > 0;
    m.precision = m.precision_defined ? static_cast<double>(c.tp) / static_cast<double>(predicted) : nan;
    m.recall = m.recall_defined ? static_cast<double>(c.tp) / static_cast<double>(actual) : nan;
    m.ll = m.precision_defined && m.recall_defined
               ? m.recall * static_cast<double>(c.total()) / static_cast<double>(predicted)
               : nan;
    const bool both = m.precision_defined && m.recall_defined;
    m.f1 = both && (m.precision + m.recall) > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

// Labels each test point positive with probability 0.5.
[[nodiscard]] inline MetricsReport random_baseline(std::span<const int> truth, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::vector<int> predicted(truth.size());
    for (auto& p : predicted) p = coin(rng) ? 1 : 0;
    return metrics(confusion(truth, predicted));
}

[[nodiscard]] inline std::vector<int> truth_of(const Dataset& d, std::span<const std::size_t> rows) {
    std::vector<int> y;
    y.reserve(rows.size());
    for (auto r : rows) y.push_back(d[r].label == Label::Positive ? 1 : 0);
    return y;
}

// Stratified assignment of the given labeled rows to folds: positives are
// shuffled and dealt round-robin, negatives continue the deal where the
// positives stopped so fold sizes stay within one of each other.
[[nodiscard]] inline std::vector<std::vector<std::size_t>> stratified_folds(const Dataset& d,
                                                                            std::span<const std::size_t> rows,
                                                                            int n_folds, std::uint64_t seed) {
    if (n_folds < 2) throw ConfigError("n_folds must be >= 2");
    std::vector<std::size_t> pos, neg;
    for (auto r : rows) {
        if (d[r].label == Label::Positive) pos.push_back(r);
        else if (d[r].label == Label::Negative) neg.push_back(r);
        else throw ConfigError("fold rows must be labeled");
    }
    const auto k = static_cast<std::size_t>(n_folds);
    if (pos.size() < k)
        throw ConfigError("cannot stratify " + std::to_string(pos.size()) + " positives into " + std::to_string(k) +
                          " folds with at least one positive each");
    std::mt19937_64 rng(seed);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t next = 0;
    for (auto r : pos) folds[next++ % k].push_back(r);
    for (auto r : neg) folds[next++ % k].push_back(r);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

struct CVConfig {
    int n_folds = 4;
    int n_repeats = 10;
    std::uint64_t seed = 0;
    bool ns_per_fold = false;  // false: pool samples drawn once per repeat
};

struct FoldContext {
    int repeat = 0;
    int fold = 0;
    const TrainingSet& train;
    std::span<const std::size_t> test_rows;
};

using FoldObserver = std::function<void(const FoldContext&)>;

struct MetricSummary {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std = 0;
    std::size_t defined = 0;
    std::size_t undefined = 0;
};

[[nodiscard]] inline MetricSummary summarize(std::span<const double> values) {
    MetricSummary s;
    double sum = 0;
    for (double v : values) {
        if (std::isnan(v)) {
            ++s.undefined;
            continue;
        }
        sum += v;
        ++s.defined;
    }
    if (s.defined == 0) return s;
    s.mean = sum / static_cast<double>(s.defined);
    if (s.defined > 1) {
        double ss = 0;
        for (double v : values)
            if (!std::isnan(v)) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(s.defined - 1));
    }
    return s;
}

struct CVReport {
    std::string name;
    std::vector<MetricsReport> runs;  // repeat-major, fold-minor
    ConfusionCounts total;
    MetricSummary ll, recall, precision, f1;
};

[[nodiscard]] inline CVReport summarize_runs(std::string name, std::vector<MetricsReport> runs) {
    CVReport r{std::move(name), std::move(runs), {}, {}, {}, {}, {}};
    std::vector<double> ll, rec, prec, f1;
    for (const auto& m : r.runs) {
        r.total += m.counts;
        // A run with no positive predictions scores ll 0 in the mean; its
        // precision stays undefined and is counted separately.
        ll.push_back(!m.precision_defined && m.recall_defined ? 0.0 : m.ll);
        rec.push_back(m.recall);
        prec.push_back(m.precision);
        f1.push_back(m.f1);
    }
    r.ll = summarize(ll);
    r.recall = summarize(rec);
    r.precision = summarize(prec);
    r.f1 = summarize(f1);
    return r;
}

// Seeds for one (repeat, fold) run.
[[nodiscard]] inline std::uint64_t fold_split_seed(const CVConfig& cv, int repeat) {
    return derive_seed({cv.seed, 0x5f01d, static_cast<std::uint64_t>(repeat)});
}
[[nodiscard]] inline std::uint64_t fold_model_seed(const CVConfig& cv, int repeat, int fold) {
    return derive_seed({cv.seed, 0x30de1, static_cast<std::uint64_t>(repeat), static_cast<std::uint64_t>(fold)});
}
[[nodiscard]] inline std::uint64_t fold_plan_salt(const CVConfig& cv, int repeat, int fold) {
    return cv.ns_per_fold ? derive_seed({cv.seed, static_cast<std::uint64_t>(repeat), static_cast<std::uint64_t>(fold)})
                          : derive_seed({cv.seed, static_cast<std::uint64_t>(repeat)});
}

// Repeated stratified k-fold CV. Augmentation only ever touches the training
// folds; test folds are scored untouched on labeled points.
[[nodiscard]] inline CVReport cross_validate(const std::shared_ptr<const Dataset>& d, const AugmentationPlan& plan,
                                             const ModelSpec& spec, const CVConfig& cv,
                                             const AugmentationInputs& inputs = {}, const FoldObserver& observer = {},
                                             std::string name = {}) {
    if (cv.n_repeats < 1) throw ConfigError("n_repeats must be >= 1");
    const auto labeled = d->labeled_indices();
    const auto pool = d->unlabeled_pool();
    std::vector<MetricsReport> runs;
    for (int r = 0; r < cv.n_repeats; ++r) {
        const auto folds = stratified_folds(*d, labeled, cv.n_folds, fold_split_seed(cv, r));
        for (int f = 0; f < cv.n_folds; ++f) {
            const auto& test = folds[static_cast<std::size_t>(f)];
            const auto truth = truth_of(*d, test);
            if (spec.kind == ModelKind::Random) {
                runs.push_back(random_baseline(truth, fold_model_seed(cv, r, f)));
                continue;
            }
            std::vector<std::size_t> train_rows;
            for (int g = 0; g < cv.n_folds; ++g)
                if (g != f) {
                    const auto& other = folds[static_cast<std::size_t>(g)];
                    train_rows.insert(train_rows.end(), other.begin(), other.end());
                }
            std::sort(train_rows.begin(), train_rows.end());
            TrainingSet train =
                apply_plan(TrainingSet(d, std::move(train_rows)), plan, pool, inputs, fold_plan_salt(cv, r, f));
            if (observer) observer({r, f, train, test});
            const ThreatModel model = train_model(train, spec, fold_model_seed(cv, r, f));
            std::vector<int> predicted(test.size());
            parallel_for(test.size(), [&](std::size_t i) { predicted[i] = model.predict_label((*d)[test[i]].features); });
            runs.push_back(metrics(confusion(truth, predicted)));
        }
    }
    return summarize_runs(name.empty() ? model_kind_name(spec.kind) + " with " + plan.name() : std::move(name),
                          std::move(runs));
}

struct AblationRow {
    std::string name;
    AugmentationPlan plan;
    ModelSpec model;
};

[[nodiscard]] inline std::vector<CVReport> ablation_table(const std::shared_ptr<const Dataset>& d,
                                                          std::span<const AblationRow> rows, const CVConfig& cv,
                                                          const AugmentationInputs& inputs = {}) {
    std::vector<CVReport> out;
    for (const auto& row : rows) out.push_back(cross_validate(d, row.plan, row.model, cv, inputs, {}, row.name));
    return out;
}

[[nodiscard]] inline std::string format_metric(double v, int precision = 4) {
    return std::isnan(v) ? "nan" : csv::format_fixed(v, precision);
}

[[nodiscard]] inline std::string emit_ablation_csv(std::span<const CVReport> table) {
    std::string out =
        "name,ll,ll_std,recall,recall_std,precision,precision_std,f1,f1_std,runs,undefined_precision,tp,fp,tn,fn\n";
    for (const auto& r : table) {
        out += r.name;
        for (const auto* s : {&r.ll, &r.recall, &r.precision, &r.f1})
            out += "," + format_metric(s->mean, 6) + "," + format_metric(s->defined ? s->std : std::nan(""), 6);
        out += "," + std::to_string(r.runs.size()) + "," + std::to_string(r.precision.undefined);
        out += "," + std::to_string(r.total.tp) + "," + std::to_string(r.total.fp) + "," + std::to_string(r.total.tn) +
               "," + std::to_string(r.total.fn) + "\n";
    }
    return out;
}

// Aligned table: name, then mean +- std for ll, recall, precision, f1.
[[nodiscard]] inline std::string render_ablation_text(std::span<const CVReport> table) {
    const std::vector<std::string> header = {"name", "ll", "recall", "precision", "f1"};
    std::vector<std::vector<std::string>> cells{header};
    for (const auto& r : table) {
        std::vector<std::string> row{r.name};
        for (const auto* s : {&r.ll, &r.recall, &r.precision, &r.f1})
            row.push_back(s->defined ? format_metric(s->mean, 3) + " +- " + format_metric(s->std, 3) : "nan");
        cells.push_back(std::move(row));
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : cells)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t c = 0; c < cells[i].size(); ++c) {
            const auto& s = cells[i][c];
            if (c == 0) out += s + std::string(width[c] - s.size(), ' ');
            else out += "  " + std::string(width[c] - s.size(), ' ') + s;
        }
        out += "\n";
        if (i == 0) {
            std::size_t total = width[0];
            for (std::size_t c = 1; c < width.size(); ++c) total += 2 + width[c];
            out += std::string(total, '-') + "\n";
        }
    }
    return out;
}

}  // namespace poach

#endif  // POACHPRED_EVALUATION_HPP
