#ifndef POACHPRED_AUGMENTATION_HPP
#define POACHPRED_AUGMENTATION_HPP

#include <cmath>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "dataset.hpp"
#include "elicitation.hpp"

namespace poach {

enum class Origin { Base, DD, SMOTE, NS, PS, PSFR };

[[nodiscard]] constexpr std::string_view origin_name(Origin o) {
    switch (o) {
        case Origin::Base: return "base";
        case Origin::DD: return "DD";
        case Origin::SMOTE: return "SMOTE";
        case Origin::NS: return "NS";
        case Origin::PS: return "PS";
        case Origin::PSFR: return "PSFR";
    }
    return "?";
}

struct AddedPoint {
    DataPoint point;
    Origin origin;
};

struct StepRecord {
    std::string step;
    std::size_t added = 0;
    std::vector<std::string> warnings;
};

// Training view over an immutable base dataset: a subset of its labeled
// rows plus points added by augmentation steps. The base is shared, never
// copied or modified.
class TrainingSet {
public:
    TrainingSet(std::shared_ptr<const Dataset> base, std::vector<std::size_t> rows)
        : base_(std::move(base)), rows_(std::move(rows)) {
        for (auto r : rows_) {
            if (r >= base_->size()) throw ParameterError("training row index out of range");
            if ((*base_)[r].label == Label::Unlabeled) throw ParameterError("training rows must be labeled");
            count((*base_)[r].label);
        }
    }

    static TrainingSet all_labeled(std::shared_ptr<const Dataset> base) {
        auto rows = base->labeled_indices();
        return {std::move(base), std::move(rows)};
    }

    [[nodiscard]] const Dataset& base() const noexcept { return *base_; }
    [[nodiscard]] const std::shared_ptr<const Dataset>& base_ptr() const noexcept { return base_; }
    [[nodiscard]] std::span<const std::size_t> base_rows() const noexcept { return rows_; }
    [[nodiscard]] std::span<const AddedPoint> added() const noexcept { return added_; }
    [[nodiscard]] std::span<const StepRecord> log() const noexcept { return log_; }

    [[nodiscard]] std::size_t size() const noexcept { return rows_.size() + added_.size(); }
    [[nodiscard]] std::size_t positives() const noexcept { return pos_; }
    [[nodiscard]] std::size_t negatives() const noexcept { return neg_; }

    [[nodiscard]] const DataPoint& operator[](std::size_t i) const {
        return i < rows_.size() ? (*base_)[rows_[i]] : added_[i - rows_.size()].point;
    }

    [[nodiscard]] Origin origin(std::size_t i) const {
        return i < rows_.size() ? Origin::Base : added_[i - rows_.size()].origin;
    }

    [[nodiscard]] bool sampled(const std::string& grid) const { return sampled_grids_.contains(grid); }

    void add(DataPoint p, Origin origin) {
        if (p.label == Label::Unlabeled) throw AugmentationError("added points must carry a label");
        if (origin == Origin::NS || origin == Origin::PS || origin == Origin::PSFR)
            if (!sampled_grids_.insert(p.grid_id).second)
                throw AugmentationError("grid '" + p.grid_id + "' sampled twice");
        count(p.label);
        added_.push_back({std::move(p), origin});
    }

    void record(StepRecord r) { log_.push_back(std::move(r)); }

private:
    void count(Label l) { (l == Label::Positive ? pos_ : neg_) += 1; }

    std::shared_ptr<const Dataset> base_;
    std::vector<std::size_t> rows_;
    std::vector<AddedPoint> added_;
    std::unordered_set<std::string> sampled_grids_;
    std::vector<StepRecord> log_;
    std::size_t pos_ = 0, neg_ = 0;
};

// Indices into the base dataset of never-patrolled cells.
using Pool = std::span<const std::size_t>;

// ---------------------------------------------------------------------------
// Data Duplication

// Whole-copy replication, round-robin over the current minority class, until
// both classes have the same count.
[[nodiscard]] inline TrainingSet duplicate_positives(TrainingSet t) {
    if (t.positives() == 0) throw AugmentationError("data duplication needs at least one positive");
    const bool grow_pos = t.positives() < t.negatives();
    const Label minority = grow_pos ? Label::Positive : Label::Negative;
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i].label == minority) members.push_back(i);
    StepRecord rec{"DD", 0, {}};
    if (!grow_pos && t.positives() > t.negatives()) {
        if (t.negatives() == 0) throw AugmentationError("data duplication needs at least one negative");
        rec.warnings.push_back("positives outnumber negatives; negatives replicated instead");
    }
    for (std::size_t j = 0; t.positives() != t.negatives(); ++j) {
        DataPoint copy = t[members[j % members.size()]];
        t.add(std::move(copy), Origin::DD);
        ++rec.added;
    }
    t.record(std::move(rec));
    return t;
}

// ---------------------------------------------------------------------------
// SMOTE

// Interpolates the scalar features; land_type is categorical and follows the base point.
[[nodiscard]] inline FeatureVector smote_interpolate(const FeatureVector& base, const FeatureVector& neighbor, double u) {
    FeatureVector out = base;
    for (std::size_t f = 0; f < kNumFeatures; ++f)
        if (is_normalized(f)) out[f] = base[f] + u * (neighbor[f] - base[f]);
    return out;
}

[[nodiscard]] inline double scalar_distance2(const FeatureVector& a, const FeatureVector& b) {
    double s = 0;
    for (std::size_t f = 0; f < kNumFeatures; ++f)
        if (is_normalized(f)) s += (a[f] - b[f]) * (a[f] - b[f]);
    return s;
}

[[nodiscard]] inline TrainingSet smote(TrainingSet t, int k_neighbors, std::size_t amount, std::uint64_t seed) {
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i].label == Label::Positive) pos.push_back(i);
    if (pos.size() < 2) throw AugmentationError("SMOTE needs at least two positives");
    if (k_neighbors < 1) throw ParameterError("SMOTE k_neighbors must be >= 1");
    StepRecord rec{"SMOTE", 0, {}};
    auto k = static_cast<std::size_t>(k_neighbors);
    if (k >= pos.size()) {
        rec.warnings.push_back("k_neighbors " + std::to_string(k) + " clamped to " + std::to_string(pos.size() - 1));
        k = pos.size() - 1;
    }
    std::vector<std::vector<std::size_t>> neighbors(pos.size());
    for (std::size_t a = 0; a < pos.size(); ++a) {
        std::vector<std::pair<double, std::size_t>> dist;
        for (std::size_t b = 0; b < pos.size(); ++b)
            if (b != a) dist.emplace_back(scalar_distance2(t[pos[a]].features, t[pos[b]].features), b);
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        for (std::size_t j = 0; j < k; ++j) neighbors[a].push_back(dist[j].second);
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_base(0, pos.size() - 1), pick_nb(0, k - 1);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::size_t serial = 0;
    while (t.positives() < amount) {
        const std::size_t a = pick_base(rng);
        const std::size_t b = neighbors[a][pick_nb(rng)];
        const DataPoint& parent = t[pos[a]];
        DataPoint p;
        p.grid_id = "smote-" + std::to_string(serial++);
        p.season = parent.season;
        p.features = smote_interpolate(parent.features, t[pos[b]].features, u01(rng));
        p.label = Label::Positive;
        t.add(std::move(p), Origin::SMOTE);
        ++rec.added;
    }
    t.record(std::move(rec));
    return t;
}

// ---------------------------------------------------------------------------
// Negative Sampling

[[nodiscard]] inline TrainingSet negative_sample(TrainingSet t, Pool pool, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ParameterError("NS fraction must be in (0,1]");
    if (pool.empty()) throw AugmentationError("NS needs a non-empty unlabeled pool");
    std::vector<std::size_t> available;
    for (auto i : pool)
        if (!t.sampled(t.base()[i].grid_id)) available.push_back(i);
    const auto want = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pool.size()) - 1e-9));
    const std::size_t take = std::min(want, available.size());
    std::mt19937_64 rng(seed);
    for (std::size_t j = 0; j < take; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, available.size() - 1);
        std::swap(available[j], available[pick(rng)]);
    }
    std::sort(available.begin(), available.begin() + static_cast<std::ptrdiff_t>(take));
    StepRecord rec{"NS", 0, {}};
    if (take < want) rec.warnings.push_back("pool exhausted; " + std::to_string(take) + " of " + std::to_string(want) + " sampled");
    for (std::size_t j = 0; j < take; ++j) {
        DataPoint p = t.base()[available[j]];
        p.label = Label::Negative;
        t.add(std::move(p), Origin::NS);
        ++rec.added;
    }
    t.record(std::move(rec));
    return t;
}

// ---------------------------------------------------------------------------
// Score-based Positive Sampling

inline constexpr int kDefaultScoreThreshold = 6;

[[nodiscard]] inline TrainingSet positive_sample_scores(TrainingSet t, Pool pool, const AggregatedScoreMap& scores,
                                                        int threshold = kDefaultScoreThreshold) {
    StepRecord rec{"PS", 0, {}};
    std::vector<std::size_t> chosen;
    for (auto i : pool) {
        const auto& cell = t.base()[i];
        auto s = scores.score_of(cell.grid_id);
        if (!s) throw CoverageError("no aggregated score for pool cell '" + cell.grid_id + "'");
        if (*s >= threshold && !t.sampled(cell.grid_id)) chosen.push_back(i);
    }
    for (auto i : chosen) {
        DataPoint p = t.base()[i];
        p.label = Label::Positive;
        t.add(std::move(p), Origin::PS);
        ++rec.added;
    }
    t.record(std::move(rec));
    return t;
}

// ---------------------------------------------------------------------------
// Positive Sampling via Feature Ranges

struct Interval {
    double lo = 0, hi = 1;

    [[nodiscard]] bool contains(double v) const noexcept { return v >= lo && v <= hi; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

struct FeatureRange {
    std::size_t feature = 0;
    Interval low;   // low-threat interval; only the audit reads it
    Interval high;  // high-threat interval

    friend bool operator==(const FeatureRange&, const FeatureRange&) = default;
};

inline void validate(const FeatureRange& r) {
    if (r.feature >= kNumFeatures || !is_normalized(r.feature))
        throw ParameterError("feature ranges apply to normalized features only");
    for (auto iv : {r.low, r.high})
        if (!(iv.lo >= 0.0 && iv.hi <= 1.0 && iv.lo <= iv.hi))
            throw RangeError("interval for '" + std::string(kFeatureNames[r.feature]) + "' must satisfy 0 <= lo <= hi <= 1");
}

// Number of features of x inside their high-threat interval.
[[nodiscard]] inline std::size_t ranges_hit(const FeatureVector& x, std::span<const FeatureRange> ranges) {
    std::size_t m = 0;
    for (const auto& r : ranges) m += r.high.contains(x[r.feature]) ? 1 : 0;
    return m;
}

// Naive-Bayes score p^m q^(n-m), left unnormalized: only the ranking matters.
[[nodiscard]] inline double psfr_probability(const FeatureVector& x, std::span<const FeatureRange> ranges, double p,
                                             double q) {
    if (!(q > 0.0 && q <= p && p < 1.0)) throw ParameterError("PSFR requires 0 < q <= p < 1");
    if (ranges.empty()) throw ParameterError("PSFR requires at least one feature range");
    const auto m = ranges_hit(x, ranges);
    const auto n = ranges.size();
    return std::pow(p, static_cast<double>(m)) * std::pow(q, static_cast<double>(n - m));
}

inline constexpr double kPsfrP = 0.04;
inline constexpr double kPsfrQ = 0.01;

[[nodiscard]] inline TrainingSet positive_sample_ranges(TrainingSet t, Pool pool, std::span<const FeatureRange> ranges,
                                                        double p, double q, std::size_t top_n) {
    if (top_n > pool.size())
        throw ParameterError("PSFR top_n " + std::to_string(top_n) + " exceeds pool size " + std::to_string(pool.size()));
    StepRecord rec{"PSFR", 0, {}};
    if (top_n == 0) {
        t.record(std::move(rec));
        return t;
    }
    std::vector<std::pair<double, std::size_t>> scored;
    for (auto i : pool)
        if (!t.sampled(t.base()[i].grid_id)) scored.emplace_back(psfr_probability(t.base()[i].features, ranges, p, q), i);
    const std::size_t take = std::min(top_n, scored.size());
    auto better = [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return t.base()[a.second].grid_id < t.base()[b.second].grid_id;
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);
    for (std::size_t j = 0; j < take; ++j) {
        DataPoint pt = t.base()[scored[j].second];
        pt.label = Label::Positive;
        t.add(std::move(pt), Origin::PSFR);
        ++rec.added;
    }
    t.record(std::move(rec));
    return t;
}

[[nodiscard]] inline std::vector<FeatureRange> parse_ranges_csv(std::string_view text) {
    auto rows = csv::lines(text);
    const std::vector<std::string> expected = {"feature", "low_lo", "low_hi", "high_lo", "high_hi"};
    if (rows.empty() || csv::split(rows.front()) != expected)
        throw SchemaError("ranges file must have header 'feature,low_lo,low_hi,high_lo,high_hi'");
    std::vector<FeatureRange> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto cells = csv::split(rows[r]);
        if (cells.size() != 5) throw FormatError("ranges row " + std::to_string(r - 1) + " must have 5 fields");
        auto f = feature_index(cells[0]);
        if (!f) throw SchemaError("ranges row " + std::to_string(r - 1) + ": unknown feature '" + cells[0] + "'");
        std::array<double, 4> v{};
        for (std::size_t j = 0; j < 4; ++j) {
            auto x = csv::parse_double(cells[j + 1]);
            if (!x) throw FormatError("ranges row " + std::to_string(r - 1) + ": '" + cells[j + 1] + "' is not a number");
            v[j] = *x;
        }
        FeatureRange range{*f, {v[0], v[1]}, {v[2], v[3]}};
        validate(range);
        for (const auto& prev : out)
            if (prev.feature == range.feature) throw DuplicationError("feature '" + cells[0] + "' has two ranges");
        out.push_back(range);
    }
    return out;
}

[[nodiscard]] inline std::string emit_ranges_csv(std::span<const FeatureRange> ranges) {
    std::string out = "feature,low_lo,low_hi,high_lo,high_hi\n";
    for (const auto& r : ranges)
        out += std::string(kFeatureNames[r.feature]) + ',' + csv::format_double(r.low.lo) + ',' +
               csv::format_double(r.low.hi) + ',' + csv::format_double(r.high.lo) + ',' +
               csv::format_double(r.high.hi) + '\n';
    return out;
}

// ---------------------------------------------------------------------------
// Plans

struct DataDuplication {};
struct Smote {
    int k_neighbors = 5;
    std::optional<std::size_t> amount;  // default: negative count at application time
};
struct NegativeSampling {
    double fraction = 0.2;
};
struct ScorePositiveSampling {
    int threshold = kDefaultScoreThreshold;
};
struct RangePositiveSampling {
    std::vector<FeatureRange> ranges;
    double p = kPsfrP;
    double q = kPsfrQ;
    std::size_t top_n = 1000;
};

using Step = std::variant<DataDuplication, Smote, NegativeSampling, ScorePositiveSampling, RangePositiveSampling>;

[[nodiscard]] inline std::string step_name(const Step& s) {
    static constexpr std::array<std::string_view, 5> names = {"DD", "SMOTE", "NS", "PS", "PSFR"};
    return std::string(names[s.index()]);
}

struct AugmentationPlan {
    std::vector<Step> steps;
    std::uint64_t seed = 0;

    [[nodiscard]] std::string name() const {
        if (steps.empty()) return "none";
        std::string out;
        for (const auto& s : steps) out += (out.empty() ? "" : ",") + step_name(s);
        return out;
    }

    [[nodiscard]] bool needs_pool() const {
        return std::any_of(steps.begin(), steps.end(), [](const Step& s) {
            return std::holds_alternative<NegativeSampling>(s) || std::holds_alternative<ScorePositiveSampling>(s) ||
                   std::holds_alternative<RangePositiveSampling>(s);
        });
    }
};

// Step parameters used when a plan is built from a list of step names.
struct PlanDefaults {
    Smote smote;
    NegativeSampling ns;
    ScorePositiveSampling ps;
    RangePositiveSampling psfr;
};

// Builds a plan from names like "DD,NS,PS". Pool sampling runs first
// (positives before negatives, so a cell the experts flag is not taken as a
// negative), then SMOTE, and DD last so class balance holds at training time.
[[nodiscard]] inline AugmentationPlan parse_plan(std::string_view spec, const PlanDefaults& defaults = {},
                                                 std::uint64_t seed = 0) {
    AugmentationPlan plan;
    plan.seed = seed;
    std::array<bool, 5> want{};
    for (auto token : csv::split(spec, ',')) {
        for (auto& ch : token) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        if (token.empty() || token == "NONE") continue;
        if (token == "DD") want[0] = true;
        else if (token == "SMOTE") want[1] = true;
        else if (token == "NS") want[2] = true;
        else if (token == "PS") want[3] = true;
        else if (token == "PSFR") want[4] = true;
        else throw ParameterError("unknown augmentation step '" + token + "'");
    }
    if (want[3]) plan.steps.emplace_back(defaults.ps);
    if (want[4]) plan.steps.emplace_back(defaults.psfr);
    if (want[2]) plan.steps.emplace_back(defaults.ns);
    if (want[1]) plan.steps.emplace_back(defaults.smote);
    if (want[0]) plan.steps.emplace_back(DataDuplication{});
    return plan;
}

// Side inputs some steps need.
struct AugmentationInputs {
    const AggregatedScoreMap* scores = nullptr;
};

// Applies the steps in order. `step_seed_salt` lets callers re-sample per
// CV fold or keep one sample per run.
[[nodiscard]] inline TrainingSet apply_plan(TrainingSet t, const AugmentationPlan& plan, Pool pool,
                                            const AugmentationInputs& inputs = {}, std::uint64_t step_seed_salt = 0) {
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        const std::uint64_t seed = derive_seed({plan.seed, step_seed_salt, i});
        t = std::visit(
            [&](const auto& step) -> TrainingSet {
                using S = std::decay_t<decltype(step)>;
                if constexpr (std::is_same_v<S, DataDuplication>) {
                    return duplicate_positives(std::move(t));
                } else if constexpr (std::is_same_v<S, Smote>) {
                    const std::size_t amount = step.amount.value_or(t.negatives());
                    return smote(std::move(t), step.k_neighbors, amount, seed);
                } else if constexpr (std::is_same_v<S, NegativeSampling>) {
                    return negative_sample(std::move(t), pool, step.fraction, seed);
                } else if constexpr (std::is_same_v<S, ScorePositiveSampling>) {
                    if (!inputs.scores) throw ParameterError("PS step needs an aggregated score map");
                    return positive_sample_scores(std::move(t), pool, *inputs.scores, step.threshold);
                } else {
                    if (step.ranges.empty()) throw ParameterError("PSFR step needs feature ranges");
                    return positive_sample_ranges(std::move(t), pool, step.ranges, step.p, step.q, step.top_n);
                }
            },
            plan.steps[i]);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Feature audit

inline constexpr std::size_t kAuditBins = 20;

struct HistogramRow {
    std::size_t feature;
    double bin_lo, bin_hi;
    std::size_t pos = 0, neg = 0;
};

struct AgreementRow {
    std::size_t feature;
    double inside_rate, outside_rate;
    bool discordant;
};

struct AuditReport {
    std::vector<HistogramRow> histograms;
    std::vector<AgreementRow> agreement;
};

// Label-split histograms of every normalized feature plus, per expert range,
// the positive rate inside vs outside its high-threat interval. A range whose
// inside rate does not exceed its outside rate is flagged discordant. When no
// labeled point falls outside the interval the outside rate is the global rate.
[[nodiscard]] inline AuditReport feature_audit(const Dataset& d, std::span<const FeatureRange> ranges) {
    if (d.count(Label::Positive) == 0 || d.count(Label::Negative) == 0)
        throw ParameterError("feature audit needs at least one positive and one negative");
    AuditReport report;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (!is_normalized(f)) continue;
        std::vector<HistogramRow> bins;
        for (std::size_t b = 0; b < kAuditBins; ++b)
            bins.push_back({f, static_cast<double>(b) / kAuditBins, static_cast<double>(b + 1) / kAuditBins, 0, 0});
        for (const auto& p : d.points()) {
            if (p.label == Label::Unlabeled) continue;
            auto b = std::min(kAuditBins - 1, static_cast<std::size_t>(p.features[f] * kAuditBins));
            (p.label == Label::Positive ? bins[b].pos : bins[b].neg) += 1;
        }
        report.histograms.insert(report.histograms.end(), bins.begin(), bins.end());
    }
    const double global = static_cast<double>(d.count(Label::Positive)) /
                          static_cast<double>(d.count(Label::Positive) + d.count(Label::Negative));
    for (const auto& r : ranges) {
        double in_pos = 0, in_n = 0, out_pos = 0, out_n = 0;
        for (const auto& p : d.points()) {
            if (p.label == Label::Unlabeled) continue;
            const double y = p.label == Label::Positive ? 1.0 : 0.0;
            if (r.high.contains(p.features[r.feature])) in_pos += y, in_n += 1;
            else out_pos += y, out_n += 1;
        }
        const double inside = in_n > 0 ? in_pos / in_n : 0.0;
        const double outside = out_n > 0 ? out_pos / out_n : global;
        report.agreement.push_back({r.feature, inside, outside, inside <= outside});
    }
    return report;
}

[[nodiscard]] inline std::string emit_histogram_csv(const AuditReport& a) {
    std::string out = "feature,bin_lo,bin_hi,pos_count,neg_count\n";
    for (const auto& h : a.histograms)
        out += std::string(kFeatureNames[h.feature]) + ',' + csv::format_fixed(h.bin_lo, 2) + ',' +
               csv::format_fixed(h.bin_hi, 2) + ',' + std::to_string(h.pos) + ',' + std::to_string(h.neg) + '\n';
    return out;
}

[[nodiscard]] inline std::string emit_agreement_csv(const AuditReport& a) {
    std::string out = "feature,inside_rate,outside_rate,verdict\n";
    for (const auto& g : a.agreement)
        out += std::string(kFeatureNames[g.feature]) + ',' + csv::format_fixed(g.inside_rate, 6) + ',' +
               csv::format_fixed(g.outside_rate, 6) + ',' + (g.discordant ? "discordant" : "concordant") + '\n';
    return out;
}

}  // namespace poach

#endif  // POACHPRED_AUGMENTATION_HPP
