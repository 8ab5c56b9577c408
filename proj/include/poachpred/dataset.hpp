#ifndef POACHPRED_DATASET_HPP
#define POACHPRED_DATASET_HPP

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "core.hpp"

namespace poach {

inline constexpr std::size_t kNumFeatures = 14;
inline constexpr std::size_t kNumDistances = 10;

// Column order is part of the file contract.
enum Feature : std::size_t {
    DistStream = 0,
    DistVillage,
    DistPatrolPost,
    DistRiver,
    DistMarsh,
    DistVillageRoad,
    DistProvincialRoad,
    DistNationalRoad,
    DistHighway,
    DistBoundary,
    LandType,
    Elevation,
    Slope,
    PatrolLengthPrev,
};

inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "dist_stream",       "dist_village",         "dist_patrol_post", "dist_river",
    "dist_marsh",        "dist_village_road",    "dist_provincial_road",
    "dist_national_road", "dist_highway",        "dist_boundary",    "land_type",
    "elevation",         "slope",                "patrol_length_prev",
};

// land_type is a category code and is the only un-normalized column.
[[nodiscard]] constexpr bool is_normalized(std::size_t feature) noexcept { return feature != LandType; }

// Largest land-type code accepted; category sets are stored as 64-bit masks.
inline constexpr int kMaxLandType = 63;

[[nodiscard]] inline std::optional<std::size_t> feature_index(std::string_view name) {
    for (std::size_t i = 0; i < kNumFeatures; ++i)
        if (kFeatureNames[i] == name) return i;
    return std::nullopt;
}

using FeatureVector = std::array<double, kNumFeatures>;

enum class Label : int { Negative = 0, Positive = 1, Unlabeled = -1 };

[[nodiscard]] constexpr int label_code(Label l) noexcept { return static_cast<int>(l); }

[[nodiscard]] inline std::optional<Label> label_from_code(long long code) {
    switch (code) {
        case 1: return Label::Positive;
        case 0: return Label::Negative;
        case -1: return Label::Unlabeled;
        default: return std::nullopt;
    }
}

// Season tag used for year-agnostic rows (unlabeled cells, sampled pool cells).
inline const std::string kAnySeason = "all";

struct DataPoint {
    std::string grid_id;
    std::string season;
    FeatureVector features{};
    Label label = Label::Unlabeled;

    [[nodiscard]] int land_type() const { return static_cast<int>(features[LandType]); }

    friend bool operator==(const DataPoint&, const DataPoint&) = default;
};

using PointKey = std::pair<std::string, std::string>;  // (grid_id, season)

[[nodiscard]] inline PointKey key_of(const DataPoint& p) { return {p.grid_id, p.season}; }

class Dataset;
[[nodiscard]] std::string emit_csv(const Dataset& d);

// Immutable after construction. The constructor enforces the structural
// invariants; the [0,1] range contract is checked by validate_normalized so
// raw-unit tables can share the type ahead of normalize().
class Dataset {
public:
    Dataset() : provenance_(fnv1a_hex(emit_csv(*this))) {}

    explicit Dataset(std::vector<DataPoint> points, std::string provenance = {})
        : points_(std::move(points)) {
        check_structure();
        provenance_ = provenance.empty() ? fnv1a_hex(emit_csv(*this)) : std::move(provenance);
    }

    [[nodiscard]] std::span<const DataPoint> points() const noexcept { return points_; }
    [[nodiscard]] const DataPoint& operator[](std::size_t i) const { return points_[i]; }
    [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
    [[nodiscard]] bool empty() const noexcept { return points_.empty(); }
    [[nodiscard]] const std::string& provenance() const noexcept { return provenance_; }

    [[nodiscard]] static std::vector<std::string> feature_names() {
        return {kFeatureNames.begin(), kFeatureNames.end()};
    }

    [[nodiscard]] std::size_t count(Label l) const {
        return static_cast<std::size_t>(
            std::count_if(points_.begin(), points_.end(), [l](const DataPoint& p) { return p.label == l; }));
    }

    [[nodiscard]] std::vector<std::size_t> indices_where(auto pred) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < points_.size(); ++i)
            if (pred(points_[i])) out.push_back(i);
        return out;
    }

    [[nodiscard]] std::vector<std::size_t> labeled_indices() const {
        return indices_where([](const DataPoint& p) { return p.label != Label::Unlabeled; });
    }

    // Never-patrolled cells usable for sampling: unlabeled rows whose grid
    // never appears with a label.
    [[nodiscard]] std::vector<std::size_t> unlabeled_pool() const {
        std::unordered_set<std::string> labeled;
        for (const auto& p : points_)
            if (p.label != Label::Unlabeled) labeled.insert(p.grid_id);
        return indices_where([&](const DataPoint& p) {
            return p.label == Label::Unlabeled && !labeled.contains(p.grid_id);
        });
    }

    friend bool operator==(const Dataset& a, const Dataset& b) { return a.points_ == b.points_; }

private:
    void check_structure() const {
        std::set<PointKey> labeled;
        std::unordered_set<std::string> unlabeled;
        for (std::size_t i = 0; i < points_.size(); ++i) {
            const auto& p = points_[i];
            for (std::size_t f = 0; f < kNumFeatures; ++f) {
                if (!std::isfinite(p.features[f]))
                    throw ValidationError("row " + std::to_string(i) + ": non-finite value in '" +
                                          std::string(kFeatureNames[f]) + "'");
            }
            const double lt = p.features[LandType];
            if (lt < 0 || lt > kMaxLandType || lt != std::floor(lt))
                throw ValidationError("row " + std::to_string(i) + ": land_type must be an integer code in [0," +
                                      std::to_string(kMaxLandType) + "]");
            if (p.label == Label::Unlabeled) {
                if (!unlabeled.insert(p.grid_id).second)
                    throw DuplicationError("row " + std::to_string(i) + ": unlabeled grid '" + p.grid_id +
                                           "' appears more than once");
            } else if (!labeled.insert(key_of(p)).second) {
                throw DuplicationError("row " + std::to_string(i) + ": duplicate labeled (grid_id, season) = (" +
                                       p.grid_id + ", " + p.season + ")");
            }
        }
    }

    std::vector<DataPoint> points_;
    std::string provenance_;
};

// Throws ValidationError naming the first row/column outside [0,1].
inline void validate_normalized(const Dataset& d) {
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            if (!is_normalized(f)) continue;
            const double v = d[i].features[f];
            if (v < 0.0 || v > 1.0)
                throw ValidationError("row " + std::to_string(i) + ": " + std::string(kFeatureNames[f]) + " = " +
                                      csv::format_double(v) + " outside [0,1]");
        }
    }
}

// Maps logical columns to header names in the file. Defaults to identity.
struct CsvSchema {
    std::string grid_id = "grid_id";
    std::string season = "season";
    std::string label = "label";
    std::array<std::string, kNumFeatures> features = [] {
        std::array<std::string, kNumFeatures> names;
        for (std::size_t i = 0; i < kNumFeatures; ++i) names[i] = std::string(kFeatureNames[i]);
        return names;
    }();
};

enum class Units { Normalized, Raw };

[[nodiscard]] inline Dataset parse_csv(std::string_view text, const CsvSchema& schema = {},
                                       Units units = Units::Normalized) {
    auto rows = csv::lines(text);
    if (rows.empty()) throw SchemaError("empty file: header row required");
    const auto header = csv::split(rows.front());
    auto column = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto c_grid = column(schema.grid_id);
    const auto c_season = column(schema.season);
    const auto c_label = column(schema.label);
    std::array<std::size_t, kNumFeatures> c_feat{};
    for (std::size_t f = 0; f < kNumFeatures; ++f) c_feat[f] = column(schema.features[f]);

    std::vector<DataPoint> points;
    points.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto cells = csv::split(rows[r]);
        const std::size_t row = r - 1;
        if (cells.size() != header.size())
            throw SchemaError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                              " fields, got " + std::to_string(cells.size()));
        DataPoint p;
        p.grid_id = cells[c_grid];
        p.season = cells[c_season];
        if (p.grid_id.empty()) throw SchemaError("row " + std::to_string(row) + ": empty grid_id");
        auto code = csv::parse_int(cells[c_label]);
        auto label = code ? label_from_code(*code) : std::nullopt;
        if (!label)
            throw SchemaError("row " + std::to_string(row) + ": label must be one of 1, 0, -1 (got '" +
                              cells[c_label] + "')");
        p.label = *label;
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            auto v = csv::parse_double(cells[c_feat[f]]);
            if (!v)
                throw ValidationError("row " + std::to_string(row) + ": '" + cells[c_feat[f]] +
                                      "' is not a number in column '" + schema.features[f] + "'");
            p.features[f] = *v;
        }
        points.push_back(std::move(p));
    }
    Dataset d(std::move(points), fnv1a_hex(text));
    if (units == Units::Normalized) validate_normalized(d);
    return d;
}

[[nodiscard]] inline Dataset ingest_csv(const std::string& path, const CsvSchema& schema = {},
                                        Units units = Units::Normalized) {
    return parse_csv(csv::read_file(path), schema, units);
}

[[nodiscard]] inline std::string emit_csv(const Dataset& d) {
    std::string out = "grid_id,season";
    for (auto name : kFeatureNames) {
        out += ',';
        out += name;
    }
    out += ",label\n";
    for (const auto& p : d.points()) {
        out += p.grid_id;
        out += ',';
        out += p.season;
        for (double v : p.features) {
            out += ',';
            out += csv::format_double(v);
        }
        out += ',';
        out += std::to_string(label_code(p.label));
        out += '\n';
    }
    return out;
}

inline void write_csv(const std::string& path, const Dataset& d) { csv::write_file(path, emit_csv(d)); }

// Min-max parameters per column, persisted with models so prediction-time
// inputs use the training-time scale.
struct Scaler {
    FeatureVector min{};
    FeatureVector max{};

    [[nodiscard]] FeatureVector apply(const FeatureVector& raw) const {
        FeatureVector out = raw;
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            if (!is_normalized(f)) continue;
            const double span = max[f] - min[f];
            out[f] = span > 0 ? (raw[f] - min[f]) / span : 0.0;
        }
        return out;
    }

    [[nodiscard]] FeatureVector invert(const FeatureVector& normalized) const {
        FeatureVector out = normalized;
        for (std::size_t f = 0; f < kNumFeatures; ++f)
            if (is_normalized(f)) out[f] = min[f] + normalized[f] * (max[f] - min[f]);
        return out;
    }

    friend bool operator==(const Scaler&, const Scaler&) = default;
};

[[nodiscard]] inline std::string emit_scaler_csv(const Scaler& s) {
    std::string out = "feature,min,max\n";
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (!is_normalized(f)) continue;
        out += std::string(kFeatureNames[f]) + ',' + csv::format_double(s.min[f]) + ',' +
               csv::format_double(s.max[f]) + '\n';
    }
    return out;
}

[[nodiscard]] inline Scaler parse_scaler_csv(std::string_view text) {
    auto rows = csv::lines(text);
    if (rows.empty() || csv::split(rows.front()) != std::vector<std::string>{"feature", "min", "max"})
        throw SchemaError("scaler file must have header 'feature,min,max'");
    Scaler s;
    std::vector<bool> seen(kNumFeatures, false);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto cells = csv::split(rows[r]);
        auto f = cells.size() == 3 ? feature_index(cells[0]) : std::nullopt;
        auto lo = cells.size() == 3 ? csv::parse_double(cells[1]) : std::nullopt;
        auto hi = cells.size() == 3 ? csv::parse_double(cells[2]) : std::nullopt;
        if (!f || !lo || !hi || !is_normalized(*f))
            throw FormatError("scaler row " + std::to_string(r - 1) + " is malformed");
        s.min[*f] = *lo;
        s.max[*f] = *hi;
        seen[*f] = true;
    }
    for (std::size_t f = 0; f < kNumFeatures; ++f)
        if (is_normalized(f) && !seen[f]) throw SchemaError("scaler missing feature '" + std::string(kFeatureNames[f]) + "'");
    return s;
}

struct NormalizeResult {
    Dataset data;
    Scaler scaler;
    std::vector<std::string> warnings;
};

// Min-max rescales every column except land_type. A constant column has no
// defined scale; it maps to 0.0 and produces a warning.
[[nodiscard]] inline NormalizeResult normalize(const Dataset& raw) {
    NormalizeResult result;
    Scaler& s = result.scaler;
    s.min.fill(std::numeric_limits<double>::infinity());
    s.max.fill(-std::numeric_limits<double>::infinity());
    for (const auto& p : raw.points())
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            s.min[f] = std::min(s.min[f], p.features[f]);
            s.max[f] = std::max(s.max[f], p.features[f]);
        }
    if (raw.empty()) {
        s.min.fill(0.0);
        s.max.fill(0.0);
    }
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (!is_normalized(f)) {
            s.min[f] = s.max[f] = 0.0;
            continue;
        }
        if (!raw.empty() && s.max[f] == s.min[f])
            result.warnings.push_back("degenerate column '" + std::string(kFeatureNames[f]) +
                                      "' is constant; mapped to 0.0");
    }
    std::vector<DataPoint> points(raw.points().begin(), raw.points().end());
    for (auto& p : points) p.features = s.apply(p.features);
    result.data = Dataset(std::move(points));
    return result;
}

struct SkewRow {
    std::string season;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::size_t unlabeled = 0;

    friend bool operator==(const SkewRow&, const SkewRow&) = default;
};

// Class counts per season, ordered by season tag.
[[nodiscard]] inline std::vector<SkewRow> skew_report(const Dataset& d) {
    std::map<std::string, SkewRow> by_season;
    for (const auto& p : d.points()) {
        auto& row = by_season[p.season];
        row.season = p.season;
        switch (p.label) {
            case Label::Positive: ++row.positives; break;
            case Label::Negative: ++row.negatives; break;
            case Label::Unlabeled: ++row.unlabeled; break;
        }
    }
    std::vector<SkewRow> out;
    out.reserve(by_season.size());
    for (auto& [_, row] : by_season) out.push_back(row);
    return out;
}

[[nodiscard]] inline std::string emit_skew_csv(const std::vector<SkewRow>& rows) {
    std::string out = "season,positive,negative,unlabeled\n";
    for (const auto& r : rows)
        out += r.season + ',' + std::to_string(r.positives) + ',' + std::to_string(r.negatives) + ',' +
               std::to_string(r.unlabeled) + '\n';
    return out;
}

}  // namespace poach

#endif  // POACHPRED_DATASET_HPP
