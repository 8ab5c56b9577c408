#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"

using namespace poach;

namespace {

std::string header() {
    std::string h = "grid_id,season";
    for (auto n : kFeatureNames) h += "," + std::string(n);
    return h + ",label\n";
}

std::string row(const std::string& grid, const std::string& season, int label, double fill = 0.5,
                double village = 0.5) {
    std::string r = grid + "," + season;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        r += ",";
        if (f == LandType) r += "2";
        else if (f == DistVillage) r += csv::format_double(village);
        else r += csv::format_double(fill);
    }
    return r + "," + std::to_string(label) + "\n";
}

}  // namespace

TEST(Schema, FourteenFeaturesTenDistances) {
    EXPECT_EQ(kNumFeatures, 14u);
    std::size_t distances = 0;
    for (auto n : kFeatureNames) distances += std::string_view(n).starts_with("dist_") ? 1 : 0;
    EXPECT_EQ(distances, kNumDistances);
    EXPECT_EQ(Dataset::feature_names().size(), 14u);
    EXPECT_FALSE(is_normalized(LandType));
}

TEST(Ingest, ThreeRowFileCountsEachLabelOnce) {
    const auto d = parse_csv(header() + row("g1", "2015", 1) + row("g2", "2015", 0) + row("g3", "all", -1));
    EXPECT_EQ(d.size(), 3u);
    EXPECT_EQ(d.count(Label::Positive), 1u);
    EXPECT_EQ(d.count(Label::Negative), 1u);
    EXPECT_EQ(d.count(Label::Unlabeled), 1u);
}

TEST(Ingest, OutOfRangeValueNamesTheRow) {
    try {
        (void)parse_csv(header() + row("g1", "2015", 1) + row("g2", "2015", 0, 0.5, 1.7));
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("dist_village"), std::string::npos);
    }
}

TEST(Ingest, RepeatedLabeledKeyIsDuplication) {
    EXPECT_THROW((void)parse_csv(header() + row("42", "2015", 1) + row("42", "2015", 0)), DuplicationError);
}

TEST(Ingest, UnlabeledGridOnlyOnce) {
    EXPECT_THROW((void)parse_csv(header() + row("7", "all", -1) + row("7", "2016", -1)), DuplicationError);
}

TEST(Ingest, RejectsBadLabelMissingColumnAndRaggedRow) {
    EXPECT_THROW((void)parse_csv(header() + row("g", "2015", 2)), SchemaError);
    EXPECT_THROW((void)parse_csv("grid_id,season,label\ng,2015,1\n"), SchemaError);
    EXPECT_THROW((void)parse_csv(header() + "g,2015,0.1\n"), SchemaError);
    EXPECT_THROW((void)parse_csv(""), SchemaError);
}

TEST(Ingest, ColumnMappingFollowsSchema) {
    std::string text = header();
    text.replace(0, 7, "cell");
    CsvSchema schema;
    schema.grid_id = "cell";
    const auto d = parse_csv(text + row("g1", "2015", 0), schema);
    EXPECT_EQ(d[0].grid_id, "g1");
}

TEST(Ingest, RoundTripsThroughEmit) {
    const auto& d = *fixture::small_dataset();
    EXPECT_EQ(parse_csv(emit_csv(d)), d);
}

TEST(Normalize, MinMaxIdentity) {
    std::vector<DataPoint> pts;
    const double vals[] = {100, 300, 500};
    const int lts[] = {1, 3, 2};
    for (int i = 0; i < 3; ++i) {
        auto p = fixture::point("g" + std::to_string(i), "2015", Label::Negative, 7.0, lts[i]);
        p.features[Elevation] = vals[i];
        pts.push_back(p);
    }
    const auto r = normalize(Dataset(pts));
    EXPECT_DOUBLE_EQ(r.data[0].features[Elevation], 0.0);
    EXPECT_DOUBLE_EQ(r.data[1].features[Elevation], 0.5);
    EXPECT_DOUBLE_EQ(r.data[2].features[Elevation], 1.0);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(r.data[static_cast<std::size_t>(i)].land_type(), lts[i]);
    // Every other column is constant at 7: mapped to 0 with one warning each.
    EXPECT_DOUBLE_EQ(r.data[1].features[DistRiver], 0.0);
    EXPECT_EQ(r.warnings.size(), kNumFeatures - 2);
    EXPECT_NO_THROW(validate_normalized(r.data));
}

TEST(Normalize, ScalerInvertsAndRoundTripsAsCsv) {
    const auto& w = fixture::small_world();
    const auto s2 = parse_scaler_csv(emit_scaler_csv(w.scaler));
    EXPECT_EQ(s2, w.scaler);
    const auto& x = w.dataset[5].features;
    const auto back = w.scaler.apply(w.scaler.invert(x));
    for (std::size_t f = 0; f < kNumFeatures; ++f) EXPECT_NEAR(back[f], x[f], 1e-12);
}

TEST(Skew, PerSeasonCounts) {
    std::vector<DataPoint> pts = {fixture::point("a", "2015", Label::Positive), fixture::point("b", "2015", Label::Negative),
                                  fixture::point("c", "2015", Label::Unlabeled)};
    const auto rep = skew_report(Dataset(pts));
    ASSERT_EQ(rep.size(), 1u);
    EXPECT_EQ(rep[0], (SkewRow{"2015", 1, 1, 1}));
    EXPECT_TRUE(skew_report(Dataset()).empty());
}

TEST(Synthetic, DefaultScaleWithinTenPercentOfTargets) {
    const SyntheticConfig c;
    const auto r = generate_synthetic(c, 7);
    const auto rep = skew_report(r.dataset);
    std::size_t seasons = 0;
    for (const auto& s : rep) {
        if (s.season == kAnySeason) {
            EXPECT_NEAR(static_cast<double>(s.unlabeled), 44500.0, 4450.0);
            continue;
        }
        ++seasons;
        EXPECT_NEAR(static_cast<double>(s.positives), 30.0, 3.0);
        EXPECT_NEAR(static_cast<double>(s.negatives), 9300.0, 930.0);
    }
    EXPECT_EQ(seasons, 4u);
    EXPECT_NO_THROW(validate_normalized(r.dataset));
    const double rate = static_cast<double>(r.dataset.count(Label::Positive)) /
                        static_cast<double>(r.dataset.count(Label::Positive) + r.dataset.count(Label::Negative));
    EXPECT_NEAR(rate, 0.003, 0.001);
}

TEST(Synthetic, DeterministicPerSeed) {
    const auto c = fixture::small_config();
    const auto a = generate_synthetic(c, 3), b = generate_synthetic(c, 3), other = generate_synthetic(c, 4);
    EXPECT_EQ(emit_csv(a.dataset), emit_csv(b.dataset));
    EXPECT_EQ(emit_truth_csv(a.truth), emit_truth_csv(b.truth));
    EXPECT_NE(emit_csv(a.dataset), emit_csv(other.dataset));
}

TEST(Synthetic, RejectsZeroPositives) {
    auto c = fixture::small_config();
    c.positives_per_season = 0;
    EXPECT_THROW((void)generate_synthetic(c, 1), ConfigError);
}

TEST(Synthetic, ThreatStaysUnderCeiling) {
    const auto& w = fixture::small_world();
    const double ceiling = fixture::small_config().max_threat;
    double top = 0;
    for (const auto& [grid, p] : w.truth.cell_threat) {
        EXPECT_GT(p, 0.0);
        EXPECT_LE(p, ceiling);
        top = std::max(top, p);
    }
    // The ceiling is a bound, not a cap that flattens the top of the surface.
    EXPECT_GT(top, 0.5 * ceiling);
    auto c = fixture::small_config();
    c.max_threat = 0.0;
    EXPECT_THROW((void)generate_synthetic(c, 1), ConfigError);
    c.max_threat = 0.001;
    EXPECT_THROW((void)generate_synthetic(c, 1), ConfigError);
}

TEST(Synthetic, TruthCoversEveryRowAndRecordedPositivesAreTrue) {
    const auto& w = fixture::small_world();
    ASSERT_EQ(w.truth.rows.size(), w.dataset.size());
    for (std::size_t i = 0; i < w.dataset.size(); ++i) {
        EXPECT_EQ(w.truth.rows[i].grid_id, w.dataset[i].grid_id);
        if (w.dataset[i].label == Label::Positive) {
            EXPECT_TRUE(w.truth.rows[i].true_label);
        }
    }
    EXPECT_EQ(parse_truth_csv(emit_truth_csv(w.truth)).rows.size(), w.truth.rows.size());
    const auto threat = parse_threat_csv(emit_threat_csv(w.truth.cell_threat));
    EXPECT_EQ(threat.size(), w.truth.cell_threat.size());
    for (const auto& [g, v] : w.truth.cell_threat) EXPECT_DOUBLE_EQ(threat.at(g), v);
}

TEST(Synthetic, UnlabeledCellsNeverPatrolled) {
    const auto& d = *fixture::small_dataset();
    std::set<std::string> labeled;
    for (const auto& p : d.points())
        if (p.label != Label::Unlabeled) labeled.insert(p.grid_id);
    for (const auto& p : d.points())
        if (p.label == Label::Unlabeled) {
            EXPECT_EQ(p.season, kAnySeason);
            EXPECT_FALSE(labeled.contains(p.grid_id));
        }
    EXPECT_EQ(d.unlabeled_pool().size(), d.count(Label::Unlabeled));
}
