#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace poach;

namespace {

Dataset corners() {
    std::vector<DataPoint> pts;
    const double xy[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    for (int i = 0; i < 4; ++i) {
        auto p = fixture::point("c" + std::to_string(i), kAnySeason, Label::Unlabeled, 0.0);
        p.features[DistStream] = xy[i][0];
        p.features[DistVillage] = xy[i][1];
        pts.push_back(p);
    }
    return Dataset(pts);
}

Dataset blobs(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.01);
    std::vector<DataPoint> pts;
    for (int b = 0; b < 2; ++b)
        for (int i = 0; i < 50; ++i) {
            auto p = fixture::point("b" + std::to_string(b) + "_" + std::to_string(i), kAnySeason, Label::Unlabeled,
                                    b == 0 ? 0.2 : 0.8);
            for (std::size_t f = 0; f < kNumFeatures; ++f)
                if (is_normalized(f)) p.features[f] += nd(rng);
            pts.push_back(p);
        }
    return Dataset(pts);
}

ClusterModel fixed_model(int k, const std::vector<int>& assignment) {
    ClusterModel m;
    m.k = k;
    for (std::size_t i = 0; i < assignment.size(); ++i) m.grid_ids.push_back("g" + std::to_string(100 + i));
    m.assignment = assignment;
    m.centroids.assign(static_cast<std::size_t>(k), std::vector<double>(13, 0.0));
    return m;
}

}  // namespace

TEST(KMeans, CornersEachOwnCluster) {
    const auto m = kmeans(corners(), {4, 1, 100, 1e-9});
    std::set<int> used(m.assignment.begin(), m.assignment.end());
    EXPECT_EQ(used.size(), 4u);
    EXPECT_NEAR(m.inertia, 0.0, 1e-12);
}

TEST(KMeans, TwoBlobsRecovered) {
    const auto d = blobs(5);
    const auto m = kmeans(d, {2, 9, 100, 1e-9});
    for (std::size_t i = 0; i < m.grid_ids.size(); ++i) {
        const bool first = m.grid_ids[i].starts_with("b0");
        EXPECT_EQ(m.assignment[i], m.assignment[first ? 0 : m.grid_ids.size() - 1]);
    }
    EXPECT_NE(m.assignment.front(), m.assignment.back());
}

TEST(KMeans, AssignmentMatchesNearestCentroidOracle) {
    const auto& d = *fixture::small_dataset();
    const auto m = kmeans(d, {40, 3, 100, 1e-6});
    const auto cells = cells_of(d);
    ASSERT_EQ(cells.size(), m.grid_ids.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        EXPECT_EQ(m.assignment[i], oracle::nearest_centroid(m.embedding(cells[i].features), m.centroids));
        ++total;
    }
    auto sizes = m.cluster_sizes();
    EXPECT_EQ(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}), total);
    for (auto s : sizes) EXPECT_GT(s, 0u);
}

TEST(KMeans, InertiaNonIncreasingAndDeterministic) {
    const auto& d = *fixture::small_dataset();
    const auto a = kmeans(d, {50, 8, 100, 1e-6});
    for (std::size_t i = 1; i < a.inertia_history.size(); ++i)
        EXPECT_LE(a.inertia_history[i], a.inertia_history[i - 1] * (1 + 1e-12));
    const auto b = kmeans(d, {50, 8, 100, 1e-6});
    EXPECT_EQ(a.assignment, b.assignment);
    EXPECT_EQ(a.centroids, b.centroids);
}

TEST(KMeans, ParameterChecks) {
    EXPECT_THROW((void)kmeans(corners(), {0, 1, 10, 0}), ParameterError);
    EXPECT_THROW((void)kmeans(corners(), {5, 1, 10, 0}), ParameterError);
}

TEST(KMeans, OneRowPerCellAcrossSeasons) {
    std::vector<DataPoint> pts = {fixture::point("a", "2015", Label::Positive, 0.2),
                                  fixture::point("a", "2016", Label::Negative, 0.4),
                                  fixture::point("b", kAnySeason, Label::Unlabeled, 0.9)};
    const auto cells = cells_of(Dataset(pts));
    ASSERT_EQ(cells.size(), 2u);
    EXPECT_NEAR(cells[0].features[PatrolLengthPrev], 0.3, 1e-12);
}

TEST(KMeans, ClusterModelRoundTrip) {
    const auto m = kmeans(corners(), {2, 4, 100, 1e-9});
    const auto back = parse_cluster_model(emit_cluster_model(m));
    EXPECT_EQ(back.assignment, m.assignment);
    EXPECT_EQ(back.centroids, m.centroids);
    EXPECT_THROW((void)parse_cluster_model("{}"), FormatError);
}

TEST(Questionnaire, OneRowPerClusterWithBlankScore) {
    const auto& d = *fixture::small_dataset();
    const auto m40 = kmeans(d, {40, 1, 100, 1e-6});
    const auto m50 = kmeans(d, {50, 2, 100, 1e-6});
    const auto q40 = csv::lines(emit_questionnaire(m40, d, fixture::small_world().scaler));
    const auto q50 = csv::lines(emit_questionnaire(m50, d));
    EXPECT_EQ(q40.size() - 1 + q50.size() - 1, 90u);
    const auto head = csv::split(q40.front());
    EXPECT_EQ(head.size(), 2 + kNumFeatures + 2);
    EXPECT_EQ(head.back(), "score");
    for (std::size_t r = 1; r < q40.size(); ++r) {
        const auto cells = csv::split(q40[r]);
        EXPECT_EQ(cells.back(), "");
        EXPECT_LE(csv::split(cells[cells.size() - 2], ';').size(), 5u);
    }
}

TEST(Questionnaire, SingleClusterCountsAllCells) {
    std::vector<DataPoint> pts;
    for (int i = 0; i < 10; ++i)
        pts.push_back(fixture::point("c" + std::to_string(i), kAnySeason, Label::Unlabeled, 0.05 * i));
    const Dataset d(pts);
    const auto q = csv::lines(emit_questionnaire(kmeans(d, {1, 0, 10, 0}), d));
    ASSERT_EQ(q.size(), 2u);
    EXPECT_EQ(csv::split(q[1])[1], "10");
}

TEST(Scores, CompleteSheetAccepted) {
    const auto m = fixed_model(40, std::vector<int>(40, 0));
    std::string text = "cluster_id,score\n";
    for (int c = 0; c < 40; ++c) text += std::to_string(c) + ",5\n";
    const auto s = parse_scores(text, m);
    EXPECT_EQ(s.scores, std::vector<int>(40, 5));
    EXPECT_EQ(parse_scores(emit_scores(s), m).scores, s.scores);
}

TEST(Scores, MissingClusterNamed) {
    const auto m = fixed_model(40, std::vector<int>(40, 0));
    std::string text = "cluster_id,score\n";
    for (int c = 0; c < 40; ++c)
        if (c != 17) text += std::to_string(c) + ",5\n";
    try {
        (void)parse_scores(text, m);
        FAIL();
    } catch (const CompletenessError& e) {
        EXPECT_NE(std::string(e.what()).find("17"), std::string::npos);
    }
}

TEST(Scores, OutOfRangeAndMalformed) {
    const auto m = fixed_model(4, {0, 1, 2, 3});
    EXPECT_THROW((void)parse_scores("cluster_id,score\n0,1\n1,1\n2,1\n3,11\n", m), RangeError);
    EXPECT_THROW((void)parse_scores("cluster_id,score\n0,1\n1,1\n2,1\n9,1\n", m), FormatError);
    EXPECT_THROW((void)parse_scores("cluster_id,score\n0,1\n0,2\n1,1\n2,1\n3,1\n", m), FormatError);
    EXPECT_THROW((void)parse_scores("id,score\n", m), SchemaError);
}

TEST(Aggregate, ExhaustiveMinOverAllPairs) {
    std::vector<int> a1, a2;
    for (int i = 0; i < 100; ++i) a1.push_back(i / 10), a2.push_back(i % 10);
    const auto m1 = fixed_model(10, a1), m2 = fixed_model(10, a2);
    ScoreSheet s1{10, {}}, s2{10, {}};
    for (int v = 1; v <= 10; ++v) s1.scores.push_back(v), s2.scores.push_back(v);
    const auto agg = aggregate(m1, s1, m2, s2);
    ASSERT_EQ(agg.scores.size(), 100u);
    for (std::size_t i = 0; i < 100; ++i) {
        EXPECT_EQ(agg.scores[i], std::min(agg.first[i], agg.second[i]));
        EXPECT_LE(agg.scores[i], agg.first[i]);
        EXPECT_LE(agg.scores[i], agg.second[i]);
    }
    const auto h = agg.disagreement();
    EXPECT_EQ(h[0], 10u);
    EXPECT_EQ(h[9], 2u);
    const auto back = parse_aggregated_csv(emit_aggregated_csv(agg));
    EXPECT_EQ(back.scores, agg.scores);
}

TEST(Aggregate, PointExamples) {
    const auto m = fixed_model(1, {0});
    EXPECT_EQ(aggregate(m, {1, {7}}, m, {1, {4}}).scores[0], 4);
    EXPECT_EQ(aggregate(m, {1, {9}}, m, {1, {9}}).scores[0], 9);
}

TEST(Aggregate, CoverageMismatchListsCells) {
    auto m1 = fixed_model(1, {0, 0});
    auto m2 = fixed_model(1, {0, 0});
    m2.grid_ids[1] = "zzz";
    try {
        (void)aggregate(m1, {1, {3}}, m2, {1, {3}});
        FAIL();
    } catch (const CoverageError& e) {
        EXPECT_NE(std::string(e.what()).find("zzz"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("g101"), std::string::npos);
    }
}

TEST(Aggregate, FileRejectsNonMinScore) {
    EXPECT_THROW((void)parse_aggregated_csv("grid_id,s1,s2,score\na,3,4,4\n"), FormatError);
}

TEST(SimulatedExpert, ScoresSpanOneToTenAndFollowThreat) {
    const auto& w = fixture::small_world();
    const auto m = kmeans(w.dataset, {40, 1, 100, 1e-6});
    const auto s = simulate_scores(m, w.truth.cell_threat);
    EXPECT_EQ(*std::min_element(s.scores.begin(), s.scores.end()), 1);
    EXPECT_EQ(*std::max_element(s.scores.begin(), s.scores.end()), 10);
    std::vector<double> mean(40, 0), n(40, 0);
    for (std::size_t i = 0; i < m.grid_ids.size(); ++i) {
        mean[static_cast<std::size_t>(m.assignment[i])] += w.truth.cell_threat.at(m.grid_ids[i]);
        n[static_cast<std::size_t>(m.assignment[i])] += 1;
    }
    for (int a = 0; a < 40; ++a)
        for (int b = 0; b < 40; ++b)
            if (mean[static_cast<std::size_t>(a)] / n[static_cast<std::size_t>(a)] <
                mean[static_cast<std::size_t>(b)] / n[static_cast<std::size_t>(b)]) {
                EXPECT_LE(s.score(a), s.score(b));
            }
}
