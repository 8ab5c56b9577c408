#ifndef POACHPRED_ELICITATION_HPP
#define POACHPRED_ELICITATION_HPP

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "dataset.hpp"
#include "json.hpp"

namespace poach {

// One row per grid cell. Clustering and expert scores work per cell, so
// season-specific rows are folded together (patrol_length_prev averaged).
struct Cell {
    std::string grid_id;
    FeatureVector features{};
};

[[nodiscard]] inline std::vector<Cell> cells_of(const Dataset& d) {
    std::map<std::string, std::pair<FeatureVector, int>> acc;
    for (const auto& p : d.points()) {
        auto [it, fresh] = acc.try_emplace(p.grid_id, p.features, 1);
        if (fresh) continue;
        auto& [sum, n] = it->second;
        for (std::size_t f = 0; f < kNumFeatures; ++f)
            if (is_normalized(f)) sum[f] += p.features[f];
        ++n;
    }
    std::vector<Cell> cells;
    cells.reserve(acc.size());
    for (auto& [grid, sn] : acc) {
        auto [sum, n] = sn;
        for (std::size_t f = 0; f < kNumFeatures; ++f)
            if (is_normalized(f)) sum[f] /= n;
        cells.push_back({grid, sum});
    }
    return cells;
}

// Feature space used for clustering: the 13 scalar features followed by a
// one-hot block for land_type.
struct Embedding {
    std::vector<int> categories;

    [[nodiscard]] std::size_t dims() const { return kNumFeatures - 1 + categories.size(); }

    [[nodiscard]] std::vector<double> operator()(const FeatureVector& x) const {
        std::vector<double> out;
        out.reserve(dims());
        for (std::size_t f = 0; f < kNumFeatures; ++f)
            if (is_normalized(f)) out.push_back(x[f]);
        for (int c : categories) out.push_back(static_cast<int>(x[LandType]) == c ? 1.0 : 0.0);
        return out;
    }

    [[nodiscard]] FeatureVector feature_vector(const std::vector<double>& e) const {
        FeatureVector x{};
        std::size_t j = 0;
        for (std::size_t f = 0; f < kNumFeatures; ++f)
            if (is_normalized(f)) x[f] = e[j++];
        double best = -1;
        for (std::size_t c = 0; c < categories.size(); ++c)
            if (e[j + c] > best) best = e[j + c], x[LandType] = categories[c];
        return x;
    }
};

[[nodiscard]] inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

struct KMeansParams {
    int k = 40;
    std::uint64_t seed = 0;
    int max_iter = 100;
    double tol = 1e-6;
};

struct ClusterModel {
    int k = 0;
    std::uint64_t seed = 0;
    Embedding embedding;
    std::vector<std::string> grid_ids;          // sorted
    std::vector<int> assignment;                // aligned with grid_ids
    std::vector<std::vector<double>> centroids;  // embedding space
    double inertia = 0;
    std::vector<double> inertia_history;  // after each assignment step
    int iterations = 0;

    [[nodiscard]] std::optional<int> cluster_of(const std::string& grid) const {
        auto it = std::lower_bound(grid_ids.begin(), grid_ids.end(), grid);
        if (it == grid_ids.end() || *it != grid) return std::nullopt;
        return assignment[static_cast<std::size_t>(it - grid_ids.begin())];
    }

    [[nodiscard]] std::vector<std::size_t> cluster_sizes() const {
        std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
        for (int a : assignment) ++sizes[static_cast<std::size_t>(a)];
        return sizes;
    }

    // Centroid as a feature row; land_type is the dominant category.
    [[nodiscard]] FeatureVector centroid_features(int cluster) const {
        return embedding.feature_vector(centroids[static_cast<std::size_t>(cluster)]);
    }

    [[nodiscard]] std::string source_id() const {
        return "kmeans(k=" + std::to_string(k) + ",seed=" + std::to_string(seed) + ")";
    }
};

namespace detail {

inline std::pair<int, double> nearest_centroid(const std::vector<double>& x,
                                               const std::vector<std::vector<double>>& centroids) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = squared_distance(x, centroids[c]);
        if (d < best_d) best_d = d, best = static_cast<int>(c);
    }
    return {best, best_d};
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding over per-cell feature rows.
// Empty clusters are re-seeded at the point farthest from its centroid so
// k stays fixed.
[[nodiscard]] inline ClusterModel kmeans(const Dataset& d, const KMeansParams& params) {
    if (params.k < 1) throw ParameterError("k must be >= 1");
    if (params.max_iter < 1) throw ParameterError("max_iter must be >= 1");
    if (!(params.tol >= 0)) throw ParameterError("tol must be non-negative");

    const auto cells = cells_of(d);
    ClusterModel m;
    m.k = params.k;
    m.seed = params.seed;
    std::set<int> cats;
    for (const auto& c : cells) cats.insert(static_cast<int>(c.features[LandType]));
    m.embedding.categories.assign(cats.begin(), cats.end());

    std::vector<std::vector<double>> x;
    x.reserve(cells.size());
    for (const auto& c : cells) {
        m.grid_ids.push_back(c.grid_id);
        x.push_back(m.embedding(c.features));
    }
    const std::size_t distinct = std::set<std::vector<double>>(x.begin(), x.end()).size();
    const auto k = static_cast<std::size_t>(params.k);
    if (k > distinct)
        throw ParameterError("k = " + std::to_string(k) + " exceeds the " + std::to_string(distinct) +
                             " distinct cells");

    std::mt19937_64 rng(derive_seed({params.seed, 0xc1u}));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const std::size_t n = x.size();

    // k-means++ seeding.
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::vector<bool> chosen(n, false);
    std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    m.centroids.push_back(x[first]);
    chosen[first] = true;
    while (m.centroids.size() < k) {
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(x[i], m.centroids.back()));
            total += d2[i];
        }
        std::size_t pick = n;
        if (total > 0) {
            double r = u01(rng) * total;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0) continue;
                pick = i;
                r -= d2[i];
                if (r <= 0) break;
            }
        }
        if (pick == n)  // all remaining mass is zero; unreachable when k <= distinct
            for (std::size_t i = 0; i < n && pick == n; ++i)
                if (!chosen[i]) pick = i;
        chosen[pick] = true;
        m.centroids.push_back(x[pick]);
    }

    m.assignment.assign(n, 0);
    std::vector<double> cost(n, 0);
    auto assign = [&] {
        double inertia = 0;
        for (std::size_t i = 0; i < n; ++i) {
            auto [c, dist] = detail::nearest_centroid(x[i], m.centroids);
            m.assignment[i] = c;
            cost[i] = dist;
            inertia += dist;
        }
        return inertia;
    };

    const std::size_t dims = m.embedding.dims();
    for (int iter = 0; iter < params.max_iter; ++iter) {
        m.inertia = assign();
        m.inertia_history.push_back(m.inertia);
        m.iterations = iter + 1;

        std::vector<std::vector<double>> next(k, std::vector<double>(dims, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(m.assignment[i]);
            ++counts[c];
            for (std::size_t j = 0; j < dims; ++j) next[c][j] += x[i][j];
        }
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c] > 0)
                for (auto& v : next[c]) v /= static_cast<double>(counts[c]);
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            std::size_t far = 0;
            double far_d = -1;
            for (std::size_t i = 0; i < n; ++i) {
                const auto own = static_cast<std::size_t>(m.assignment[i]);
                if (counts[own] <= 1) continue;
                const double dist = squared_distance(x[i], next[own]);
                if (dist > far_d) far_d = dist, far = i;
            }
            --counts[static_cast<std::size_t>(m.assignment[far])];
            m.assignment[far] = static_cast<int>(c);
            counts[c] = 1;
            next[c] = x[far];
        }
        double shift = 0;
        for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(squared_distance(next[c], m.centroids[c])));
        m.centroids = std::move(next);
        if (shift < params.tol) break;
    }
    m.inertia = assign();
    m.inertia_history.push_back(m.inertia);
    return m;
}

// ---------------------------------------------------------------------------
// Questionnaires and score sheets

// Questionnaire rows: cluster_id, cell_count, 14 centroid columns (raw units
// when a scaler is given), five example cells nearest the centroid, and an
// empty score column for the expert.
[[nodiscard]] inline std::string emit_questionnaire(const ClusterModel& cm, const Dataset& d,
                                                    const std::optional<Scaler>& scaler = std::nullopt,
                                                    std::size_t examples = 5) {
    const auto cells = cells_of(d);
    std::vector<std::vector<std::pair<double, std::string>>> near(static_cast<std::size_t>(cm.k));
    for (const auto& cell : cells) {
        auto c = cm.cluster_of(cell.grid_id);
        if (!c) throw CoverageError("cell '" + cell.grid_id + "' is not covered by " + cm.source_id());
        near[static_cast<std::size_t>(*c)].emplace_back(
            squared_distance(cm.embedding(cell.features), cm.centroids[static_cast<std::size_t>(*c)]), cell.grid_id);
    }
    const auto sizes = cm.cluster_sizes();
    std::string out = "cluster_id,cell_count";
    for (auto name : kFeatureNames) out += ',' + std::string(name);
    out += ",example_cells,score\n";
    for (int c = 0; c < cm.k; ++c) {
        auto& list = near[static_cast<std::size_t>(c)];
        std::sort(list.begin(), list.end());
        auto centroid = cm.centroid_features(c);
        if (scaler) centroid = scaler->invert(centroid);
        out += std::to_string(c) + ',' + std::to_string(sizes[static_cast<std::size_t>(c)]);
        for (std::size_t f = 0; f < kNumFeatures; ++f)
            out += ',' + (f == LandType ? std::to_string(static_cast<int>(centroid[f])) : csv::format_fixed(centroid[f], 4));
        out += ',';
        for (std::size_t e = 0; e < std::min(examples, list.size()); ++e) {
            if (e) out += ';';
            out += list[e].second;
        }
        out += ",\n";
    }
    return out;
}

struct ScoreSheet {
    int k = 0;
    std::vector<int> scores;  // index = cluster id, each in [1,10]

    [[nodiscard]] int score(int cluster) const { return scores.at(static_cast<std::size_t>(cluster)); }
};

inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 10;

// Accepts any CSV with cluster_id and score columns, including a filled-in
// questionnaire. Blank scores count as missing.
[[nodiscard]] inline ScoreSheet parse_scores(std::string_view text, const ClusterModel& cm) {
    auto rows = csv::lines(text);
    if (rows.empty()) throw SchemaError("empty score file");
    const auto header = csv::split(rows.front());
    auto col = [&](const char* name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError(std::string("missing column '") + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto c_id = col("cluster_id"), c_score = col("score");
    ScoreSheet sheet{cm.k, std::vector<int>(static_cast<std::size_t>(cm.k), 0)};
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto cells = csv::split(rows[r]);
        if (cells.size() != header.size())
            throw FormatError("score row " + std::to_string(r - 1) + " has " + std::to_string(cells.size()) +
                              " fields, expected " + std::to_string(header.size()));
        auto id = csv::parse_int(cells[c_id]);
        if (!id || *id < 0 || *id >= cm.k)
            throw FormatError("score row " + std::to_string(r - 1) + ": unknown cluster_id '" + cells[c_id] + "'");
        const auto& raw = cells[c_score];
        if (raw.empty()) continue;
        auto value = csv::parse_int(raw);
        if (!value) throw FormatError("cluster " + std::to_string(*id) + ": score '" + raw + "' is not an integer");
        if (*value < kMinScore || *value > kMaxScore)
            throw RangeError("cluster " + std::to_string(*id) + ": score " + raw + " outside [1,10]");
        auto& slot = sheet.scores[static_cast<std::size_t>(*id)];
        if (slot != 0) throw FormatError("cluster " + std::to_string(*id) + " scored more than once");
        slot = static_cast<int>(*value);
    }
    std::string missing;
    for (int c = 0; c < cm.k; ++c)
        if (sheet.scores[static_cast<std::size_t>(c)] == 0) missing += (missing.empty() ? "" : ", ") + std::to_string(c);
    if (!missing.empty()) throw CompletenessError("no score for cluster(s) " + missing);
    return sheet;
}

[[nodiscard]] inline ScoreSheet ingest_scores(const std::string& path, const ClusterModel& cm) {
    return parse_scores(csv::read_file(path), cm);
}

[[nodiscard]] inline std::string emit_scores(const ScoreSheet& s) {
    std::string out = "cluster_id,score\n";
    for (int c = 0; c < s.k; ++c) out += std::to_string(c) + ',' + std::to_string(s.score(c)) + '\n';
    return out;
}

// Stand-in expert: scores each cluster by its mean cell threat, rescaled
// linearly so the least threatened cluster gets 1 and the most gets 10.
[[nodiscard]] inline ScoreSheet simulate_scores(const ClusterModel& cm,
                                                const std::unordered_map<std::string, double>& cell_threat) {
    std::vector<double> sum(static_cast<std::size_t>(cm.k), 0.0);
    std::vector<double> n(static_cast<std::size_t>(cm.k), 0.0);
    for (std::size_t i = 0; i < cm.grid_ids.size(); ++i) {
        auto it = cell_threat.find(cm.grid_ids[i]);
        if (it == cell_threat.end()) throw CoverageError("no threat value for cell '" + cm.grid_ids[i] + "'");
        sum[static_cast<std::size_t>(cm.assignment[i])] += it->second;
        n[static_cast<std::size_t>(cm.assignment[i])] += 1.0;
    }
    std::vector<double> mean(sum.size());
    for (std::size_t c = 0; c < sum.size(); ++c) mean[c] = n[c] > 0 ? sum[c] / n[c] : 0.0;
    const auto [lo, hi] = std::minmax_element(mean.begin(), mean.end());
    ScoreSheet s{cm.k, {}};
    for (double v : mean)
        s.scores.push_back(*hi > *lo ? 1 + static_cast<int>(std::lround(9.0 * (v - *lo) / (*hi - *lo))) : 5);
    return s;
}

// ---------------------------------------------------------------------------
// Aggregation

struct AggregatedScoreMap {
    std::vector<std::string> grid_ids;  // sorted
    std::vector<int> first, second, scores;
    std::string source_first, source_second;

    [[nodiscard]] std::optional<int> score_of(const std::string& grid) const {
        auto it = std::lower_bound(grid_ids.begin(), grid_ids.end(), grid);
        if (it == grid_ids.end() || *it != grid) return std::nullopt;
        return scores[static_cast<std::size_t>(it - grid_ids.begin())];
    }

    // Histogram of |s1 - s2| over cells, index 0..9.
    [[nodiscard]] std::array<std::size_t, 10> disagreement() const {
        std::array<std::size_t, 10> h{};
        for (std::size_t i = 0; i < scores.size(); ++i) ++h[static_cast<std::size_t>(std::abs(first[i] - second[i]))];
        return h;
    }
};

[[nodiscard]] inline AggregatedScoreMap aggregate(const ClusterModel& m1, const ScoreSheet& s1,
                                                  const ClusterModel& m2, const ScoreSheet& s2) {
    if (s1.k != m1.k || s2.k != m2.k) throw ParameterError("score sheet does not match its cluster model");
    if (m1.grid_ids != m2.grid_ids) {
        std::vector<std::string> diff;
        std::set_symmetric_difference(m1.grid_ids.begin(), m1.grid_ids.end(), m2.grid_ids.begin(), m2.grid_ids.end(),
                                      std::back_inserter(diff));
        std::string listed;
        for (std::size_t i = 0; i < std::min<std::size_t>(diff.size(), 20); ++i) listed += (i ? ", " : "") + diff[i];
        if (diff.size() > 20) listed += ", ... (" + std::to_string(diff.size()) + " total)";
        throw CoverageError("cluster models cover different cells: " + listed);
    }
    AggregatedScoreMap out;
    out.grid_ids = m1.grid_ids;
    out.source_first = m1.source_id();
    out.source_second = m2.source_id();
    for (std::size_t i = 0; i < m1.grid_ids.size(); ++i) {
        const int a = s1.score(m1.assignment[i]);
        const int b = s2.score(m2.assignment[i]);
        out.first.push_back(a);
        out.second.push_back(b);
        out.scores.push_back(std::min(a, b));
    }
    return out;
}

[[nodiscard]] inline std::string emit_aggregated_csv(const AggregatedScoreMap& m) {
    std::string out = "grid_id,s1,s2,score\n";
    for (std::size_t i = 0; i < m.grid_ids.size(); ++i)
        out += m.grid_ids[i] + ',' + std::to_string(m.first[i]) + ',' + std::to_string(m.second[i]) + ',' +
               std::to_string(m.scores[i]) + '\n';
    return out;
}

[[nodiscard]] inline AggregatedScoreMap parse_aggregated_csv(std::string_view text) {
    auto rows = csv::lines(text);
    if (rows.empty() || csv::split(rows.front()) != std::vector<std::string>{"grid_id", "s1", "s2", "score"})
        throw SchemaError("aggregated score file must have header 'grid_id,s1,s2,score'");
    std::vector<std::tuple<std::string, int, int, int>> entries;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto cells = csv::split(rows[r]);
        if (cells.size() != 4) throw FormatError("aggregated row " + std::to_string(r - 1) + " is malformed");
        std::array<int, 3> v{};
        for (std::size_t j = 0; j < 3; ++j) {
            auto x = csv::parse_int(cells[j + 1]);
            if (!x) throw FormatError("aggregated row " + std::to_string(r - 1) + ": non-integer score");
            if (*x < kMinScore || *x > kMaxScore)
                throw RangeError("aggregated row " + std::to_string(r - 1) + ": score outside [1,10]");
            v[j] = static_cast<int>(*x);
        }
        if (v[2] != std::min(v[0], v[1]))
            throw FormatError("aggregated row " + std::to_string(r - 1) + ": score is not min(s1, s2)");
        entries.emplace_back(cells[0], v[0], v[1], v[2]);
    }
    std::sort(entries.begin(), entries.end());
    AggregatedScoreMap m;
    m.source_first = m.source_second = "file";
    for (auto& [g, a, b, s] : entries) {
        if (!m.grid_ids.empty() && m.grid_ids.back() == g) throw DuplicationError("grid '" + g + "' scored twice");
        m.grid_ids.push_back(g);
        m.first.push_back(a);
        m.second.push_back(b);
        m.scores.push_back(s);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Cluster model persistence (JSON)

[[nodiscard]] inline std::string emit_cluster_model(const ClusterModel& m) {
    nlohmann::json j;
    j["format"] = "poachpred-clusters";
    j["version"] = 1;
    j["k"] = m.k;
    j["seed"] = m.seed;
    j["categories"] = m.embedding.categories;
    j["grid_ids"] = m.grid_ids;
    j["assignment"] = m.assignment;
    j["centroids"] = m.centroids;
    j["inertia"] = m.inertia;
    j["inertia_history"] = m.inertia_history;
    j["iterations"] = m.iterations;
    return j.dump();
}

[[nodiscard]] inline ClusterModel parse_cluster_model(std::string_view text) {
    ClusterModel m;
    try {
        auto j = nlohmann::json::parse(text);
        if (j.at("format") != "poachpred-clusters" || j.at("version") != 1)
            throw FormatError("not a version-1 cluster model file");
        j.at("k").get_to(m.k);
        j.at("seed").get_to(m.seed);
        j.at("categories").get_to(m.embedding.categories);
        j.at("grid_ids").get_to(m.grid_ids);
        j.at("assignment").get_to(m.assignment);
        j.at("centroids").get_to(m.centroids);
        j.at("inertia").get_to(m.inertia);
        j.at("inertia_history").get_to(m.inertia_history);
        j.at("iterations").get_to(m.iterations);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed cluster model: ") + e.what());
    }
    if (m.k < 1 || m.assignment.size() != m.grid_ids.size() || m.centroids.size() != static_cast<std::size_t>(m.k) ||
        !std::is_sorted(m.grid_ids.begin(), m.grid_ids.end()))
        throw FormatError("inconsistent cluster model");
    for (int a : m.assignment)
        if (a < 0 || a >= m.k) throw FormatError("cluster model assignment out of range");
    return m;
}

}  // namespace poach

#endif  // POACHPRED_ELICITATION_HPP
