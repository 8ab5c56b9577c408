#ifndef POACHPRED_SYNTHETIC_HPP
#define POACHPRED_SYNTHETIC_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "dataset.hpp"

namespace poach {

// Desk-scale stand-in for a reserve: a km grid with villages, patrol posts,
// water and road networks, a smooth elevation surface and a patrol history.
// Positives are planted by a hidden logistic threat over dist_village,
// dist_patrol_post, elevation and slope.
struct SyntheticConfig {
    int seasons = 4;
    int first_season_year = 2014;
    long positives_per_season = 30;
    long negatives_per_season = 9300;
    long unlabeled_cells = 44500;
    // Fraction of true poaching in patrolled cells that rangers record.
    double detection_rate = 0.6;
    // Size of the patrollable region relative to the cells patrolled per season.
    double core_ratio = 2.0;
    int villages = 14;
    int patrol_posts = 6;
    int marshes = 10;
    int streams = 18;
    int rivers = 3;
    // Ceiling on a cell's per-season poaching probability: even the worst cell
    // is not hit every season.
    double max_threat = 0.4;
    // Logistic weights on rank-transformed features; positive weight = threat rises with the feature.
    double w_dist_village = 2.4;
    double w_dist_patrol_post = 2.0;
    double w_elevation = 1.6;
    double w_slope = 1.2;
    // Weight of believed threat against access when rangers pick where to patrol.
    double patrol_focus = 0.5;

    friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

struct TruthRow {
    std::string grid_id;
    std::string season;
    bool true_label = false;
};

struct GroundTruth {
    std::vector<TruthRow> rows;
    // Season-independent poaching probability of each cell.
    std::unordered_map<std::string, double> cell_threat;
};

struct SyntheticResult {
    Dataset dataset;
    Scaler scaler;
    GroundTruth truth;
};

[[nodiscard]] inline std::string season_name(int year) {
    return std::to_string(year) + "-" + std::to_string(year + 1);
}

[[nodiscard]] inline std::string grid_name(std::size_t cell) {
    std::string digits = std::to_string(cell);
    return "g" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
}

namespace detail {

struct Vec2 {
    double x = 0, y = 0;
};

struct Segment {
    Vec2 a, b;
};

[[nodiscard]] inline double distance_to_segment(Vec2 p, const Segment& s) {
    const double dx = s.b.x - s.a.x, dy = s.b.y - s.a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((p.x - s.a.x) * dx + (p.y - s.a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = s.a.x + t * dx - p.x, ey = s.a.y + t * dy - p.y;
    return std::sqrt(ex * ex + ey * ey);
}

[[nodiscard]] inline double nearest(Vec2 p, const std::vector<Segment>& segments) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : segments) best = std::min(best, distance_to_segment(p, s));
    return best;
}

// A meandering polyline from one edge of the map across to the other.
inline std::vector<Segment> random_polyline(std::mt19937_64& rng, double width, double height, int pieces,
                                            double wiggle) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const bool horizontal = u(rng) < 0.5;
    std::vector<Segment> out;
    Vec2 prev = horizontal ? Vec2{0.0, u(rng) * height} : Vec2{u(rng) * width, 0.0};
    for (int i = 1; i <= pieces; ++i) {
        const double t = static_cast<double>(i) / pieces;
        Vec2 next = horizontal ? Vec2{t * width, prev.y + (u(rng) - 0.5) * wiggle}
                               : Vec2{prev.x + (u(rng) - 0.5) * wiggle, t * height};
        next.x = std::clamp(next.x, 0.0, width);
        next.y = std::clamp(next.y, 0.0, height);
        out.push_back({prev, next});
        prev = next;
    }
    return out;
}

inline std::vector<Segment> as_points(const std::vector<Vec2>& pts) {
    std::vector<Segment> out;
    for (auto p : pts) out.push_back({p, p});
    return out;
}

// Weighted sampling without replacement (exponential keys). Returns indices
// in ascending order.
inline std::vector<std::size_t> weighted_sample(std::mt19937_64& rng, const std::vector<std::size_t>& items,
                                                const std::vector<double>& weights, std::size_t count) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::pair<double, std::size_t>> keyed;
    keyed.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        const double r = std::max(u(rng), 1e-300);
        keyed.emplace_back(std::log(r) / weights[i], items[i]);
    }
    count = std::min(count, keyed.size());
    std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(count), keyed.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    std::vector<std::size_t> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(keyed[i].second);
    std::sort(out.begin(), out.end());
    return out;
}

[[nodiscard]] inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// logit of each cell's mid-rank quantile in one feature; tied values share a rank.
[[nodiscard]] inline std::vector<double> logistic_scores(const std::vector<FeatureVector>& cells, std::size_t feature) {
    const std::size_t n = cells.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cells[a][feature] < cells[b][feature]; });
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && cells[order[j]][feature] == cells[order[i]][feature]) ++j;
        const double u = (0.5 * static_cast<double>(i + j)) / static_cast<double>(n);
        for (std::size_t k = i; k < j; ++k) out[order[k]] = std::log(u / (1.0 - u));
        i = j;
    }
    return out;
}

}  // namespace detail

inline void validate(const SyntheticConfig& c) {
    if (c.positives_per_season <= 0) throw ConfigError("positives_per_season must be positive");
    if (c.negatives_per_season < 0) throw ConfigError("negatives_per_season must be non-negative");
    if (c.unlabeled_cells < 0) throw ConfigError("unlabeled_cells must be non-negative");
    if (c.seasons < 1) throw ConfigError("seasons must be at least 1");
    if (!(c.detection_rate > 0.0 && c.detection_rate <= 1.0)) throw ConfigError("detection_rate must be in (0,1]");
    if (!(c.core_ratio >= 1.0)) throw ConfigError("core_ratio must be >= 1");
    if (!(c.patrol_focus >= 0.0)) throw ConfigError("patrol_focus must be non-negative");
    if (!(c.max_threat > 0.0 && c.max_threat <= 1.0)) throw ConfigError("max_threat must be in (0,1]");
    if (c.villages < 1 || c.patrol_posts < 1 || c.marshes < 1 || c.streams < 1 || c.rivers < 1)
        throw ConfigError("landscape feature counts must be positive");
    const double labeled = static_cast<double>(c.positives_per_season + c.negatives_per_season);
    if (static_cast<double>(c.positives_per_season) / c.detection_rate > c.max_threat * labeled)
        throw ConfigError("infeasible config: " + std::to_string(c.positives_per_season) +
                          " positives per season need more true poaching cells than the " +
                          std::to_string(static_cast<long>(labeled)) + " cells patrolled");
}

// Pure function of (config, seed).
[[nodiscard]] inline SyntheticResult generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
    using namespace detail;
    validate(config);
    std::mt19937_64 rng(derive_seed({seed, 0x5e7}));
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    const auto labeled_per_season = static_cast<std::size_t>(config.positives_per_season + config.negatives_per_season);
    const auto core = static_cast<std::size_t>(std::ceil(config.core_ratio * static_cast<double>(labeled_per_season)));
    const std::size_t n_cells = core + static_cast<std::size_t>(config.unlabeled_cells);
    const auto width_cells = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_cells) * 1.3)));
    const double width = static_cast<double>(width_cells);
    const double height = std::ceil(static_cast<double>(n_cells) / width);

    auto random_point = [&] { return Vec2{u01(rng) * width, u01(rng) * height}; };

    std::vector<Vec2> villages, posts, marshes;
    for (int i = 0; i < config.villages; ++i) villages.push_back(random_point());
    // Patrol posts sit near villages, as stations usually do.
    for (int i = 0; i < config.patrol_posts; ++i) {
        const auto& v = villages[static_cast<std::size_t>(i) % villages.size()];
        posts.push_back({std::clamp(v.x + (u01(rng) - 0.5) * 6.0, 0.0, width),
                         std::clamp(v.y + (u01(rng) - 0.5) * 6.0, 0.0, height)});
    }
    for (int i = 0; i < config.marshes; ++i) marshes.push_back(random_point());

    std::vector<Segment> streams;
    for (int i = 0; i < config.streams; ++i) {
        Vec2 p = random_point();
        const double angle = u01(rng) * 2.0 * 3.141592653589793;
        for (int k = 0; k < 4; ++k) {
            const double a = angle + (u01(rng) - 0.5);
            Vec2 q{std::clamp(p.x + 3.0 * std::cos(a), 0.0, width), std::clamp(p.y + 3.0 * std::sin(a), 0.0, height)};
            streams.push_back({p, q});
            p = q;
        }
    }
    std::vector<Segment> rivers;
    for (int i = 0; i < config.rivers; ++i) {
        auto line = random_polyline(rng, width, height, 12, 0.15 * std::min(width, height));
        rivers.insert(rivers.end(), line.begin(), line.end());
    }
    std::vector<Segment> village_roads;
    for (std::size_t i = 0; i < villages.size(); ++i) {
        std::size_t best = i;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < villages.size(); ++j) {
            if (j == i) continue;
            const double d = std::hypot(villages[i].x - villages[j].x, villages[i].y - villages[j].y);
            if (d < best_d) best_d = d, best = j;
        }
        village_roads.push_back({villages[i], villages[best]});
    }
    const auto provincial = random_polyline(rng, width, height, 8, 0.1 * std::min(width, height));
    const auto provincial2 = random_polyline(rng, width, height, 8, 0.1 * std::min(width, height));
    std::vector<Segment> provincial_roads = provincial;
    provincial_roads.insert(provincial_roads.end(), provincial2.begin(), provincial2.end());
    const auto national = random_polyline(rng, width, height, 6, 0.05 * std::min(width, height));
    // The highway passes outside the reserve along one side.
    const std::vector<Segment> highway = {{{-8.0, -6.0}, {width + 8.0, -10.0}}};

    struct Bump {
        Vec2 c;
        double height, radius;
    };
    std::vector<Bump> bumps;
    for (int i = 0; i < 7; ++i)
        bumps.push_back({random_point(), 250.0 + 500.0 * u01(rng), 0.08 * width + 0.2 * width * u01(rng)});
    auto elevation_at = [&](double x, double y) {
        double e = 300.0 + 0.8 * x;
        for (const auto& b : bumps) {
            const double dx = x - b.c.x, dy = y - b.c.y;
            e += b.height * std::exp(-(dx * dx + dy * dy) / (2 * b.radius * b.radius));
        }
        return e;
    };

    // Season-independent raw features.
    std::vector<FeatureVector> cell_raw(n_cells);
    const auto village_pts = as_points(villages), post_pts = as_points(posts), marsh_pts = as_points(marshes);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t c = 0; c < n_cells; ++c) {
        const Vec2 p{static_cast<double>(c % width_cells) + 0.5, static_cast<double>(c / width_cells) + 0.5};
        auto& f = cell_raw[c];
        f[DistStream] = nearest(p, streams);
        f[DistVillage] = nearest(p, village_pts);
        f[DistPatrolPost] = nearest(p, post_pts);
        f[DistRiver] = nearest(p, rivers);
        f[DistMarsh] = nearest(p, marsh_pts);
        f[DistVillageRoad] = nearest(p, village_roads);
        f[DistProvincialRoad] = nearest(p, provincial_roads);
        f[DistNationalRoad] = nearest(p, national);
        f[DistHighway] = nearest(p, highway);
        f[DistBoundary] = std::min({p.x, p.y, width - p.x, height - p.y});
        const double e = elevation_at(p.x, p.y);
        f[Elevation] = e;
        const double h = 0.05;
        const double gx = (elevation_at(p.x + h, p.y) - elevation_at(p.x - h, p.y)) / (2 * h);
        const double gy = (elevation_at(p.x, p.y + h) - elevation_at(p.x, p.y - h)) / (2 * h);
        f[Slope] = std::atan(std::hypot(gx, gy) / 1000.0) * 180.0 / 3.141592653589793;
        f[PatrolLengthPrev] = 0.0;
        f[LandType] = 0.0;
    }
    // Land type by elevation band, with some farmland near villages and wetland near marshes.
    {
        std::vector<double> elev;
        for (const auto& f : cell_raw) elev.push_back(f[Elevation]);
        std::sort(elev.begin(), elev.end());
        const double q1 = elev[elev.size() / 3], q2 = elev[2 * elev.size() / 3];
        for (auto& f : cell_raw) {
            int lt = f[Elevation] < q1 ? 2 : (f[Elevation] < q2 ? 1 : 3);
            if (f[DistVillage] < 1.5) lt = 4;
            if (f[DistMarsh] < 1.0) lt = 5;
            if (u01(rng) < 0.05) lt = 1 + static_cast<int>(u01(rng) * 5.0) % 5;
            f[LandType] = lt;
        }
    }

    // Hidden threat: logistic in z-scored features. Min-max scaling is affine
    // per column, so z-scores of raw and normalized values coincide.
    const std::array<std::pair<Feature, double>, 4> drivers = {{{DistVillage, config.w_dist_village},
                                                                {DistPatrolPost, config.w_dist_patrol_post},
                                                                {Elevation, config.w_elevation},
                                                                {Slope, config.w_slope}}};
    auto zscores = [&](auto value_of) {
        std::vector<double> z(n_cells);
        double mean = 0, sq = 0;
        for (std::size_t c = 0; c < n_cells; ++c) mean += z[c] = value_of(c);
        mean /= static_cast<double>(n_cells);
        for (double v : z) sq += (v - mean) * (v - mean);
        const double sd = std::sqrt(sq / static_cast<double>(n_cells));
        for (auto& v : z) v = sd > 0 ? (v - mean) / sd : 0.0;
        return z;
    };
    std::vector<double> score(n_cells, 0.0);
    double weight_norm = 0;
    for (auto [feature, weight] : drivers) {
        const auto q = logistic_scores(cell_raw, feature);
        const auto z = zscores([&](std::size_t c) { return q[c]; });
        for (std::size_t c = 0; c < n_cells; ++c) score[c] += weight * z[c];
        weight_norm += weight * weight;
    }
    // Distance distributions differ in skew from layout to layout, and drivers
    // are correlated by different amounts. Rank-transforming each driver and
    // fixing the combined spread at the weight norm keeps the threat surface
    // equally sharp across seeds.
    {
        const auto z = zscores([&](std::size_t c) { return score[c]; });
        for (std::size_t c = 0; c < n_cells; ++c) score[c] = std::sqrt(weight_norm) * z[c];
    }

    // The patrollable core: rangers favour cells they believe are threatened
    // but are held back by access, so never-patrolled cells skew low-threat.
    const auto access = zscores([&](std::size_t c) {
        return cell_raw[c][DistPatrolPost] + 0.3 * cell_raw[c][DistVillageRoad];
    });
    std::vector<double> preference(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c)
        preference[c] = config.patrol_focus * score[c] - access[c] + 0.5 * noise(rng);
    std::vector<std::size_t> order(n_cells);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return preference[a] > preference[b]; });
    std::vector<std::size_t> core_cells(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(core));
    std::sort(core_cells.begin(), core_cells.end());
    std::vector<double> patrol_weight;
    for (auto c : core_cells) patrol_weight.push_back(std::exp(-cell_raw[c][DistPatrolPost] / 4.0) + 0.2);

    // Season 0 precedes the dataset and only feeds patrol_length_prev.
    const auto n_seasons = static_cast<std::size_t>(config.seasons);
    std::vector<std::vector<std::size_t>> patrolled(n_seasons + 1);
    std::vector<std::vector<double>> patrol_len(n_seasons + 1, std::vector<double>(n_cells, 0.0));
    std::exponential_distribution<double> len_dist(1.0 / 1.5);
    std::vector<bool> ever_patrolled(n_cells, false);
    for (std::size_t s = 0; s <= n_seasons; ++s) {
        patrolled[s] = weighted_sample(rng, core_cells, patrol_weight, labeled_per_season);
        for (auto c : patrolled[s]) {
            patrol_len[s][c] = 0.2 + len_dist(rng);
            if (s > 0) ever_patrolled[c] = true;
        }
    }

    // Raw rows: labeled rows per season, then one row per never-patrolled cell.
    struct RowRef {
        std::size_t cell;
        std::size_t season;  // 1-based; 0 marks an unlabeled row
    };
    std::vector<RowRef> refs;
    std::vector<DataPoint> raw_points;
    for (std::size_t s = 1; s <= n_seasons; ++s)
        for (auto c : patrolled[s]) {
            DataPoint p;
            p.grid_id = grid_name(c);
            p.season = season_name(config.first_season_year + static_cast<int>(s) - 1);
            p.features = cell_raw[c];
            p.features[PatrolLengthPrev] = patrol_len[s - 1][c];
            p.label = Label::Negative;
            raw_points.push_back(std::move(p));
            refs.push_back({c, s});
        }
    for (std::size_t c = 0; c < n_cells; ++c) {
        if (ever_patrolled[c]) continue;
        DataPoint p;
        p.grid_id = grid_name(c);
        p.season = kAnySeason;
        p.features = cell_raw[c];
        p.label = Label::Unlabeled;
        raw_points.push_back(std::move(p));
        refs.push_back({c, 0});
    }

    auto normalized = normalize(Dataset(raw_points, "raw"));
    const Scaler scaler = normalized.scaler;

    // Intercept so that the expected true poaching count in patrolled cells
    // matches positives / detection_rate.
    const double target = static_cast<double>(config.positives_per_season) * static_cast<double>(n_seasons) /
                          config.detection_rate;
    auto expected = [&](double intercept) {
        double sum = 0;
        for (std::size_t s = 1; s <= n_seasons; ++s)
            for (auto c : patrolled[s]) sum += config.max_threat * sigmoid(intercept + score[c]);
        return sum;
    };
    double lo = -60.0, hi = 60.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (expected(mid) < target ? lo : hi) = mid;
    }
    const double intercept = 0.5 * (lo + hi);

    GroundTruth truth;
    auto threat_of = [&](std::size_t c) { return config.max_threat * sigmoid(intercept + score[c]); };
    for (std::size_t c = 0; c < n_cells; ++c) truth.cell_threat[grid_name(c)] = threat_of(c);

    std::vector<DataPoint> points(normalized.data.points().begin(), normalized.data.points().end());
    std::vector<bool> is_true(points.size(), false);
    for (std::size_t i = 0; i < points.size(); ++i) is_true[i] = u01(rng) < threat_of(refs[i].cell);

    // Exactly positives_per_season recorded detections among each season's true cells.
    const auto want = static_cast<std::size_t>(config.positives_per_season);
    for (std::size_t s = 1; s <= n_seasons; ++s) {
        std::vector<std::size_t> rows, true_rows;
        for (std::size_t i = 0; i < points.size(); ++i)
            if (refs[i].season == s) {
                rows.push_back(i);
                if (is_true[i]) true_rows.push_back(i);
            }
        if (true_rows.size() < want) {
            // Shortfall: promote the highest-threat patrolled cells.
            std::vector<std::size_t> rest;
            for (auto i : rows)
                if (!is_true[i]) rest.push_back(i);
            std::stable_sort(rest.begin(), rest.end(),
                             [&](std::size_t a, std::size_t b) { return score[refs[a].cell] > score[refs[b].cell]; });
            for (std::size_t k = 0; true_rows.size() < want && k < rest.size(); ++k) {
                is_true[rest[k]] = true;
                true_rows.push_back(rest[k]);
            }
            std::sort(true_rows.begin(), true_rows.end());
        }
        std::shuffle(true_rows.begin(), true_rows.end(), rng);
        for (std::size_t k = 0; k < want; ++k) points[true_rows[k]].label = Label::Positive;
    }
    for (std::size_t i = 0; i < points.size(); ++i)
        truth.rows.push_back({points[i].grid_id, points[i].season, static_cast<bool>(is_true[i])});

    return {Dataset(std::move(points)), scaler, std::move(truth)};
}

[[nodiscard]] inline std::string emit_truth_csv(const GroundTruth& t) {
    std::string out = "grid_id,season,true_label\n";
    for (const auto& r : t.rows) out += r.grid_id + ',' + r.season + ',' + (r.true_label ? "1" : "0") + '\n';
    return out;
}

[[nodiscard]] inline GroundTruth parse_truth_csv(std::string_view text) {
    auto rows = csv::lines(text);
    if (rows.empty() || csv::split(rows.front()) != std::vector<std::string>{"grid_id", "season", "true_label"})
        throw SchemaError("ground-truth file must have header 'grid_id,season,true_label'");
    GroundTruth t;
    std::unordered_map<std::string, std::pair<double, double>> tally;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto cells = csv::split(rows[r]);
        if (cells.size() != 3 || (cells[2] != "0" && cells[2] != "1"))
            throw FormatError("ground-truth row " + std::to_string(r - 1) + " is malformed");
        const bool positive = cells[2] == "1";
        t.rows.push_back({cells[0], cells[1], positive});
        auto& [hits, n] = tally[cells[0]];
        hits += positive ? 1.0 : 0.0;
        n += 1.0;
    }
    // Without the generator's hidden probabilities, a cell's threat is its
    // observed true-poaching rate across rows.
    for (const auto& [grid, hn] : tally) t.cell_threat[grid] = hn.first / hn.second;
    return t;
}

// Per-cell threat probabilities behind the generator, sorted by grid_id.
[[nodiscard]] inline std::string emit_threat_csv(const std::unordered_map<std::string, double>& threat) {
    std::vector<std::pair<std::string, double>> rows(threat.begin(), threat.end());
    std::sort(rows.begin(), rows.end());
    std::string out = "grid_id,threat\n";
    for (const auto& [grid, p] : rows) out += grid + ',' + csv::format_double(p) + '\n';
    return out;
}

[[nodiscard]] inline std::unordered_map<std::string, double> parse_threat_csv(std::string_view text) {
    auto rows = csv::lines(text);
    if (rows.empty() || csv::split(rows.front()) != std::vector<std::string>{"grid_id", "threat"})
        throw SchemaError("threat file must have header 'grid_id,threat'");
    std::unordered_map<std::string, double> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto cells = csv::split(rows[r]);
        std::optional<double> v;
        if (cells.size() == 2) v = csv::parse_double(cells[1]);
        if (!v || !(*v >= 0.0 && *v <= 1.0)) throw FormatError("threat row " + std::to_string(r - 1) + " is malformed");
        if (!out.emplace(cells[0], *v).second) throw DuplicationError("threat for '" + cells[0] + "' given twice");
    }
    return out;
}

}  // namespace poach

#endif  // POACHPRED_SYNTHETIC_HPP
