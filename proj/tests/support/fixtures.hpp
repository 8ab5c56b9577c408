#ifndef POACHPRED_TESTS_FIXTURES_HPP
#define POACHPRED_TESTS_FIXTURES_HPP

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <poachpred/poachpred.hpp>

namespace fixture {

// A few thousand rows; enough structure for every module, fast to train on.
inline poach::SyntheticConfig small_config() {
    poach::SyntheticConfig c;
    c.seasons = 2;
    c.positives_per_season = 12;
    c.negatives_per_season = 600;
    c.unlabeled_cells = 1500;
    c.villages = 4;
    c.patrol_posts = 2;
    c.marshes = 3;
    c.streams = 5;
    c.rivers = 1;
    return c;
}

inline const poach::SyntheticResult& small_world() {
    static const poach::SyntheticResult r = poach::generate_synthetic(small_config(), 11);
    return r;
}

inline std::shared_ptr<const poach::Dataset> small_dataset() {
    static const auto d = std::make_shared<const poach::Dataset>(small_world().dataset);
    return d;
}

inline poach::DataPoint point(std::string grid, std::string season, poach::Label label, double fill = 0.5,
                              int land_type = 1) {
    poach::DataPoint p;
    p.grid_id = std::move(grid);
    p.season = std::move(season);
    p.features.fill(fill);
    p.features[poach::LandType] = land_type;
    p.label = label;
    return p;
}

// Labeled rows in one season: `pos` positives then `neg` negatives, features
// drawn uniformly, plus `unl` unlabeled cells.
inline std::shared_ptr<const poach::Dataset> random_dataset(std::size_t pos, std::size_t neg, std::size_t unl,
                                                            std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<poach::DataPoint> pts;
    auto make = [&](const std::string& id, const std::string& season, poach::Label l) {
        auto p = point(id, season, l);
        for (std::size_t f = 0; f < poach::kNumFeatures; ++f)
            if (poach::is_normalized(f)) p.features[f] = u(rng);
        p.features[poach::LandType] = static_cast<double>(rng() % 3);
        pts.push_back(p);
    };
    for (std::size_t i = 0; i < pos; ++i) make("p" + std::to_string(i), "2015-2016", poach::Label::Positive);
    for (std::size_t i = 0; i < neg; ++i) make("n" + std::to_string(i), "2015-2016", poach::Label::Negative);
    for (std::size_t i = 0; i < unl; ++i) make("u" + std::to_string(i), poach::kAnySeason, poach::Label::Unlabeled);
    return std::make_shared<const poach::Dataset>(std::move(pts));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("poachpred_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fixture

#endif  // POACHPRED_TESTS_FIXTURES_HPP
