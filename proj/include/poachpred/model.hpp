#ifndef POACHPRED_MODEL_HPP
#define POACHPRED_MODEL_HPP

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "augmentation.hpp"
#include "dataset.hpp"
#include "net.hpp"
#include "tree.hpp"

namespace poach {

struct ThreatModel {
    std::variant<TreeEnsemble, NetEnsemble> ensemble;
    double threshold = 0.5;
    std::optional<Scaler> scaler;  // normalization of the training data, if known

    [[nodiscard]] bool is_trees() const noexcept { return std::holds_alternative<TreeEnsemble>(ensemble); }
    [[nodiscard]] std::string kind_name() const { return is_trees() ? "trees" : "nets"; }

    [[nodiscard]] double predict_proba(const FeatureVector& x) const {
        return std::visit([&](const auto& e) { return e.predict(x); }, ensemble);
    }

    [[nodiscard]] double predict_proba(std::span<const double> x) const {
        if (x.size() != kNumFeatures)
            throw ShapeError("expected " + std::to_string(kNumFeatures) + " features, got " + std::to_string(x.size()));
        FeatureVector v{};
        std::copy(x.begin(), x.end(), v.begin());
        return predict_proba(v);
    }

    [[nodiscard]] bool predict_label(const FeatureVector& x) const { return predict_proba(x) >= threshold; }

    [[nodiscard]] std::size_t member_count() const {
        return is_trees() ? std::get<TreeEnsemble>(ensemble).trees.size() : std::get<NetEnsemble>(ensemble).members.size();
    }

    [[nodiscard]] std::vector<double> member_predictions(const FeatureVector& x) const {
        std::vector<double> out;
        if (const auto* t = std::get_if<TreeEnsemble>(&ensemble)) {
            for (const auto& tree : t->trees) out.push_back(tree.predict(x));
        } else {
            const auto& n = std::get<NetEnsemble>(ensemble);
            const auto e = n.encoding(x);
            for (const auto& m : n.members) out.push_back(m.predict(e));
        }
        return out;
    }

    friend bool operator==(const ThreatModel&, const ThreatModel&) = default;
};

struct CellScore {
    std::string grid_id;
    std::string season;
    double score = 0;
};

// Scores every row, highest threat first (ties by grid_id, then season).
[[nodiscard]] inline std::vector<CellScore> predict_map(const ThreatModel& m, const Dataset& d) {
    std::vector<CellScore> out(d.size());
    parallel_for(d.size(), [&](std::size_t i) { out[i] = {d[i].grid_id, d[i].season, m.predict_proba(d[i].features)}; });
    std::sort(out.begin(), out.end(), [](const CellScore& a, const CellScore& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.grid_id != b.grid_id) return a.grid_id < b.grid_id;
        return a.season < b.season;
    });
    return out;
}

[[nodiscard]] inline std::string emit_predictions_csv(const std::vector<CellScore>& rows) {
    std::string out = "grid_id,season,threat_score\n";
    for (const auto& r : rows) out += r.grid_id + "," + r.season + "," + csv::format_double(r.score) + "\n";
    return out;
}

// ---- serialization ----

inline constexpr const char* kModelFormat = "poachpred-model";
inline constexpr int kModelVersion = 1;

namespace detail {

inline nlohmann::json tree_params_json(const TreeParams& p) {
    return {{"n_trees", p.n_trees},
            {"subsample", p.subsample},
            {"with_replacement", p.with_replacement},
            {"min_leaf", p.min_leaf},
            {"max_depth", p.max_depth}};
}

inline TreeParams tree_params_from(const nlohmann::json& j) {
    TreeParams p;
    p.n_trees = j.at("n_trees").get<int>();
    p.subsample = j.at("subsample").get<double>();
    p.with_replacement = j.at("with_replacement").get<bool>();
    p.min_leaf = j.at("min_leaf").get<int>();
    p.max_depth = j.at("max_depth").get<int>();
    return p;
}

inline nlohmann::json net_params_json(const NetParams& p) {
    return {{"members", p.members},       {"epochs", p.epochs},
            {"batch", p.batch},           {"lr", p.lr},
            {"beta1", p.beta1},           {"beta2", p.beta2},
            {"eps", p.eps},               {"weight_decay", p.weight_decay},
            {"plateau_tol", p.plateau_tol}, {"plateau_epochs", p.plateau_epochs}};
}

inline NetParams net_params_from(const nlohmann::json& j) {
    NetParams p;
    p.members = j.at("members").get<int>();
    p.epochs = j.at("epochs").get<int>();
    p.batch = j.at("batch").get<int>();
    p.lr = j.at("lr").get<double>();
    p.beta1 = j.at("beta1").get<double>();
    p.beta2 = j.at("beta2").get<double>();
    p.eps = j.at("eps").get<double>();
    p.weight_decay = j.at("weight_decay").get<double>();
    p.plateau_tol = j.at("plateau_tol").get<double>();
    p.plateau_epochs = j.at("plateau_epochs").get<int>();
    return p;
}

}  // namespace detail

// JSON with full-precision doubles, so a reload predicts bit-identically.
[[nodiscard]] inline std::string save_model(const ThreatModel& m) {
    nlohmann::json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["kind"] = m.kind_name();
    j["threshold"] = m.threshold;
    if (m.scaler) j["scaler"] = {{"min", m.scaler->min}, {"max", m.scaler->max}};
    else j["scaler"] = nullptr;
    if (const auto* t = std::get_if<TreeEnsemble>(&m.ensemble)) {
        j["params"] = detail::tree_params_json(t->params);
        j["seed"] = t->seed;
        auto& trees = j["trees"] = nlohmann::json::array();
        for (const auto& tree : t->trees) {
            std::vector<int> feature, left, right;
            std::vector<double> threshold, value;
            std::vector<std::uint64_t> mask;
            for (const auto& n : tree.nodes) {
                feature.push_back(n.feature);
                threshold.push_back(n.threshold);
                mask.push_back(n.category_mask);
                left.push_back(n.left);
                right.push_back(n.right);
                value.push_back(n.value);
            }
            trees.push_back({{"feature", feature},
                             {"threshold", threshold},
                             {"mask", mask},
                             {"left", left},
                             {"right", right},
                             {"value", value}});
        }
    } else {
        const auto& n = std::get<NetEnsemble>(m.ensemble);
        j["params"] = detail::net_params_json(n.params);
        j["seed"] = n.seed;
        j["categories"] = n.encoding.categories;
        auto& members = j["members"] = nlohmann::json::array();
        for (const auto& mlp : n.members) members.push_back({{"inputs", mlp.inputs}, {"params", mlp.params}});
    }
    return j.dump() + "\n";
}

[[nodiscard]] inline ThreatModel load_model_text(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (j.value("format", "") != kModelFormat) throw FormatError("not a poachpred model file");
        if (j.at("version").get<int>() != kModelVersion)
            throw FormatError("unsupported model version " + j.at("version").dump());
        ThreatModel m;
        m.threshold = j.at("threshold").get<double>();
        if (!j.at("scaler").is_null())
            m.scaler = Scaler{j["scaler"].at("min").get<FeatureVector>(), j["scaler"].at("max").get<FeatureVector>()};
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "trees") {
            TreeEnsemble t{detail::tree_params_from(j.at("params")), j.at("seed").get<std::uint64_t>(), {}};
            for (const auto& jt : j.at("trees")) {
                const auto feature = jt.at("feature").get<std::vector<int>>();
                const auto threshold = jt.at("threshold").get<std::vector<double>>();
                const auto mask = jt.at("mask").get<std::vector<std::uint64_t>>();
                const auto left = jt.at("left").get<std::vector<int>>();
                const auto right = jt.at("right").get<std::vector<int>>();
                const auto value = jt.at("value").get<std::vector<double>>();
                const std::size_t n = feature.size();
                if (threshold.size() != n || mask.size() != n || left.size() != n || right.size() != n || value.size() != n)
                    throw FormatError("tree arrays differ in length");
                DecisionTree tree;
                for (std::size_t i = 0; i < n; ++i) {
                    const bool leaf = feature[i] < 0;
                    if (!leaf && (feature[i] >= static_cast<int>(kNumFeatures) || left[i] <= static_cast<int>(i) ||
                                  right[i] <= static_cast<int>(i) || left[i] >= static_cast<int>(n) ||
                                  right[i] >= static_cast<int>(n)))
                        throw FormatError("tree node " + std::to_string(i) + " is malformed");
                    tree.nodes.push_back({feature[i], threshold[i], mask[i], left[i], right[i], value[i]});
                }
                if (tree.nodes.empty()) throw FormatError("empty tree");
                t.trees.push_back(std::move(tree));
            }
            m.ensemble = std::move(t);
        } else if (kind == "nets") {
            NetEnsemble n{detail::net_params_from(j.at("params")), j.at("seed").get<std::uint64_t>(),
                          Embedding{j.at("categories").get<std::vector<int>>()}, {}};
            for (const auto& jm : j.at("members")) {
                Mlp mlp{jm.at("inputs").get<std::size_t>(), jm.at("params").get<std::vector<double>>()};
                if (mlp.inputs != n.encoding.dims() || mlp.params.size() != Mlp::layout(mlp.inputs).total)
                    throw FormatError("network member has the wrong shape");
                n.members.push_back(std::move(mlp));
            }
            m.ensemble = std::move(n);
        } else {
            throw FormatError("unknown model kind '" + kind + "'");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model file is malformed: ") + e.what());
    }
}

inline void write_model(const std::string& path, const ThreatModel& m) { csv::write_file(path, save_model(m)); }

[[nodiscard]] inline ThreatModel read_model(const std::string& path) { return load_model_text(csv::read_file(path)); }

// ---- training ----

enum class ModelKind { Trees, Nets, Random };

[[nodiscard]] inline std::string model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Trees: return "DT";
        case ModelKind::Nets: return "NN";
        case ModelKind::Random: return "Random";
    }
    return "?";
}

[[nodiscard]] inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "DT" || s == "dt" || s == "trees") return ModelKind::Trees;
    if (s == "NN" || s == "nn" || s == "nets") return ModelKind::Nets;
    if (s == "random" || s == "Random") return ModelKind::Random;
    throw ConfigError("unknown model '" + std::string(s) + "' (expected DT, NN or random)");
}

struct ModelSpec {
    ModelKind kind = ModelKind::Trees;
    TreeParams trees;
    NetParams nets;
    double threshold = 0.5;
};

[[nodiscard]] inline ThreatModel train_model(const TrainingSet& t, const ModelSpec& spec, std::uint64_t seed,
                                             std::optional<Scaler> scaler = std::nullopt) {
    if (!(spec.threshold >= 0.0 && spec.threshold <= 1.0)) throw ParameterError("threshold must be in [0,1]");
    const Samples s = samples_of(t);
    switch (spec.kind) {
        case ModelKind::Trees: return {train_trees(s, spec.trees, seed), spec.threshold, scaler};
        case ModelKind::Nets: return {train_nets(s, spec.nets, seed), spec.threshold, scaler};
        case ModelKind::Random: break;
    }
    throw ParameterError("the random baseline has no trainable model");
}

}  // namespace poach

#endif  // POACHPRED_MODEL_HPP
