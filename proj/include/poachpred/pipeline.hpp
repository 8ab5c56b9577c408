#ifndef POACHPRED_PIPELINE_HPP
#define POACHPRED_PIPELINE_HPP

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "augmentation.hpp"
#include "dataset.hpp"
#include "elicitation.hpp"
#include "evaluation.hpp"
#include "model.hpp"
#include "synthetic.hpp"

namespace poach {

// Everything a subcommand reads. Empty paths resolve to fixed names inside
// the output directory, so commands chain without extra flags.
struct RunConfig {
    std::string out = "run";
    std::uint64_t seed = 0;

    // inputs
    std::string data;        // dataset.csv
    std::string units = "normalized";
    std::string truth;       // truth.csv
    std::string threat;      // threat.csv
    std::string scores;      // aggregated_scores.csv
    std::string ranges;      // required by PSFR and audit
    std::string model_path;  // model.json
    std::string clusters_a, clusters_b, sheet_a, sheet_b;

    // elicitation
    std::string clusters = "40,50";
    bool simulate_expert = false;
    int kmeans_max_iter = 100;

    // augmentation
    std::string plan = "DD,NS,PS";
    int smote_k = 5;
    double ns_fraction = 0.2;
    int ps_threshold = kDefaultScoreThreshold;
    double psfr_p = kPsfrP;
    double psfr_q = kPsfrQ;
    long psfr_top_n = 1000;

    // models
    std::string model = "DT";
    double threshold = 0.5;
    int n_trees = 1000;
    double subsample = 0.10;
    bool with_replacement = true;
    int min_leaf = 1;
    int max_depth = 0;
    int nn_members = 100;
    int nn_epochs = 50;
    int nn_batch = 64;
    double nn_lr = 0.001;
    double nn_weight_decay = 0.1;

    // evaluation
    int folds = 4;
    int repeats = 10;
    bool ns_per_fold = false;
    std::string rows =
        "Random decisions:random:none;DT:DT:none;DT with DD:DT:DD;DT with SMOTE:DT:SMOTE;DT with DD+PS:DT:DD,PS;"
        "DT with DD+NS:DT:DD,NS;DT with DD+NS+PS:DT:DD,NS,PS;NN:NN:none;NN with DD:NN:DD;NN with DD+NS:NN:DD,NS;"
        "NN with DD+NS+PS:NN:DD,NS,PS";

    // synthetic generator
    SyntheticConfig synthetic;

    // Calls f(key, member, help) for every setting, in file order.
    template <class F>
    void visit(F&& f) {
        f("out", out, "output directory");
        f("seed", seed, "master seed");
        f("data", data, "dataset CSV (default <out>/dataset.csv)");
        f("units", units, "feature units of the dataset: normalized or raw");
        f("truth", truth, "ground-truth CSV (default <out>/truth.csv)");
        f("threat", threat, "per-cell threat CSV used by the simulated expert (default <out>/threat.csv)");
        f("scores", scores, "aggregated score CSV (default <out>/aggregated_scores.csv)");
        f("ranges", ranges, "expert feature-range CSV");
        f("model_path", model_path, "model artifact (default <out>/model.json)");
        f("clusters_a", clusters_a, "first cluster model (default <out>/clusters_k<first k>.json)");
        f("clusters_b", clusters_b, "second cluster model (default <out>/clusters_k<second k>.json)");
        f("sheet_a", sheet_a, "first score sheet (default <out>/scores_k<first k>.csv)");
        f("sheet_b", sheet_b, "second score sheet (default <out>/scores_k<second k>.csv)");
        f("clusters", clusters, "comma-separated questionnaire cluster counts");
        f("simulate_expert", simulate_expert, "fill score sheets from the generator's threat file");
        f("kmeans_max_iter", kmeans_max_iter, "k-means iteration cap");
        f("plan", plan, "augmentation steps, e.g. DD,NS,PS or none");
        f("smote_k", smote_k, "SMOTE neighbours");
        f("ns_fraction", ns_fraction, "fraction of the unlabeled pool added as negatives");
        f("ps_threshold", ps_threshold, "minimum aggregated score for positive sampling");
        f("psfr_p", psfr_p, "PSFR in-range probability");
        f("psfr_q", psfr_q, "PSFR out-of-range probability");
        f("psfr_top_n", psfr_top_n, "cells added by PSFR");
        f("model", model, "DT or NN");
        f("threshold", threshold, "decision threshold on the predicted probability");
        f("n_trees", n_trees, "trees in the bagged ensemble");
        f("subsample", subsample, "fraction of training rows per tree");
        f("with_replacement", with_replacement, "bootstrap tree samples with replacement");
        f("min_leaf", min_leaf, "minimum rows per tree leaf");
        f("max_depth", max_depth, "tree depth cap, 0 for none");
        f("nn_members", nn_members, "networks in the ensemble");
        f("nn_epochs", nn_epochs, "maximum training epochs per network");
        f("nn_batch", nn_batch, "minibatch size");
        f("nn_lr", nn_lr, "Adam learning rate");
        f("nn_weight_decay", nn_weight_decay, "L2 coefficient on network weights");
        f("folds", folds, "cross-validation folds");
        f("repeats", repeats, "cross-validation repeats");
        f("ns_per_fold", ns_per_fold, "resample pool steps in every fold instead of once per repeat");
        f("rows", rows, "evaluation rows as name:model:plan separated by ';'");
        f("seasons", synthetic.seasons, "synthetic: patrol seasons");
        f("first_season_year", synthetic.first_season_year, "synthetic: first season year");
        f("positives_per_season", synthetic.positives_per_season, "synthetic: positives per season");
        f("negatives_per_season", synthetic.negatives_per_season, "synthetic: negatives per season");
        f("unlabeled_cells", synthetic.unlabeled_cells, "synthetic: never-patrolled cells");
        f("detection_rate", synthetic.detection_rate, "synthetic: fraction of true poaching recorded");
        f("max_threat", synthetic.max_threat, "synthetic: ceiling on a cell's per-season poaching probability");
        f("core_ratio", synthetic.core_ratio, "synthetic: patrollable region relative to cells patrolled per season");
        f("villages", synthetic.villages, "synthetic: villages");
        f("patrol_posts", synthetic.patrol_posts, "synthetic: patrol posts");
        f("marshes", synthetic.marshes, "synthetic: marshes");
        f("streams", synthetic.streams, "synthetic: streams");
        f("rivers", synthetic.rivers, "synthetic: rivers");
        f("w_dist_village", synthetic.w_dist_village, "synthetic: threat weight on dist_village");
        f("w_dist_patrol_post", synthetic.w_dist_patrol_post, "synthetic: threat weight on dist_patrol_post");
        f("w_elevation", synthetic.w_elevation, "synthetic: threat weight on elevation");
        f("w_slope", synthetic.w_slope, "synthetic: threat weight on slope");
        f("patrol_focus", synthetic.patrol_focus, "synthetic: weight of believed threat in patrol choice");
    }

    [[nodiscard]] std::string in_out(const std::string& given, const std::string& name) const {
        return given.empty() ? (std::filesystem::path(out) / name).string() : given;
    }
};

namespace detail {

template <class T>
std::string ini_value(const T& v) {
    if constexpr (std::is_same_v<T, std::string>) return '"' + v + '"';
    else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
    else if constexpr (std::is_floating_point_v<T>) return csv::format_double(v);
    else return std::to_string(v);
}

}  // namespace detail

// Flat key=value rendering of the effective configuration.
[[nodiscard]] inline std::string emit_config(RunConfig c) {
    std::string out;
    c.visit([&](const char* key, const auto& value, const char*) { out += std::string(key) + "=" + detail::ini_value(value) + "\n"; });
    return out;
}

[[nodiscard]] inline std::vector<int> parse_int_list(std::string_view s, const char* what) {
    std::vector<int> out;
    for (const auto& tok : csv::split(s, ',')) {
        const auto v = csv::parse_int(tok);
        if (!v) throw ConfigError(std::string(what) + ": '" + tok + "' is not an integer");
        out.push_back(static_cast<int>(*v));
    }
    return out;
}

[[nodiscard]] inline TreeParams tree_params(const RunConfig& c) {
    return {c.n_trees, c.subsample, c.with_replacement, c.min_leaf, c.max_depth};
}

[[nodiscard]] inline NetParams net_params(const RunConfig& c) {
    NetParams p;
    p.members = c.nn_members;
    p.epochs = c.nn_epochs;
    p.batch = c.nn_batch;
    p.lr = c.nn_lr;
    p.weight_decay = c.nn_weight_decay;
    return p;
}

[[nodiscard]] inline ModelSpec model_spec(const RunConfig& c, std::string_view kind) {
    return {parse_model_kind(kind), tree_params(c), net_params(c), c.threshold};
}

[[nodiscard]] inline std::vector<FeatureRange> load_ranges(const RunConfig& c) {
    if (c.ranges.empty()) throw ConfigError("no ranges file given (set ranges=...)");
    return parse_ranges_csv(csv::read_file(c.ranges));
}

[[nodiscard]] inline PlanDefaults plan_defaults(const RunConfig& c, bool needs_ranges) {
    PlanDefaults d;
    d.smote.k_neighbors = c.smote_k;
    d.ns.fraction = c.ns_fraction;
    d.ps.threshold = c.ps_threshold;
    d.psfr.p = c.psfr_p;
    d.psfr.q = c.psfr_q;
    if (c.psfr_top_n < 0) throw ConfigError("psfr_top_n must be >= 0");
    d.psfr.top_n = static_cast<std::size_t>(c.psfr_top_n);
    if (needs_ranges) d.psfr.ranges = load_ranges(c);
    return d;
}

[[nodiscard]] inline bool plan_mentions(std::string_view spec, std::string_view step) {
    for (auto tok : csv::split(spec, ',')) {
        for (auto& ch : tok) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        if (tok == step) return true;
    }
    return false;
}

// Raw-unit data is normalized on load: with the given scaler when there is
// one (prediction), otherwise with min-max bounds fitted to the file.
[[nodiscard]] inline std::shared_ptr<const Dataset> load_dataset(const RunConfig& c, const Scaler* fixed = nullptr) {
    if (c.units != "normalized" && c.units != "raw") throw ConfigError("units must be 'normalized' or 'raw'");
    const auto path = c.in_out(c.data, "dataset.csv");
    if (c.units == "normalized") return std::make_shared<const Dataset>(ingest_csv(path));
    const auto raw = ingest_csv(path, {}, Units::Raw);
    if (!fixed) return std::make_shared<const Dataset>(normalize(raw).data);
    std::vector<DataPoint> points(raw.points().begin(), raw.points().end());
    for (auto& p : points) p.features = fixed->apply(p.features);
    return std::make_shared<const Dataset>(std::move(points));
}

inline void echo_config(const RunConfig& c, const std::string& command) {
    std::filesystem::create_directories(c.out);
    csv::write_file((std::filesystem::path(c.out) / (command + "_config.ini")).string(), emit_config(c));
}

[[nodiscard]] inline std::string out_path(const RunConfig& c, const std::string& name) {
    return (std::filesystem::path(c.out) / name).string();
}

// Each command returns a short human-readable summary.

inline std::string cmd_generate(const RunConfig& c) {
    validate(c.synthetic);
    echo_config(c, "generate");
    const auto r = generate_synthetic(c.synthetic, c.seed);
    write_csv(out_path(c, "dataset.csv"), r.dataset);
    csv::write_file(out_path(c, "scaler.csv"), emit_scaler_csv(r.scaler));
    csv::write_file(out_path(c, "truth.csv"), emit_truth_csv(r.truth));
    csv::write_file(out_path(c, "threat.csv"), emit_threat_csv(r.truth.cell_threat));
    csv::write_file(out_path(c, "skew.csv"), emit_skew_csv(skew_report(r.dataset)));
    return "generated " + std::to_string(r.dataset.size()) + " rows (" +
           std::to_string(r.dataset.count(Label::Positive)) + " positive, " +
           std::to_string(r.dataset.count(Label::Negative)) + " negative, " +
           std::to_string(r.dataset.count(Label::Unlabeled)) + " unlabeled) into " + c.out;
}

inline std::string cmd_elicit(const RunConfig& c) {
    const auto ks = parse_int_list(c.clusters, "clusters");
    if (ks.empty()) throw ConfigError("clusters must list at least one k");
    const auto d = load_dataset(c);
    echo_config(c, "elicit");
    std::optional<Scaler> scaler;
    if (const auto sp = out_path(c, "scaler.csv"); std::filesystem::exists(sp))
        scaler = parse_scaler_csv(csv::read_file(sp));
    std::unordered_map<std::string, double> threat;
    if (c.simulate_expert) threat = parse_threat_csv(csv::read_file(c.in_out(c.threat, "threat.csv")));
    std::string summary;
    for (int k : ks) {
        KMeansParams kp;
        kp.k = k;
        kp.seed = derive_seed({c.seed, 0xe11c17, static_cast<std::uint64_t>(k)});
        kp.max_iter = c.kmeans_max_iter;
        const auto cm = kmeans(*d, kp);
        const auto tag = "k" + std::to_string(k);
        csv::write_file(out_path(c, "clusters_" + tag + ".json"), emit_cluster_model(cm));
        csv::write_file(out_path(c, "questionnaire_" + tag + ".csv"), emit_questionnaire(cm, *d, scaler));
        summary += "k=" + std::to_string(k) + ": " + std::to_string(cm.iterations) + " iterations, inertia " +
                   csv::format_fixed(cm.inertia, 3);
        if (c.simulate_expert) {
            csv::write_file(out_path(c, "scores_" + tag + ".csv"), emit_scores(simulate_scores(cm, threat)));
            summary += ", simulated scores written";
        }
        summary += "\n";
    }
    return summary;
}

inline std::string cmd_aggregate(const RunConfig& c) {
    const auto ks = parse_int_list(c.clusters, "clusters");
    if (ks.size() != 2 && (c.clusters_a.empty() || c.clusters_b.empty()))
        throw ConfigError("aggregation needs exactly two questionnaires (clusters=a,b)");
    const auto ka = ks.size() > 0 ? "k" + std::to_string(ks[0]) : "";
    const auto kb = ks.size() > 1 ? "k" + std::to_string(ks[1]) : "";
    const auto m1 = parse_cluster_model(csv::read_file(c.in_out(c.clusters_a, "clusters_" + ka + ".json")));
    const auto m2 = parse_cluster_model(csv::read_file(c.in_out(c.clusters_b, "clusters_" + kb + ".json")));
    const auto s1 = ingest_scores(c.in_out(c.sheet_a, "scores_" + ka + ".csv"), m1);
    const auto s2 = ingest_scores(c.in_out(c.sheet_b, "scores_" + kb + ".csv"), m2);
    const auto agg = aggregate(m1, s1, m2, s2);
    echo_config(c, "aggregate");
    csv::write_file(c.in_out(c.scores, "aggregated_scores.csv"), emit_aggregated_csv(agg));
    std::string hist = "abs_difference,cells\n";
    const auto h = agg.disagreement();
    for (std::size_t i = 0; i < h.size(); ++i) hist += std::to_string(i) + "," + std::to_string(h[i]) + "\n";
    csv::write_file(out_path(c, "disagreement.csv"), hist);
    return "aggregated scores for " + std::to_string(agg.grid_ids.size()) + " cells";
}

struct PreparedPlan {
    AugmentationPlan plan;
    std::optional<AggregatedScoreMap> scores;

    [[nodiscard]] AugmentationInputs inputs() const { return {scores ? &*scores : nullptr}; }
};

[[nodiscard]] inline PreparedPlan prepare_plan(const RunConfig& c, std::string_view spec, std::uint64_t seed) {
    PreparedPlan p;
    p.plan = parse_plan(spec, plan_defaults(c, plan_mentions(spec, "PSFR")), seed);
    if (plan_mentions(spec, "PS"))
        p.scores = parse_aggregated_csv(csv::read_file(c.in_out(c.scores, "aggregated_scores.csv")));
    return p;
}

inline std::string cmd_train(const RunConfig& c) {
    const auto d = load_dataset(c);
    const auto prepared = prepare_plan(c, c.plan, derive_seed({c.seed, 0x91a4}));
    const auto spec = model_spec(c, c.model);
    if (spec.kind == ModelKind::Random) throw ConfigError("the random baseline cannot be trained; use DT or NN");
    echo_config(c, "train");
    const auto pool = d->unlabeled_pool();
    auto t = apply_plan(TrainingSet::all_labeled(d), prepared.plan, pool, prepared.inputs());
    std::optional<Scaler> scaler;
    if (const auto sp = out_path(c, "scaler.csv"); std::filesystem::exists(sp))
        scaler = parse_scaler_csv(csv::read_file(sp));
    const auto model = train_model(t, spec, derive_seed({c.seed, 0x30de1}), scaler);
    write_model(c.in_out(c.model_path, "model.json"), model);
    std::string log = "step,added,warnings\n";
    for (const auto& r : t.log()) {
        std::string w;
        for (const auto& s : r.warnings) w += (w.empty() ? "" : " | ") + s;
        log += r.step + "," + std::to_string(r.added) + ",\"" + w + "\"\n";
    }
    csv::write_file(out_path(c, "training_log.csv"), log);
    return "trained " + model.kind_name() + " (" + std::to_string(model.member_count()) + " members) on " +
           std::to_string(t.size()) + " points (" + std::to_string(t.positives()) + " positive) with plan " +
           prepared.plan.name();
}

[[nodiscard]] inline std::vector<AblationRow> parse_rows(const RunConfig& c, std::vector<PreparedPlan>& plans) {
    std::vector<AblationRow> rows;
    plans.clear();
    const auto specs = csv::split(c.rows, ';');
    plans.reserve(specs.size());
    for (const auto& s : specs) {
        if (s.empty()) continue;
        const auto parts = csv::split(s, ':');
        if (parts.size() != 3) throw ConfigError("evaluation row '" + s + "' must be name:model:plan");
        plans.push_back(prepare_plan(c, parts[2], derive_seed({c.seed, 0x91a4})));
        rows.push_back({parts[0], plans.back().plan, model_spec(c, parts[1])});
    }
    if (rows.empty()) throw ConfigError("no evaluation rows given");
    return rows;
}

inline std::string cmd_evaluate(const RunConfig& c) {
    const auto d = load_dataset(c);
    std::vector<PreparedPlan> plans;
    const auto rows = parse_rows(c, plans);
    echo_config(c, "evaluate");
    const CVConfig cv{c.folds, c.repeats, c.seed, c.ns_per_fold};
    std::vector<CVReport> table;
    for (std::size_t i = 0; i < rows.size(); ++i)
        table.push_back(cross_validate(d, rows[i].plan, rows[i].model, cv, plans[i].inputs(), {}, rows[i].name));
    csv::write_file(out_path(c, "ablation.csv"), emit_ablation_csv(table));
    const auto text = render_ablation_text(table);
    csv::write_file(out_path(c, "ablation.txt"), text);
    return text;
}

inline std::string cmd_predict(const RunConfig& c) {
    const auto model_file = c.in_out(c.model_path, "model.json");
    if (!std::filesystem::exists(model_file)) throw FileError("model artifact '" + model_file + "' not found");
    const auto model = read_model(model_file);
    if (c.units == "raw" && !model.scaler) throw ConfigError("raw-unit input needs a model trained with a scaler");
    const auto d = load_dataset(c, model.scaler ? &*model.scaler : nullptr);
    echo_config(c, "predict");
    const auto rows = predict_map(model, *d);
    csv::write_file(out_path(c, "predictions.csv"), emit_predictions_csv(rows));
    return "scored " + std::to_string(rows.size()) + " rows";
}

inline std::string cmd_audit(const RunConfig& c) {
    const auto d = load_dataset(c);
    const auto ranges = load_ranges(c);
    echo_config(c, "audit");
    const auto report = feature_audit(*d, ranges);
    csv::write_file(out_path(c, "histograms.csv"), emit_histogram_csv(report));
    csv::write_file(out_path(c, "agreement.csv"), emit_agreement_csv(report));
    std::size_t discordant = 0;
    for (const auto& a : report.agreement) discordant += a.discordant ? 1 : 0;
    return std::to_string(report.agreement.size()) + " ranges audited, " + std::to_string(discordant) + " discordant";
}

}  // namespace poach

#endif  // POACHPRED_PIPELINE_HPP
