#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "fixtures.hpp"

using namespace poach;
namespace fs = std::filesystem;

namespace {

RunConfig small_run(const fs::path& dir) {
    RunConfig c;
    c.out = dir.string();
    c.seed = 3;
    c.synthetic = fixture::small_config();
    c.simulate_expert = true;
    c.n_trees = 20;
    c.nn_members = 2;
    c.nn_epochs = 2;
    c.repeats = 1;
    return c;
}

std::string slurp(const fs::path& p) { return csv::read_file(p.string()); }

int run_cli(const std::string& args) {
    const std::string cmd = std::string(POACHPRED_CLI) + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

}  // namespace

TEST(Pipeline, EndToEndWritesEveryArtifact) {
    const auto dir = fixture::temp_dir("e2e");
    auto c = small_run(dir);
    cmd_generate(c);
    for (auto f : {"dataset.csv", "scaler.csv", "truth.csv", "threat.csv", "skew.csv", "generate_config.ini"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;

    cmd_elicit(c);
    EXPECT_EQ(csv::lines(slurp(dir / "questionnaire_k40.csv")).size(), 41u);
    EXPECT_EQ(csv::lines(slurp(dir / "questionnaire_k50.csv")).size(), 51u);

    cmd_aggregate(c);
    const auto agg = parse_aggregated_csv(slurp(dir / "aggregated_scores.csv"));
    for (std::size_t i = 0; i < agg.scores.size(); ++i) EXPECT_EQ(agg.scores[i], std::min(agg.first[i], agg.second[i]));

    cmd_train(c);
    const auto model = read_model((dir / "model.json").string());
    EXPECT_TRUE(model.is_trees());
    EXPECT_TRUE(model.scaler.has_value());

    cmd_predict(c);
    const auto preds = csv::lines(slurp(dir / "predictions.csv"));
    EXPECT_EQ(preds.front(), "grid_id,season,threat_score");
    double prev = 2;
    for (std::size_t i = 1; i < preds.size(); ++i) {
        const double s = *csv::parse_double(csv::split(preds[i])[2]);
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
        EXPECT_LE(s, prev);
        prev = s;
    }

    c.rows = "Random:random:none;DT+DD:DT:DD;DT+DD+NS+PS:DT:DD,NS,PS";
    const auto text = cmd_evaluate(c);
    EXPECT_NE(text.find("DT+DD+NS+PS"), std::string::npos);
    EXPECT_EQ(csv::lines(slurp(dir / "ablation.csv")).size(), 4u);

    c.ranges = (dir / "ranges.csv").string();
    csv::write_file(c.ranges, "feature,low_lo,low_hi,high_lo,high_hi\ndist_village,0,0.3,0.3,1\n");
    cmd_audit(c);
    EXPECT_EQ(csv::lines(slurp(dir / "agreement.csv")).size(), 2u);
}

TEST(Pipeline, SameSeedSameFiles) {
    const auto a = fixture::temp_dir("det_a"), b = fixture::temp_dir("det_b");
    cmd_generate(small_run(a));
    cmd_generate(small_run(b));
    EXPECT_EQ(slurp(a / "dataset.csv"), slurp(b / "dataset.csv"));
    cmd_elicit(small_run(a));
    cmd_elicit(small_run(b));
    EXPECT_EQ(slurp(a / "questionnaire_k40.csv"), slurp(b / "questionnaire_k40.csv"));
}

TEST(Pipeline, UnaugmentedPlanTrainsOnLabeledDataOnly) {
    const auto dir = fixture::temp_dir("none");
    auto c = small_run(dir);
    cmd_generate(c);
    c.plan = "none";
    EXPECT_NE(cmd_train(c).find("on 1224 points (24 positive)"), std::string::npos);
    EXPECT_EQ(csv::lines(slurp(dir / "training_log.csv")).size(), 1u);
}

TEST(Pipeline, MissingArtifactsAreErrors) {
    const auto dir = fixture::temp_dir("missing");
    auto c = small_run(dir);
    cmd_generate(c);
    EXPECT_THROW(cmd_predict(c), FileError);
    EXPECT_THROW(cmd_aggregate(c), FileError);
    c.plan = "DD,PS";
    EXPECT_THROW(cmd_train(c), FileError);
}

TEST(Pipeline, IncompleteSheetRejected) {
    const auto dir = fixture::temp_dir("sheet");
    auto c = small_run(dir);
    cmd_generate(c);
    cmd_elicit(c);
    auto text = slurp(dir / "scores_k40.csv");
    text = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
    csv::write_file((dir / "scores_k40.csv").string(), text);
    EXPECT_THROW(cmd_aggregate(c), CompletenessError);
}

TEST(Config, EchoRoundTripsThroughIni) {
    RunConfig c;
    const auto text = emit_config(c);
    EXPECT_NE(text.find("plan=\"DD,NS,PS\""), std::string::npos);
    EXPECT_NE(text.find("n_trees=1000"), std::string::npos);
    EXPECT_NE(text.find("clusters=\"40,50\""), std::string::npos);
    std::size_t keys = 0;
    c.visit([&](const char*, auto&, const char*) { ++keys; });
    EXPECT_EQ(csv::lines(text).size(), keys);
}

TEST(Binary, ExitCodes) {
    const auto dir = fixture::temp_dir("bin");
    const auto out = dir.string();
    const std::string small = " --seasons 2 --positives_per_season 12 --negatives_per_season 600 --unlabeled_cells 1500";
    EXPECT_EQ(run_cli("generate --out " + out + small), 0);
    EXPECT_TRUE(fs::exists(dir / "dataset.csv"));
    EXPECT_NE(run_cli("generate --out " + out + " --positives_per_season 0"), 0);
    EXPECT_NE(run_cli("predict --out " + out), 0);
    EXPECT_NE(run_cli("frobnicate"), 0);

    const auto ini = dir / "run.ini";
    csv::write_file(ini.string(), "out=\"" + out + "/cfg\"\nseed=5\nseasons=2\npositives_per_season=12\n"
                                  "negatives_per_season=600\nunlabeled_cells=1500\n");
    EXPECT_EQ(run_cli("generate --config " + ini.string()), 0);
    const auto echoed = slurp(dir / "cfg" / "generate_config.ini");
    EXPECT_NE(echoed.find("seed=5"), std::string::npos);
    // Command line beats the file.
    EXPECT_EQ(run_cli("generate --config " + ini.string() + " --seed 6"), 0);
    EXPECT_NE(slurp(dir / "cfg" / "generate_config.ini").find("seed=6"), std::string::npos);
}
