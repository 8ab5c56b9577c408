#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <poachpred/pipeline.hpp>

int main(int argc, char** argv) {
    poach::RunConfig config;
    CLI::App app{"Poaching threat prediction from patrol data and expert knowledge"};
    app.set_config("--config", "", "flat key=value configuration file");
    config.visit([&](const char* key, auto& member, const char* help) {
        app.add_option(std::string("--") + key, member, help)->capture_default_str();
    });

    struct Command {
        const char* name;
        const char* help;
        std::string (*run)(const poach::RunConfig&);
    };
    const Command commands[] = {
        {"generate", "write a synthetic dataset with its ground truth", poach::cmd_generate},
        {"elicit", "cluster cells and write expert questionnaires", poach::cmd_elicit},
        {"aggregate", "combine two score sheets into per-cell scores", poach::cmd_aggregate},
        {"train", "augment the training data and fit a model", poach::cmd_train},
        {"evaluate", "cross-validate a table of model/augmentation rows", poach::cmd_evaluate},
        {"predict", "score every cell with a trained model", poach::cmd_predict},
        {"audit", "compare expert feature ranges with the data", poach::cmd_audit},
    };
    for (const auto& c : commands) app.add_subcommand(c.name, c.help)->fallthrough();
    app.require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    for (const auto& c : commands) {
        if (!app.got_subcommand(c.name)) continue;
        try {
            const auto summary = c.run(config);
            std::cout << summary << (summary.ends_with('\n') ? "" : "\n");
        } catch (const poach::Error& e) {
            std::cerr << "error[" << e.category() << "]: " << e.what() << "\n";
            return 1;
        } catch (const std::exception& e) {
            std::cerr << "error[io]: " << e.what() << "\n";
            return 1;
        }
    }
    return 0;
}
