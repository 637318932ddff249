#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wbc/commands.hpp"

namespace {

struct Args {
    std::string config;
    std::string preset;
    std::vector<std::string> overrides;  // from named flags (--seed, --out, ...)
    std::vector<std::string> sets;       // from --set; applied after the named flags
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"white-blood-cell ensemble laboratory"};
    app.require_subcommand(1);

    Args args;
    int explain_index = 0;
    std::string explain_image;

    auto add_common = [&args](CLI::App* cmd) {
        cmd->add_option("--config", args.config, "config file of key=value lines");
        cmd->add_option("--preset", args.preset,
                        "defaults bundle applied over the config file: replica | desk")
            ->check(CLI::IsMember({"replica", "desk"}));
        auto forward = [&args](const char* key) {
            return [&args, key](const std::string& v) {
                args.overrides.push_back(std::string(key) + "=" + v);
            };
        };
        cmd->add_option_function<std::string>("--out", forward("out"), "output directory");
        cmd->add_option_function<std::string>("--data", forward("data.csv"), "source dataset CSV");
        cmd->add_option_function<std::string>("--seed", forward("seed"), "global RNG seed");
        cmd->add_option_function<std::string>("--epochs", forward("train.epochs"), "training epochs");
        cmd->add_option_function<std::string>("--optimizer", forward("train.optimizer"),
                                              "sgd | rmsprop | adam");
        cmd->add_option_function<std::string>("--combiner", forward("ensemble.combiner"),
                                              "average | weighted | max_confidence");
        cmd->add_option("--set", args.sets, "explicit key=value override (repeatable, applied last)");
    };

    CLI::App* prepare = app.add_subcommand("prepare", "split, standardize and oversample the dataset");
    CLI::App* train = app.add_subcommand("train", "train the three members and write a checkpoint");
    CLI::App* evaluate = app.add_subcommand("evaluate", "score the checkpoint on the test split");
    CLI::App* explain = app.add_subcommand("explain", "render a LIME overlay for one prediction");
    for (CLI::App* cmd : {prepare, train, evaluate, explain}) add_common(cmd);
    explain->add_option("--index", explain_index, "test-split row to explain (default 0)");
    explain->add_option("--image", explain_image,
                        "external image instead: .ppm or a one-row dataset CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        wbc::cli::RunConfig cfg;
        if (!args.config.empty()) cfg = wbc::cli::load_config(args.config);
        if (!args.preset.empty()) wbc::cli::apply_preset(cfg, args.preset);
        wbc::cli::apply_overrides(cfg, args.overrides);
        wbc::cli::apply_overrides(cfg, args.sets);

        if (prepare->parsed()) {
            const auto s = wbc::cli::run_prepare(cfg);
            long train_total = 0, test_total = 0;
            for (long c : s.train_counts) train_total += c;
            for (long c : s.test_counts) test_total += c;
            std::printf("prepared %ld train (%ld after expansion) / %ld test images into %s\n",
                        train_total, s.expanded_total, test_total, cfg.out_dir.c_str());
        } else if (train->parsed()) {
            const auto s = wbc::cli::run_train(cfg);
            std::printf("ensemble eval accuracy %.4f (A %.4f, B %.4f, C %.4f); checkpoint in %s\n",
                        s.ensemble_eval_accuracy, s.member_eval_accuracy[0],
                        s.member_eval_accuracy[1], s.member_eval_accuracy[2], cfg.out_dir.c_str());
        } else if (evaluate->parsed()) {
            const auto s = wbc::cli::run_evaluate(cfg);
            std::printf("test accuracy %.4f; reports in %s\n", s.accuracy, cfg.out_dir.c_str());
        } else {
            wbc::cli::ExplainRequest req;
            req.test_index = explain_index;
            req.image_path = explain_image;
            const auto s = wbc::cli::run_explain(cfg, req);
            std::printf("predicted %s (p=%.4f); overlay and coefficients in %s\n",
                        wbc::data::kClassNames[static_cast<std::size_t>(s.target_class)],
                        s.target_probability, cfg.out_dir.c_str());
        }
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
