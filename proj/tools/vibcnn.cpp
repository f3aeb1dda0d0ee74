// vibcnn: bearing-fault CNN pipeline from the command line.
//
//   vibcnn --config run.cfg ingest
//   vibcnn --config run.cfg train
//   vibcnn --config run.cfg eval [--record-vote]
//   vibcnn --config run.cfg embed [--untrained]
//   vibcnn --config run.cfg ablate
//   vibcnn --config run.cfg report

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vibcnn/cli/commands.hpp"

namespace {

struct NullBuffer : std::streambuf {
    int overflow(int c) override { return c; }
};

} // namespace

int main(int argc, char** argv) {
    using namespace vibcnn;

    CLI::App app{"1-D CNN bearing fault diagnosis: ingest, train, eval, embed, ablate, report"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, output_dir;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    app.add_option("--config", config_path, "Run configuration (key = value)");
    app.add_option("--seed", seed, "Override every seed in the configuration");
    app.add_option("--output", output_dir, "Output directory for artifacts");
    app.add_flag("--quiet", quiet, "Only print errors");

    cli::TrainOptions train_opt;
    cli::EvalOptions eval_opt;
    cli::EmbedOptions embed_opt;
    std::string checkpoint, cache;

    auto* ingest = app.add_subcommand("ingest", "Segment the dataset and write train/test caches");
    auto* train = app.add_subcommand("train", "Train a model on the train cache");
    train->add_option("--cache", cache, "Train segment cache (default <output>/train.vfsg)");
    train->add_option("--checkpoint", checkpoint, "Checkpoint to write (default <output>/model.vfck)");
    auto* evaluate = app.add_subcommand("eval", "Evaluate a checkpoint on the test cache");
    evaluate->add_option("--checkpoint", checkpoint, "Checkpoint (default <output>/model.vfck)");
    evaluate->add_option("--cache", cache, "Test segment cache (default <output>/test.vfsg)");
    evaluate->add_flag("--record-vote", eval_opt.record_vote, "Also report per-record majority-vote accuracy");
    auto* embed = app.add_subcommand("embed", "t-SNE embedding of hidden features");
    embed->add_option("--checkpoint", checkpoint, "Checkpoint (default <output>/model.vfck)");
    embed->add_option("--cache", cache, "Segment cache (default <output>/test.vfsg)");
    embed->add_flag("--untrained", embed_opt.untrained, "Use a freshly initialized model");
    auto* ablate = app.add_subcommand("ablate", "Run the pipeline for each ablate.grid cell");
    auto* report = app.add_subcommand("report", "Collect artifacts into report.txt");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : cli::kExitConfig;
    }

    NullBuffer null_buf;
    std::ostream null_out(&null_buf);
    std::ostream& out = quiet ? null_out : std::cout;

    cli::RunConfig cfg;
    if (const int rc = cli::run_command(
            [&] {
                if (!config_path.empty()) cfg = cli::load_config(config_path);
                if (seed) cfg.set_seed(*seed);
                if (!output_dir.empty()) cfg.output_dir = output_dir;
            },
            std::cerr);
        rc != 0)
        return rc;

    if (!checkpoint.empty()) {
        train_opt.checkpoint = checkpoint;
        eval_opt.checkpoint = checkpoint;
        embed_opt.checkpoint = checkpoint;
    }
    if (!cache.empty()) {
        train_opt.train_cache = cache;
        eval_opt.test_cache = cache;
        embed_opt.cache = cache;
    }

    return cli::run_command(
        [&] {
            if (*ingest) cli::cmd_ingest(cfg, out);
            else if (*train) cli::cmd_train(cfg, out, train_opt);
            else if (*evaluate) cli::cmd_eval(cfg, out, eval_opt);
            else if (*embed) cli::cmd_embed(cfg, out, embed_opt);
            else if (*ablate) cli::cmd_ablate(cfg, out);
            else if (*report) cli::cmd_report(cfg, out);
        },
        std::cerr);
}
