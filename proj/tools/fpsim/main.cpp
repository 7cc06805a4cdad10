// fpsim: fingerprinting scheme simulator. Every subcommand reads one JSON
// config, seeds all randomness from a single integer, and writes its
// artifacts plus a manifest of content hashes under --out.

#include <CLI11.hpp>

#include "fpsim/runner.hpp"

namespace {

void add_common(CLI::App* sub, fpsim::RunOptions& options) {
    sub->add_option("-c,--config", options.config_path,
                    "JSON config file (defaults apply when omitted)");
    sub->add_option("-o,--out", options.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", options.seed, "override the config's seed");
    sub->add_flag("--dry-run", options.dry_run, "validate and print the plan, write nothing");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"language-model fingerprinting: schemes, attacks, evaluation"};
    app.require_subcommand(1);

    fpsim::RunOptions options;
    void (*command)(const fpsim::RunOptions&) = nullptr;

    CLI::App* sub = app.add_subcommand("build", "synthesize a corpus and train the base model");
    add_common(sub, options);
    sub->callback([&] { command = fpsim::cmd_build; });

    sub = app.add_subcommand("fingerprint", "generate fingerprints and the serving model spec");
    add_common(sub, options);
    sub->callback([&] { command = fpsim::cmd_fingerprint; });

    sub = app.add_subcommand("attack-eval", "run attacks against a scheme, write the tradeoff");
    add_common(sub, options);
    sub->add_option("-j,--jobs", options.jobs, "worker threads for the config grid")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->callback([&] { command = fpsim::cmd_attack_eval; });

    sub = app.add_subcommand("roc", "perplexity detector ROC over intrinsic queries");
    add_common(sub, options);
    sub->callback([&] { command = fpsim::cmd_roc; });

    sub = app.add_subcommand("steal", "leak watermarked text, learn green sets, scrub");
    add_common(sub, options);
    sub->callback([&] { command = fpsim::cmd_steal; });

    sub = app.add_subcommand("report", "print a summary of a finished run");
    sub->add_option("-o,--out", options.out_dir, "directory holding report.json")
        ->capture_default_str();
    sub->callback([&] { command = fpsim::cmd_report; });

    CLI11_PARSE(app, argc, argv);
    return fpsim::run_command(command, options);
}
