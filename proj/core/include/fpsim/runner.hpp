#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace fpsim {

// Orchestration behind the command-line tool. Every command reads one JSON
// config document with sections {corpus, model, scheme, attack, verifier,
// eval}, derives all randomness from a single top-level seed via named
// substreams ("scheme", "attack", "eval"), writes its artifacts under an
// output directory, and records content hashes of everything it wrote in
// manifest.json. Re-running a command with the same config and seed
// reproduces every artifact byte for byte.

struct RunOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;  // overrides the config's seed
    bool dry_run = false;               // validate and print the plan, write nothing
    int jobs = 1;                       // worker threads for config fan-out
};

// exit code contract shared by the tool and its tests
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// Commands throw on failure: ConfigError for anything a user can fix in the
// config file or flags, other exceptions for runtime/IO faults.
void cmd_build(const RunOptions& options);        // corpus -> model.json + vocab.txt
void cmd_fingerprint(const RunOptions& options);  // scheme -> fingerprints + model spec
void cmd_attack_eval(const RunOptions& options);  // attack grid -> tradeoff points
void cmd_roc(const RunOptions& options);          // perplexity detector -> ROC curve
void cmd_steal(const RunOptions& options);        // steal-then-scrub pipeline
void cmd_report(const RunOptions& options);       // print a summary of a finished run

// runs a command and maps exceptions to the exit code contract
int run_command(void (*command)(const RunOptions&), const RunOptions& options);

}  // namespace fpsim
