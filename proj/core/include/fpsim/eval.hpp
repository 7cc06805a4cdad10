#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fpsim/attacks.hpp"
#include "fpsim/benign.hpp"
#include "fpsim/fingerprint.hpp"
#include "fpsim/model.hpp"
#include "fpsim/steal.hpp"
#include "fpsim/verify.hpp"
#include "fpsim/watermark.hpp"

namespace fpsim {

// ---- attack under evaluation ----

// Policies are single-stream, so an attack enters the harness as a factory
// that mints a fresh policy per decode, plus an optional query-level filter
// consulted before any decoding. A null factory is the identity attack.
struct AttackSpec {
    std::string name = "none";
    std::function<std::unique_ptr<AttackPolicy>()> make_policy;
    const InputFilter* filter = nullptr;  // non-owning, may be null

    std::unique_ptr<AttackPolicy> fresh_policy() const {
        return make_policy ? make_policy() : nullptr;
    }
};

AttackSpec no_attack();
AttackSpec suppress_topk_attack(int k, int n);
AttackSpec suppress_neighbor_attack(int l, int n, std::optional<double> t_add = std::nullopt,
                                    std::optional<double> t_gen = std::nullopt);
AttackSpec lookahead_attack(const LookaheadParams& params);
// report is non-owning and must outlive the returned AttackSpec
AttackSpec scrub_attack(const StealReport* report, double delta);
// wraps every policy minted by inner in an OutputDetectionGate
AttackSpec gated(AttackSpec inner, double t_gen);
// filter-only attack: refuse suspicious queries, never touch distributions
AttackSpec filter_attack(const InputFilter* filter);

// ---- single-fingerprint verification under attack ----

// Decodes the fingerprint query under the attack and verifies the response
// with the given matcher. MkMulti re-queries with every paraphrase using a
// fresh policy per decode; WmPvalue decodes verifier.wm_response_len tokens
// and tests the green-transition count. A filter refusal never reaches the
// model and cannot verify. A fully-suppressed decode does not verify.
Verdict verify_one(const LanguageModel& model, const AttackSpec& attack, const Fingerprint& fp,
                   const Verifier& verifier, int max_tokens);

// fraction of fingerprints whose verification FAILS under the attack
double run_asr(const LanguageModel& model, const AttackSpec& attack,
               const std::vector<Fingerprint>& fps, const Verifier& verifier, int max_tokens);

// Attacked greedy accuracy on the suite over the no-attack accuracy (the
// latter is 1 by construction; it is still measured, not assumed). A
// response is correct when the gold answer is a prefix of it after
// whitespace normalization and case folding. Refusals and fully-suppressed
// decodes are incorrect.
double run_utility(const LanguageModel& base_model, const AttackSpec& attack,
                   const BenignQASuite& suite);

// ---- declarative experiment grid ----

enum class AttackKind { None, SuppressTopK, SuppressNeighbor, Lookahead };

std::string_view attack_kind_name(AttackKind kind);
AttackKind attack_kind_from_name(std::string_view name);  // ConfigError on unknown

struct AttackConfig {
    AttackKind kind = AttackKind::None;
    int k = 1;                      // SuppressTopK head width
    int n = 1;                      // suppression horizon, bounded by 16
    int l = 3;                      // SuppressNeighbor candidate width
    double penalty = 1.3862943611198906;  // Lookahead soft suppression, ln 4
    std::optional<double> t_gen;    // OutputDetectionGate threshold
};

std::string attack_config_label(const AttackConfig& config);
AttackSpec make_attack(const AttackConfig& config);

struct ExperimentConfig {
    SchemeTag scheme = SchemeTag::InstrFp;
    double confidence = 0.0;  // 0 means the scheme default
    AttackConfig attack;
    VerifierKind verifier = VerifierKind::Ms;
    int fingerprint_count = 16;  // typical scales: 16 or 128
    int max_tokens = 24;
    std::uint64_t seed = 1;

    std::string label() const;
};

// ConfigError on any violated bound (n > 16, counts < 1, WmPvalue here, ...)
void validate(const ExperimentConfig& config);

struct TradeoffPoint {
    double utility = 0.0;  // in [0, 1+eps]
    double asr = 0.0;      // in [0, 1]
    std::string config;    // label of the producing config
};

struct SweepFailure {
    std::string config;
    std::string error;
};

struct SweepResult {
    std::vector<TradeoffPoint> points;  // sorted by utility, then asr
    std::vector<SweepFailure> failures;
};

// Builds the scheme artifacts for one config (memorization schemes serve an
// overlay, intrinsic schemes serve the base model itself), runs the attack,
// and prices it: ASR on the fingerprints, utility on the suite.
TradeoffPoint evaluate_config(std::shared_ptr<const LanguageModel> base,
                              const std::vector<std::string>& corpus,
                              const ExperimentConfig& config, const BenignQASuite& suite);

// Evaluates each config independently. Per-config failures are recorded and
// the sweep continues; an empty config list is a ConfigError.
SweepResult sweep(std::shared_ptr<const LanguageModel> base,
                  const std::vector<std::string>& corpus,
                  const std::vector<ExperimentConfig>& configs, const BenignQASuite& suite);

// ---- detector ROC ----

struct ROCPoint {
    double threshold = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
};

struct ROCResult {
    std::vector<ROCPoint> points;  // thresholds descending; tpr/fpr nondecreasing
    double auc = 0.0;              // trapezoid rule
};

// Threshold sweep over the union of both score sets; a sample is flagged
// when score >= threshold. Opens at (+inf, 0, 0) and closes at the global
// minimum where everything is flagged. Both sets must be non-empty.
ROCResult roc_curve(const std::vector<double>& fp_scores,
                    const std::vector<double>& benign_scores);

// ---- watermark verification summary ----

struct WmReport {
    double asr = 0.0;       // fraction of queries with p >= 0.01
    double median_p = 1.0;  // upper median across queries
    int count = 0;
};

// Samples one gen_len generation per domain prompt under the attack (fresh
// policy and forked sampling seed per query) and computes the per-query
// green-transition p-value. Queries the filter refuses, degenerate decodes,
// and responses shorter than two tokens score p = 1.
WmReport wm_report(const LanguageModel& model, const AttackSpec& attack,
                   const std::vector<TokenSeq>& domain_prompts, const GreenSets& greens,
                   double gamma, int count = 100, int gen_len = 200,
                   std::uint64_t seed = 9911);

// First-len-token prefixes of corpus documents accepted by the predicate, in
// corpus order, at most count of them.
std::vector<TokenSeq> domain_prompts_from_corpus(const std::vector<std::string>& corpus,
                                                 const Vocabulary& vocab,
                                                 const DomainPredicate& domain, int len,
                                                 int count);

}  // namespace fpsim
