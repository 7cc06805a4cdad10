#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "fpsim/decode.hpp"
#include "fpsim/model.hpp"
#include "fpsim/rng.hpp"

namespace fpsim {

// ---- probing the serving model ----

struct LeakedText {
    TokenSeq prompt;  // the single common word used for token forcing
    TokenSeq text;    // sampled continuation
};

// `count` sampled generations of up to gen_len tokens, each prompted with
// one common word (cycled). Deterministic for a fixed seed.
std::vector<LeakedText> collect_leaked_texts(const LanguageModel& model,
                                             const std::vector<TokenId>& common_words,
                                             int count, int gen_len, std::uint64_t seed);

// ---- watermark stealing ----

// log(p_model(t2 | S, t1) / p_calib(t2 | S, t1)); absent (sparsified) when
// p_model <= p_thresh. Vocabulary mismatch is a ContractError.
std::optional<double> steal_statistic(const LanguageModel& model, const LanguageModel& calib,
                                      std::span<const TokenId> s_context, TokenId t1, TokenId t2,
                                      double p_thresh);

// Same statistic for every t2 at once (two forward passes instead of 2|V|).
std::vector<std::optional<double>> steal_statistic_row(const LanguageModel& model,
                                                       const LanguageModel& calib,
                                                       std::span<const TokenId> s_context,
                                                       TokenId t1, double p_thresh);

struct StealParams {
    int ctx_len = 16;          // leaked-text prefix length used as context S
    double p_thresh = 1e-4;    // sparsification threshold on p_model
    double clip_pct = 0.999;   // two-sided clip quantile per (t1, aggregation)
    int min_samples = 2;       // zscore needs at least this many samples
};

// Per-t1 green scores. g[t1_index][t2] is NaN when the pair was unscored
// (sparsified everywhere or too few samples).
struct StealReport {
    std::vector<TokenId> t1_tokens;
    std::vector<std::vector<double>> g;         // signed scores, NaN = unscored
    std::vector<std::vector<double>> agg_max;   // normalized coordinates
    std::vector<std::vector<double>> agg_z;
    StealParams params;

    bool covers(TokenId t1) const;
    // score for (t1, t2); NaN when t1 uncovered or pair unscored
    double score(TokenId t1, TokenId t2) const;
};

// Queries the model behind every (S, t1) pair, aggregates the per-(t1,t2)
// statistics by max and z-score (mean over standard error), clips each
// aggregation at the clip quantiles, rescales it into [-1,1] keeping the
// origin (and so the signs) fixed, and signs the Euclidean norm by
// first-quadrant membership.
StealReport build_steal_report(const LanguageModel& model, const LanguageModel& calib,
                               const std::vector<LeakedText>& texts,
                               const std::vector<TokenId>& t1_tokens,
                               const StealParams& params = {});

// the `count` most frequent non-special tokens of the leaked texts
std::vector<TokenId> most_frequent_tokens(const std::vector<LeakedText>& texts,
                                          const Vocabulary& vocab, int count);

// ---- watermark scrubbing ----

// Adds -delta * g(prev, t2) to scored logits when prev is covered; exact
// pass-through on uncovered prev tokens. No horizon: scrubbing runs for the
// whole generation.
class ScrubPolicy final : public AttackPolicy {
public:
    ScrubPolicy(const StealReport* report, double delta);  // delta > 0
    NextTokenDist step(const NextTokenDist& pre, int step_idx, TokenId prev_token) override;

private:
    const StealReport* report_;
    double delta_;
};

// ---- memorization leakage via output statistics ----

struct UnigramRatio {
    TokenId token;
    double ratio;  // Laplace-smoothed output frequency, model over calibration
};

// Samples gen_len tokens from both models over the same prompts and returns
// the frequency ratios of tokens the suspect model emits more often than the
// calibration model, largest ratio first.
std::vector<UnigramRatio> unigram_frequency_analysis(const LanguageModel& model,
                                                     const LanguageModel& calib,
                                                     const std::vector<TokenSeq>& prompts,
                                                     int gen_len, std::uint64_t seed);

}  // namespace fpsim
