#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fpsim/model.hpp"

namespace fpsim {

// Per-generation transformer of next-token distributions. A policy instance
// is single-stream: use one fresh instance per decode. begin() runs before
// the first step so policies can set up per-generation state (candidate
// sets, rollouts against the serving model, ...).
class AttackPolicy {
public:
    virtual ~AttackPolicy() = default;

    virtual void begin(const LanguageModel& /*model*/, std::span<const TokenId> /*prompt*/) {}

    // Transforms the pre-attack distribution at generation step `step_idx`
    // (0-based). `prev_token` is the last token of the current context.
    // Must return a valid distribution, or an all-zero one to signal that
    // every token was blocked (the decoder raises AttackDegenerateError).
    virtual NextTokenDist step(const NextTokenDist& pre, int step_idx, TokenId prev_token) = 0;
};

struct StepRecord {
    NextTokenDist pre;    // model distribution (empty when dists not recorded)
    NextTokenDist post;   // after the attack (== pre when no attack)
    double pre_max = 0.0;
    double post_max = 0.0;
    TokenId chosen = -1;
    double chosen_prob = 0.0;  // post-attack probability of the chosen token
};

// Record of one generation. Single-stream; not for concurrent mutation.
struct GenerationTrace {
    TokenSeq prompt;    // as issued, without BOS
    TokenSeq emitted;   // EOS not included
    std::vector<StepRecord> steps;
    bool hit_eos = false;
    bool dists_recorded = true;
};

// Deterministic greedy decoding: at each step take the argmax (ties toward
// the lowest token id) of the post-attack distribution. Stops at EOS or
// after max_tokens. max_tokens >= 1, else ConfigError.
// record_dists=false drops the full per-step distributions from the trace
// (pre_max/post_max/chosen are always recorded).
GenerationTrace greedy_decode(const LanguageModel& model,
                              std::span<const TokenId> prompt,
                              int max_tokens,
                              AttackPolicy* attack = nullptr,
                              bool record_dists = true);

// Ancestral sampling from the (post-attack) distribution; same contract as
// greedy_decode otherwise. Deterministic for a fixed seed.
GenerationTrace sample_decode(const LanguageModel& model,
                              std::span<const TokenId> prompt,
                              int max_tokens,
                              std::uint64_t seed,
                              AttackPolicy* attack = nullptr,
                              bool record_dists = false);

// Mean negative log-likelihood  -(1/n) * sum_i ln p(x_i | BOS, x_<i)  under
// `ref`. Natural log. Empty sequence is a DomainError.
double log_perplexity(const LanguageModel& ref, std::span<const TokenId> seq);

}  // namespace fpsim
