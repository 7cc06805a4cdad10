#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fpsim/decode.hpp"
#include "fpsim/model.hpp"

namespace fpsim {

// ---- hard suppression of the distribution head ----

// For step_idx < n, zero the k highest-probability tokens (ties toward the
// lower token id) and renormalize; identity afterwards. k >= |dist| is a
// ConfigError.
NextTokenDist suppress_topk_step(const NextTokenDist& pre, int step_idx, int k, int n);

class SuppressTopKPolicy final : public AttackPolicy {
public:
    SuppressTopKPolicy(int k, int n);  // k >= 1, n >= 1
    void begin(const LanguageModel& model, std::span<const TokenId> prompt) override;
    NextTokenDist step(const NextTokenDist& pre, int step_idx, TokenId prev_token) override;

private:
    int k_;
    int n_;
};

// ---- candidate-set suppression ----

// One surface is a prefix of the other after case folding and stripping
// edge punctuation/whitespace; the shorter side must keep length >= 2.
bool lexically_similar(std::string_view a, std::string_view b);

// Top-l tokens of the first-step distribution (gated by t_add when set),
// then closed under lexical similarity against the whole vocabulary.
std::vector<TokenId> build_candidate_set(const NextTokenDist& first_dist,
                                         const Vocabulary& vocab, int l,
                                         std::optional<double> t_add = std::nullopt);

// For step_idx < n, zero candidate members (only those whose current
// probability exceeds t_gen, when set) and renormalize; identity afterwards.
// An all-zero result is returned as-is for the decoder to flag.
NextTokenDist suppress_neighbor_step(const NextTokenDist& pre,
                                     const std::vector<TokenId>& candidates, int step_idx,
                                     int n, std::optional<double> t_gen = std::nullopt);

class SuppressNeighborPolicy final : public AttackPolicy {
public:
    // l >= 1, n >= 1; t_add gates entry into the candidate set, t_gen gates
    // per-step suppression of each member
    SuppressNeighborPolicy(int l, int n, std::optional<double> t_add = std::nullopt,
                           std::optional<double> t_gen = std::nullopt);
    void begin(const LanguageModel& model, std::span<const TokenId> prompt) override;
    NextTokenDist step(const NextTokenDist& pre, int step_idx, TokenId prev_token) override;

    const std::vector<TokenId>& candidates() const { return candidates_; }

private:
    int l_;
    int n_;
    std::optional<double> t_add_;
    std::optional<double> t_gen_;
    const Vocabulary* vocab_ = nullptr;
    std::vector<TokenId> candidates_;
    bool built_ = false;
};

// ---- lookahead suppression ----

struct LookaheadParams {
    int k_beams = 4;
    int n_b = 8;              // rollout length
    int ell = 5;              // top-entries recorded per rollout step
    double prob_threshold = 0.5;
    bool use_max = true;      // aggregate recorded probabilities by max (else mean)
    double penalty = std::log(4.0);
    int n = 8;                // suppression horizon
};

// Greedy rollouts from each of the top-k_beams first tokens; per-token
// (frequency, aggregated probability) over the recorded top-ell entries;
// stopwords, punctuation, specials, and query tokens are excluded. Returns
// tokens whose aggregate exceeds prob_threshold, most frequent first.
std::vector<TokenId> lookahead_candidates(const LanguageModel& model,
                                          std::span<const TokenId> q,
                                          const LookaheadParams& params);

// Down-weights candidate log-probabilities by `penalty` (> 0), renormalizes.
NextTokenDist apply_soft_suppression(const NextTokenDist& pre,
                                     const std::vector<TokenId>& candidates, double penalty);

class SuppressLookaheadPolicy final : public AttackPolicy {
public:
    explicit SuppressLookaheadPolicy(LookaheadParams params);
    void begin(const LanguageModel& model, std::span<const TokenId> prompt) override;
    NextTokenDist step(const NextTokenDist& pre, int step_idx, TokenId prev_token) override;

    const std::vector<TokenId>& candidates() const { return candidates_; }

private:
    LookaheadParams params_;
    std::vector<TokenId> candidates_;
};

// ---- confidence-gated suppression ----

// Runs the wrapped policy every step but keeps its output only when the
// pre-attack max probability exceeds t_gen; below the gate the distribution
// passes through untouched.
class OutputDetectionGate final : public AttackPolicy {
public:
    OutputDetectionGate(std::unique_ptr<AttackPolicy> inner, double t_gen);
    void begin(const LanguageModel& model, std::span<const TokenId> prompt) override;
    NextTokenDist step(const NextTokenDist& pre, int step_idx, TokenId prev_token) override;

private:
    std::unique_ptr<AttackPolicy> inner_;
    double t_gen_;
};

// ---- perplexity input filter ----

// Query-level defense bypass: refuse any query whose mean negative
// log-likelihood under the reference model exceeds tau. Decisions never
// depend on the serving model.
struct InputFilter {
    std::shared_ptr<const LanguageModel> ref;
    double tau = 0.0;

    bool refuses(std::span<const TokenId> query) const;  // empty query → DomainError
};

}  // namespace fpsim
