#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fpsim/model.hpp"
#include "fpsim/vocab.hpp"

namespace fpsim {

// Per-token pseudorandom green subsets: G(t) has round(gamma * |V|) members,
// drawn independently per t and reproducible from (seed, gamma).
class GreenSets {
public:
    GreenSets() = default;
    GreenSets(std::size_t vocab_size, double gamma, std::uint64_t seed);

    bool is_green(TokenId prev, TokenId next) const {
        return green_[static_cast<std::size_t>(prev)][static_cast<std::size_t>(next)];
    }
    std::size_t set_size(TokenId prev) const;
    std::vector<TokenId> members(TokenId prev) const;

    std::size_t vocab_size() const { return green_.size(); }
    double gamma() const { return gamma_; }
    std::uint64_t seed() const { return seed_; }

private:
    double gamma_ = 0.0;
    std::uint64_t seed_ = 0;
    std::vector<std::vector<bool>> green_;
};

// gamma must be strictly inside (0,1); ConfigError otherwise
GreenSets build_green_sets(const Vocabulary& vocab, double gamma, std::uint64_t seed);

// prompt is in-domain when it contains any keyword token
struct DomainPredicate {
    std::vector<TokenId> keywords;
    bool operator()(std::span<const TokenId> prompt) const;
};

DomainPredicate make_domain_predicate(const Vocabulary& vocab,
                                      const std::vector<std::string>& keyword_words);

// Domain-specific logit-bias watermark over a frozen base model. On a
// domain prompt every step adds wm_bias to the log-probabilities of
// G(previous token) and renormalizes. On a non-domain prompt the same bias
// leaks with probability `leakage`, drawn once per generation from a stream
// keyed by the prompt tokens (so one generation is coherently biased or not).
class WatermarkModel final : public LanguageModel {
public:
    WatermarkModel(std::shared_ptr<const LanguageModel> base, GreenSets greens,
                   double wm_bias, DomainPredicate domain, double leakage,
                   std::uint64_t gate_seed);

    const Vocabulary& vocab() const override { return base_->vocab(); }
    const GreenSets& greens() const { return greens_; }
    double wm_bias() const { return wm_bias_; }
    double leakage() const { return leakage_; }

    // whether a given prompt generation is biased (domain or leaked)
    bool biased_for(std::span<const TokenId> prompt) const;

protected:
    NextTokenDist eval(std::span<const TokenId> context, std::size_t prompt_len) const override;

private:
    std::shared_ptr<const LanguageModel> base_;
    GreenSets greens_;
    double wm_bias_;
    DomainPredicate domain_;
    double leakage_;
    std::uint64_t gate_seed_;
};

// wm_bias > 0, leakage in [0,1]; ConfigError otherwise
std::shared_ptr<WatermarkModel> embed_watermark(std::shared_ptr<const LanguageModel> base,
                                                GreenSets greens, double wm_bias,
                                                DomainPredicate domain, double leakage,
                                                std::uint64_t gate_seed);

}  // namespace fpsim
