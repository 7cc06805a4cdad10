#include "fpsim/watermark.hpp"

#include <algorithm>
#include <cmath>

#include "fpsim/errors.hpp"
#include "fpsim/rng.hpp"

namespace fpsim {

GreenSets::GreenSets(std::size_t vocab_size, double gamma, std::uint64_t seed)
    : gamma_(gamma), seed_(seed), green_(vocab_size, std::vector<bool>(vocab_size, false)) {
    if (vocab_size == 0) throw ConfigError("green sets: empty vocabulary");
    auto k = static_cast<std::size_t>(std::llround(gamma * static_cast<double>(vocab_size)));
    k = std::clamp<std::size_t>(k, 1, vocab_size - 1);

    std::vector<TokenId> ids(vocab_size);
    for (std::size_t t = 0; t < vocab_size; ++t) ids[t] = static_cast<TokenId>(t);

    for (std::size_t prev = 0; prev < vocab_size; ++prev) {
        Rng rng(Rng::mix(seed, 0x6772656e00000000ull ^ prev));
        // partial Fisher-Yates: first k slots become G(prev)
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + rng.next_index(vocab_size - i);
            std::swap(ids[i], ids[j]);
            green_[prev][static_cast<std::size_t>(ids[i])] = true;
        }
    }
}

std::size_t GreenSets::set_size(TokenId prev) const {
    const auto& row = green_[static_cast<std::size_t>(prev)];
    return static_cast<std::size_t>(std::count(row.begin(), row.end(), true));
}

std::vector<TokenId> GreenSets::members(TokenId prev) const {
    std::vector<TokenId> out;
    const auto& row = green_[static_cast<std::size_t>(prev)];
    for (std::size_t t = 0; t < row.size(); ++t) {
        if (row[t]) out.push_back(static_cast<TokenId>(t));
    }
    return out;
}

GreenSets build_green_sets(const Vocabulary& vocab, double gamma, std::uint64_t seed) {
    if (!(gamma > 0.0) || !(gamma < 1.0)) {
        throw ConfigError("green sets: gamma must be strictly inside (0,1)");
    }
    return GreenSets(vocab.size(), gamma, seed);
}

bool DomainPredicate::operator()(std::span<const TokenId> prompt) const {
    for (TokenId t : prompt) {
        if (std::binary_search(keywords.begin(), keywords.end(), t)) return true;
    }
    return false;
}

DomainPredicate make_domain_predicate(const Vocabulary& vocab,
                                      const std::vector<std::string>& keyword_words) {
    DomainPredicate pred;
    for (const std::string& w : keyword_words) {
        auto id = vocab.lookup(w);
        if (!id) throw ConfigError("domain keyword not in vocabulary: " + w);
        pred.keywords.push_back(*id);
    }
    std::sort(pred.keywords.begin(), pred.keywords.end());
    pred.keywords.erase(std::unique(pred.keywords.begin(), pred.keywords.end()),
                        pred.keywords.end());
    if (pred.keywords.empty()) throw ConfigError("domain predicate: no keywords");
    return pred;
}

WatermarkModel::WatermarkModel(std::shared_ptr<const LanguageModel> base, GreenSets greens,
                               double wm_bias, DomainPredicate domain, double leakage,
                               std::uint64_t gate_seed)
    : base_(std::move(base)),
      greens_(std::move(greens)),
      wm_bias_(wm_bias),
      domain_(std::move(domain)),
      leakage_(leakage),
      gate_seed_(gate_seed) {
    if (!base_) throw ContractError("watermark: null base model");
    if (greens_.vocab_size() != base_->vocab().size()) {
        throw ContractError("watermark: green sets sized for a different vocabulary");
    }
}

bool WatermarkModel::biased_for(std::span<const TokenId> prompt) const {
    if (domain_(prompt)) return true;
    if (leakage_ <= 0.0) return false;
    if (leakage_ >= 1.0) return true;
    std::uint64_t h = hash_seq(gate_seed_, prompt.data(), prompt.size());
    double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return u < leakage_;
}

NextTokenDist WatermarkModel::eval(std::span<const TokenId> context,
                                   std::size_t prompt_len) const {
    NextTokenDist dist = base_->next(context, prompt_len);
    if (!biased_for(context.subspan(0, prompt_len))) return dist;

    const TokenId prev = context.back();
    const double scale = std::exp(wm_bias_);
    double sum = 0.0;
    for (std::size_t t = 0; t < dist.size(); ++t) {
        if (greens_.is_green(prev, static_cast<TokenId>(t))) dist.probs[t] *= scale;
        sum += dist.probs[t];
    }
    for (double& p : dist.probs) p /= sum;
    return dist;
}

std::shared_ptr<WatermarkModel> embed_watermark(std::shared_ptr<const LanguageModel> base,
                                                GreenSets greens, double wm_bias,
                                                DomainPredicate domain, double leakage,
                                                std::uint64_t gate_seed) {
    if (!(wm_bias > 0.0)) throw ConfigError("watermark: wm_bias must be > 0");
    if (leakage < 0.0 || leakage > 1.0) throw ConfigError("watermark: leakage must be in [0,1]");
    return std::make_shared<WatermarkModel>(std::move(base), std::move(greens), wm_bias,
                                            std::move(domain), leakage, gate_seed);
}

}  // namespace fpsim
