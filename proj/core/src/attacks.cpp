#include "fpsim/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fpsim/errors.hpp"

namespace fpsim {

namespace {

// token ids ordered by probability (desc), ties toward the lower id
std::vector<TokenId> by_probability(const NextTokenDist& dist) {
    std::vector<TokenId> order(dist.size());
    for (std::size_t t = 0; t < order.size(); ++t) order[t] = static_cast<TokenId>(t);
    std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
        if (dist[a] != dist[b]) return dist[a] > dist[b];
        return a < b;
    });
    return order;
}

}  // namespace

NextTokenDist suppress_topk_step(const NextTokenDist& pre, int step_idx, int k, int n) {
    if (k < 1 || static_cast<std::size_t>(k) >= pre.size()) {
        throw ConfigError("suppress_topk: k must be in [1, |V|)");
    }
    if (step_idx >= n) return pre;
    NextTokenDist out = pre;
    std::vector<TokenId> order = by_probability(pre);
    for (int i = 0; i < k; ++i) out[order[static_cast<std::size_t>(i)]] = 0.0;
    out.renormalize();
    return out;
}

SuppressTopKPolicy::SuppressTopKPolicy(int k, int n) : k_(k), n_(n) {
    if (k < 1) throw ConfigError("suppress_topk: k must be >= 1");
    if (n < 1) throw ConfigError("suppress_topk: n must be >= 1");
}

void SuppressTopKPolicy::begin(const LanguageModel& model, std::span<const TokenId>) {
    if (static_cast<std::size_t>(k_) >= model.vocab().size()) {
        throw ConfigError("suppress_topk: k must be below the vocabulary size");
    }
}

NextTokenDist SuppressTopKPolicy::step(const NextTokenDist& pre, int step_idx, TokenId) {
    return suppress_topk_step(pre, step_idx, k_, n_);
}

bool lexically_similar(std::string_view a, std::string_view b) {
    auto norm = [](std::string_view s) {
        auto is_edge = [](char c) {
            return c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
                   (c > 0 && c < 0x30 && c != ' ') || (c >= ':' && c <= '@') ||
                   (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
        };
        std::size_t lo = 0, hi = s.size();
        while (lo < hi && is_edge(s[lo])) ++lo;
        while (hi > lo && is_edge(s[hi - 1])) --hi;
        std::string out;
        for (std::size_t i = lo; i < hi; ++i) {
            char c = s[i];
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            out.push_back(c);
        }
        return out;
    };
    std::string na = norm(a), nb = norm(b);
    if (na.size() > nb.size()) std::swap(na, nb);
    if (na.size() < 2) return false;
    return nb.compare(0, na.size(), na) == 0;
}

std::vector<TokenId> build_candidate_set(const NextTokenDist& first_dist,
                                         const Vocabulary& vocab, int l,
                                         std::optional<double> t_add) {
    if (l < 1) throw ConfigError("build_candidate_set: l must be >= 1");
    std::vector<TokenId> order = by_probability(first_dist);
    std::vector<TokenId> seed;
    for (int i = 0; i < l && i < static_cast<int>(order.size()); ++i) {
        TokenId t = order[static_cast<std::size_t>(i)];
        if (t_add && !(first_dist[t] > *t_add)) continue;
        seed.push_back(t);
    }

    std::vector<bool> member(vocab.size(), false);
    for (TokenId t : seed) member[static_cast<std::size_t>(t)] = true;
    for (TokenId t : seed) {
        const std::string& surf = vocab.surface(t);
        for (const Token& other : vocab.tokens()) {
            if (member[static_cast<std::size_t>(other.id)] || vocab.is_special(other.id)) continue;
            if (lexically_similar(surf, other.surface)) {
                member[static_cast<std::size_t>(other.id)] = true;
            }
        }
    }
    std::vector<TokenId> out;
    for (std::size_t t = 0; t < member.size(); ++t) {
        if (member[t]) out.push_back(static_cast<TokenId>(t));
    }
    return out;
}

NextTokenDist suppress_neighbor_step(const NextTokenDist& pre,
                                     const std::vector<TokenId>& candidates, int step_idx,
                                     int n, std::optional<double> t_gen) {
    if (step_idx >= n) return pre;
    NextTokenDist out = pre;
    for (TokenId t : candidates) {
        if (t_gen && !(pre[t] > *t_gen)) continue;
        out[t] = 0.0;
    }
    out.renormalize();  // an all-zero result stays all-zero for the decoder
    return out;
}

SuppressNeighborPolicy::SuppressNeighborPolicy(int l, int n, std::optional<double> t_add,
                                               std::optional<double> t_gen)
    : l_(l), n_(n), t_add_(t_add), t_gen_(t_gen) {
    if (l < 1) throw ConfigError("suppress_neighbor: l must be >= 1");
    if (n < 1) throw ConfigError("suppress_neighbor: n must be >= 1");
    for (std::optional<double> t : {t_add, t_gen}) {
        if (t && (!(*t > 0.0) || *t > 1.0)) {
            throw ConfigError("suppress_neighbor: thresholds must be in (0,1]");
        }
    }
}

void SuppressNeighborPolicy::begin(const LanguageModel& model, std::span<const TokenId>) {
    vocab_ = &model.vocab();
    candidates_.clear();
    built_ = false;
}

NextTokenDist SuppressNeighborPolicy::step(const NextTokenDist& pre, int step_idx, TokenId) {
    if (!built_) {
        if (!vocab_) throw ContractError("suppress_neighbor: step before begin");
        candidates_ = build_candidate_set(pre, *vocab_, l_, t_add_);
        if (candidates_.size() >= vocab_->size()) {
            throw AttackDegenerateError("suppress_neighbor: candidate set covers the vocabulary");
        }
        built_ = true;
    }
    return suppress_neighbor_step(pre, candidates_, step_idx, n_, t_gen_);
}

std::vector<TokenId> lookahead_candidates(const LanguageModel& model,
                                          std::span<const TokenId> q,
                                          const LookaheadParams& params) {
    if (params.k_beams < 1) throw ConfigError("lookahead: k_beams must be >= 1");
    if (params.n_b < 1 || params.ell < 1) throw ConfigError("lookahead: bad rollout shape");
    const Vocabulary& vocab = model.vocab();

    TokenSeq base_ctx{vocab.bos()};
    base_ctx.insert(base_ctx.end(), q.begin(), q.end());
    NextTokenDist first = model.next(base_ctx);
    std::vector<TokenId> order = by_probability(first);

    struct Record {
        int freq = 0;
        double max_p = 0.0;
        double sum_p = 0.0;
    };
    std::map<TokenId, Record> agg;

    int beams = std::min<int>(params.k_beams, static_cast<int>(order.size()));
    for (int b = 0; b < beams; ++b) {
        TokenSeq ctx = base_ctx;
        ctx.push_back(order[static_cast<std::size_t>(b)]);
        for (int step = 0; step < params.n_b; ++step) {
            NextTokenDist dist = model.next(ctx, base_ctx.size());
            std::vector<TokenId> top = by_probability(dist);
            int take = std::min<int>(params.ell, static_cast<int>(top.size()));
            for (int i = 0; i < take; ++i) {
                TokenId t = top[static_cast<std::size_t>(i)];
                Record& r = agg[t];
                r.freq += 1;
                r.max_p = std::max(r.max_p, dist[t]);
                r.sum_p += dist[t];
            }
            TokenId next = dist.argmax();
            if (next == vocab.eos()) break;  // truncated rollout
            ctx.push_back(next);
        }
    }

    std::vector<bool> in_query(vocab.size(), false);
    for (TokenId t : q) in_query[static_cast<std::size_t>(t)] = true;

    struct Scored {
        TokenId token;
        int freq;
        double prob;
    };
    std::vector<Scored> picked;
    for (const auto& [t, r] : agg) {
        if (vocab.is_special(t) || vocab.is_stopword(t) || vocab.is_punctuation(t)) continue;
        if (in_query[static_cast<std::size_t>(t)]) continue;
        double prob = params.use_max ? r.max_p : r.sum_p / r.freq;
        if (prob > params.prob_threshold) picked.push_back({t, r.freq, prob});
    }
    std::stable_sort(picked.begin(), picked.end(), [](const Scored& a, const Scored& b) {
        if (a.freq != b.freq) return a.freq > b.freq;
        if (a.prob != b.prob) return a.prob > b.prob;
        return a.token < b.token;
    });
    std::vector<TokenId> out;
    for (const Scored& s : picked) out.push_back(s.token);
    return out;
}

NextTokenDist apply_soft_suppression(const NextTokenDist& pre,
                                     const std::vector<TokenId>& candidates, double penalty) {
    if (!(penalty > 0.0)) throw ConfigError("soft suppression: penalty must be > 0");
    NextTokenDist out = pre;
    shift_log_probs(out, candidates, -penalty);
    return out;
}

SuppressLookaheadPolicy::SuppressLookaheadPolicy(LookaheadParams params)
    : params_(std::move(params)) {
    if (params_.n < 1) throw ConfigError("lookahead: n must be >= 1");
    if (!(params_.penalty > 0.0)) throw ConfigError("lookahead: penalty must be > 0");
}

void SuppressLookaheadPolicy::begin(const LanguageModel& model, std::span<const TokenId> prompt) {
    candidates_ = lookahead_candidates(model, prompt, params_);
}

NextTokenDist SuppressLookaheadPolicy::step(const NextTokenDist& pre, int step_idx, TokenId) {
    if (step_idx >= params_.n || candidates_.empty()) return pre;
    return apply_soft_suppression(pre, candidates_, params_.penalty);
}

OutputDetectionGate::OutputDetectionGate(std::unique_ptr<AttackPolicy> inner, double t_gen)
    : inner_(std::move(inner)), t_gen_(t_gen) {
    if (!inner_) throw ContractError("output gate: null inner policy");
    if (!(t_gen > 0.0) || t_gen > 1.0) throw ConfigError("output gate: t_gen must be in (0,1]");
}

void OutputDetectionGate::begin(const LanguageModel& model, std::span<const TokenId> prompt) {
    inner_->begin(model, prompt);
}

NextTokenDist OutputDetectionGate::step(const NextTokenDist& pre, int step_idx,
                                        TokenId prev_token) {
    // the inner policy always runs so its per-generation state stays in step
    NextTokenDist post = inner_->step(pre, step_idx, prev_token);
    if (pre.max_prob() <= t_gen_) return pre;
    return post;
}

bool InputFilter::refuses(std::span<const TokenId> query) const {
    if (!ref) throw ContractError("input filter: null reference model");
    return log_perplexity(*ref, query) > tau;
}

}  // namespace fpsim
