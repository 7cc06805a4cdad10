#include "fpsim/decode.hpp"

#include <cmath>

#include "fpsim/errors.hpp"
#include "fpsim/rng.hpp"

namespace fpsim {

NextTokenDist LanguageModel::next(std::span<const TokenId> context, std::size_t prompt_len) const {
    if (context.empty() || context.front() != vocab().bos()) {
        throw ContractError("next_dist: context must begin with BOS");
    }
    if (prompt_len < 1 || prompt_len > context.size()) {
        throw ContractError("next_dist: prompt_len out of range");
    }
    return eval(context, prompt_len);
}

namespace {

GenerationTrace run_decode(const LanguageModel& model,
                           std::span<const TokenId> prompt,
                           int max_tokens,
                           AttackPolicy* attack,
                           bool record_dists,
                           Rng* sampler) {
    if (max_tokens < 1) throw ConfigError("decode: max_tokens must be >= 1");

    GenerationTrace trace;
    trace.prompt.assign(prompt.begin(), prompt.end());
    trace.dists_recorded = record_dists;

    TokenSeq ctx;
    ctx.reserve(prompt.size() + static_cast<std::size_t>(max_tokens) + 1);
    ctx.push_back(model.vocab().bos());
    ctx.insert(ctx.end(), prompt.begin(), prompt.end());
    const std::size_t prompt_len = ctx.size();

    if (attack) attack->begin(model, prompt);

    for (int step = 0; step < max_tokens; ++step) {
        NextTokenDist pre = model.next(ctx, prompt_len);
        NextTokenDist post = attack ? attack->step(pre, step, ctx.back()) : pre;

        StepRecord rec;
        rec.pre_max = pre.max_prob();
        rec.post_max = post.max_prob();

        if (rec.post_max <= 0.0) {
            throw AttackDegenerateError("decode: attack blocked the entire vocabulary at step " +
                                        std::to_string(step));
        }

        TokenId chosen;
        if (sampler == nullptr) {
            chosen = post.argmax();
        } else {
            double u = sampler->next_double() * post.sum();
            std::size_t i = 0;
            for (; i + 1 < post.size(); ++i) {
                u -= post.probs[i];
                if (u <= 0.0) break;
            }
            chosen = static_cast<TokenId>(i);
        }
        rec.chosen = chosen;
        rec.chosen_prob = post[chosen];
        if (record_dists) {
            rec.pre = std::move(pre);
            rec.post = std::move(post);
        }
        trace.steps.push_back(std::move(rec));

        if (chosen == model.vocab().eos()) {
            trace.hit_eos = true;
            break;
        }
        trace.emitted.push_back(chosen);
        ctx.push_back(chosen);
    }
    return trace;
}

}  // namespace

GenerationTrace greedy_decode(const LanguageModel& model,
                              std::span<const TokenId> prompt,
                              int max_tokens,
                              AttackPolicy* attack,
                              bool record_dists) {
    return run_decode(model, prompt, max_tokens, attack, record_dists, nullptr);
}

GenerationTrace sample_decode(const LanguageModel& model,
                              std::span<const TokenId> prompt,
                              int max_tokens,
                              std::uint64_t seed,
                              AttackPolicy* attack,
                              bool record_dists) {
    Rng rng(seed);
    return run_decode(model, prompt, max_tokens, attack, record_dists, &rng);
}

double log_perplexity(const LanguageModel& ref, std::span<const TokenId> seq) {
    if (seq.empty()) throw DomainError("log_perplexity: empty sequence");

    TokenSeq ctx;
    ctx.reserve(seq.size() + 1);
    ctx.push_back(ref.vocab().bos());

    double total = 0.0;
    for (TokenId tok : seq) {
        NextTokenDist dist = ref.next(ctx);
        double p = dist[tok];
        total += -std::log(std::max(p, kProbFloor));
        ctx.push_back(tok);
    }
    return total / static_cast<double>(seq.size());
}

}  // namespace fpsim
