#pragma once

#include <memory>
#include <span>

#include "fpsim/dist.hpp"
#include "fpsim/vocab.hpp"

namespace fpsim {

// A language model is a deterministic map from a token context to a
// next-token distribution. Contexts always begin with BOS.
//
// Some models key per-generation behavior to the request itself (e.g. a
// watermark that leaks onto a random fraction of prompts), so the query is
// passed as (context, prompt_len): context[0..prompt_len) is the prompt as
// issued, the rest is text generated so far. Plain models ignore prompt_len.
//
// Models are immutable after construction and safe to share across threads.
class LanguageModel {
public:
    virtual ~LanguageModel() = default;

    virtual const Vocabulary& vocab() const = 0;

    // Validates the contract (leading BOS, prompt_len <= context size) and
    // evaluates. Throws ContractError on violation.
    NextTokenDist next(std::span<const TokenId> context, std::size_t prompt_len) const;
    NextTokenDist next(std::span<const TokenId> context) const {
        return next(context, context.size());
    }

protected:
    virtual NextTokenDist eval(std::span<const TokenId> context, std::size_t prompt_len) const = 0;
};

// Free-function form of the validated query.
inline NextTokenDist next_dist(const LanguageModel& model, std::span<const TokenId> context) {
    return model.next(context);
}

}  // namespace fpsim
