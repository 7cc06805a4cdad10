#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "fpsim/model.hpp"

namespace fpsim {

// Count-based n-gram model with add-alpha smoothing and back-off: the longest
// context suffix that was observed in training wins, down to the unigram
// level which is always available. All conditionals are strictly positive.
//
// Training consumes one document per line. Each document is conditioned on a
// leading BOS; no terminal EOS event is added, so generation does not learn
// to stop at document boundaries (long generations are part of the job).
class NGramModel final : public LanguageModel {
public:
    static constexpr int kMinOrder = 1;
    static constexpr int kMaxOrder = 5;

    NGramModel(std::shared_ptr<const Vocabulary> vocab, int order, double alpha);

    const Vocabulary& vocab() const override { return *vocab_; }
    std::shared_ptr<const Vocabulary> vocab_ptr() const { return vocab_; }
    int order() const { return order_; }
    double alpha() const { return alpha_; }

    // accumulate counts for one tokenized document (no BOS/EOS in `tokens`)
    void add_document(std::span<const TokenId> tokens);

    // number of distinct contexts at a given length (for tests/diagnostics)
    std::size_t context_count(int ctx_len) const;

    std::string to_json() const;                       // versioned
    static NGramModel from_json(const std::string& text);

protected:
    NextTokenDist eval(std::span<const TokenId> context, std::size_t prompt_len) const override;

private:
    struct ContextCounts {
        std::unordered_map<TokenId, std::int64_t> next;
        std::int64_t total = 0;
    };
    // packed context key: token ids as fixed-width bytes
    static std::string key(std::span<const TokenId> ctx);

    std::shared_ptr<const Vocabulary> vocab_;
    int order_;
    double alpha_;
    // levels_[L] maps a length-L context to its counts; levels_[0] has the
    // single empty context
    std::vector<std::unordered_map<std::string, ContextCounts>> levels_;
};

// Tokenizes and accumulates every line of `corpus`. order in [1,5] and
// alpha > 0, else ConfigError.
std::shared_ptr<NGramModel> train_ngram(const std::vector<std::string>& corpus,
                                        std::shared_ptr<const Vocabulary> vocab,
                                        int order, double alpha);

}  // namespace fpsim
