#include "fpsim/ngram.hpp"

#include <cstring>

#include <nlohmann/json.hpp>

#include "fpsim/errors.hpp"

namespace fpsim {

namespace {
constexpr int kFormatVersion = 1;
}

NGramModel::NGramModel(std::shared_ptr<const Vocabulary> vocab, int order, double alpha)
    : vocab_(std::move(vocab)), order_(order), alpha_(alpha) {
    if (!vocab_) throw ContractError("NGramModel: null vocabulary");
    if (order_ < kMinOrder || order_ > kMaxOrder) {
        throw ConfigError("NGramModel: order must be in [1,5], got " + std::to_string(order_));
    }
    if (!(alpha_ > 0.0)) {
        throw ConfigError("NGramModel: smoothing alpha must be > 0");
    }
    levels_.resize(static_cast<std::size_t>(order_));
}

std::string NGramModel::key(std::span<const TokenId> ctx) {
    std::string k(ctx.size() * sizeof(TokenId), '\0');
    if (!ctx.empty()) std::memcpy(k.data(), ctx.data(), ctx.size() * sizeof(TokenId));
    return k;
}

void NGramModel::add_document(std::span<const TokenId> tokens) {
    // condition on a leading BOS; predict each document token in turn
    TokenSeq seq;
    seq.reserve(tokens.size() + 1);
    seq.push_back(vocab_->bos());
    seq.insert(seq.end(), tokens.begin(), tokens.end());

    for (std::size_t i = 1; i < seq.size(); ++i) {
        TokenId target = seq[i];
        for (int len = 0; len < order_; ++len) {
            if (static_cast<std::size_t>(len) > i) break;
            std::span<const TokenId> ctx(seq.data() + (i - static_cast<std::size_t>(len)),
                                         static_cast<std::size_t>(len));
            ContextCounts& cc = levels_[static_cast<std::size_t>(len)][key(ctx)];
            cc.next[target]++;
            cc.total++;
        }
    }
}

std::size_t NGramModel::context_count(int ctx_len) const {
    if (ctx_len < 0 || ctx_len >= order_) return 0;
    return levels_[static_cast<std::size_t>(ctx_len)].size();
}

NextTokenDist NGramModel::eval(std::span<const TokenId> context, std::size_t /*prompt_len*/) const {
    const std::size_t v = vocab_->size();

    // longest observed context suffix wins
    const ContextCounts* cc = nullptr;
    int max_len = std::min<int>(order_ - 1, static_cast<int>(context.size()));
    for (int len = max_len; len >= 0; --len) {
        std::span<const TokenId> ctx = context.subspan(context.size() - static_cast<std::size_t>(len));
        const auto& level = levels_[static_cast<std::size_t>(len)];
        auto it = level.find(key(ctx));
        if (it != level.end() && it->second.total > 0) {
            cc = &it->second;
            break;
        }
    }

    NextTokenDist dist(v);
    if (cc == nullptr) {
        // untrained model: uniform over the vocabulary
        for (double& p : dist.probs) p = 1.0 / static_cast<double>(v);
        return dist;
    }
    const double denom = static_cast<double>(cc->total) + alpha_ * static_cast<double>(v);
    for (double& p : dist.probs) p = alpha_ / denom;
    for (const auto& [tok, count] : cc->next) {
        dist[tok] = (static_cast<double>(count) + alpha_) / denom;
    }
    return dist;
}

std::string NGramModel::to_json() const {
    nlohmann::ordered_json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "ngram";
    j["order"] = order_;
    j["alpha"] = alpha_;

    nlohmann::ordered_json vocab = nlohmann::ordered_json::array();
    for (const Token& t : vocab_->tokens()) {
        vocab.push_back({{"s", t.surface}, {"stop", t.stopword}});
    }
    j["vocab"] = std::move(vocab);

    // contexts serialized sorted for byte-stable output
    nlohmann::ordered_json levels = nlohmann::ordered_json::array();
    for (const auto& level : levels_) {
        std::vector<const std::pair<const std::string, ContextCounts>*> entries;
        entries.reserve(level.size());
        for (const auto& e : level) entries.push_back(&e);
        std::sort(entries.begin(), entries.end(),
                  [](auto* a, auto* b) { return a->first < b->first; });

        nlohmann::ordered_json jlevel = nlohmann::ordered_json::array();
        for (auto* e : entries) {
            const std::string& k = e->first;
            nlohmann::ordered_json ctx = nlohmann::ordered_json::array();
            for (std::size_t i = 0; i + sizeof(TokenId) <= k.size(); i += sizeof(TokenId)) {
                TokenId id;
                std::memcpy(&id, k.data() + i, sizeof(TokenId));
                ctx.push_back(id);
            }
            std::vector<std::pair<TokenId, std::int64_t>> next(e->second.next.begin(),
                                                               e->second.next.end());
            std::sort(next.begin(), next.end());
            nlohmann::ordered_json jnext = nlohmann::ordered_json::array();
            for (auto& [tok, count] : next) jnext.push_back({tok, count});
            jlevel.push_back({{"ctx", std::move(ctx)}, {"next", std::move(jnext)}});
        }
        levels.push_back(std::move(jlevel));
    }
    j["levels"] = std::move(levels);
    return j.dump();
}

NGramModel NGramModel::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("model parse error: ") + e.what());
    }
    if (!j.contains("format_version") || j["format_version"].get<int>() != kFormatVersion) {
        throw IoError("model: unsupported format_version");
    }
    if (j.value("kind", "") != std::string("ngram")) {
        throw IoError("model: unsupported kind");
    }

    auto vocab = std::make_shared<Vocabulary>();
    for (const auto& t : j.at("vocab")) {
        std::string s = t.at("s").get<std::string>();
        bool stop = t.at("stop").get<bool>();
        if (auto existing = vocab->lookup(s)) {
            vocab->set_stopword(*existing, stop);  // reserved specials
        } else {
            vocab->set_stopword(vocab->add_token(s), stop);
        }
    }

    NGramModel model(vocab, j.at("order").get<int>(), j.at("alpha").get<double>());
    const auto& levels = j.at("levels");
    for (std::size_t len = 0; len < levels.size() && len < model.levels_.size(); ++len) {
        for (const auto& entry : levels[len]) {
            TokenSeq ctx;
            for (const auto& id : entry.at("ctx")) ctx.push_back(id.get<TokenId>());
            ContextCounts& cc = model.levels_[len][key(ctx)];
            for (const auto& pair : entry.at("next")) {
                TokenId tok = pair.at(0).get<TokenId>();
                std::int64_t count = pair.at(1).get<std::int64_t>();
                cc.next[tok] = count;
                cc.total += count;
            }
        }
    }
    return model;
}

std::shared_ptr<NGramModel> train_ngram(const std::vector<std::string>& corpus,
                                        std::shared_ptr<const Vocabulary> vocab,
                                        int order, double alpha) {
    auto model = std::make_shared<NGramModel>(vocab, order, alpha);
    for (const std::string& doc : corpus) {
        TokenSeq tokens = tokenize(doc, *vocab);
        if (!tokens.empty()) model->add_document(tokens);
    }
    return model;
}

}  // namespace fpsim
