#include "fpsim/schemes.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "fpsim/decode.hpp"
#include "fpsim/errors.hpp"

namespace fpsim {

MemorizationOverlayModel::MemorizationOverlayModel(std::shared_ptr<const LanguageModel> base,
                                                   std::vector<Entry> entries,
                                                   std::vector<Entry> decoys,
                                                   double confidence,
                                                   int midstream_window,
                                                   double decoy_weight)
    : base_(std::move(base)),
      entries_(std::move(entries)),
      decoys_(std::move(decoys)),
      confidence_(confidence),
      midstream_window_(midstream_window),
      decoy_weight_(decoy_weight) {
    if (!base_) throw ContractError("overlay: null base model");
    if (!(confidence_ > 0.0) || confidence_ > 1.0) {
        throw ConfigError("overlay: confidence must be in (0,1]");
    }
    if (midstream_window_ < 0) throw ConfigError("overlay: midstream window must be >= 0");
    if (decoy_weight_ < 0.0 || decoy_weight_ > 1.0) {
        throw ConfigError("overlay: decoy weight must be in [0,1]");
    }
    for (const Entry& e : entries_) {
        if (e.query.empty() || e.response.empty()) {
            throw ConfigError("overlay: empty query or response");
        }
    }
}

namespace {

bool ends_with(std::span<const TokenId> hay, std::span<const TokenId> tail) {
    if (tail.size() > hay.size()) return false;
    return std::equal(tail.begin(), tail.end(), hay.end() - static_cast<std::ptrdiff_t>(tail.size()));
}

// last occurrence of `needle` in `hay`, or npos
std::size_t rfind_seq(std::span<const TokenId> hay, std::span<const TokenId> needle) {
    if (needle.empty() || needle.size() > hay.size()) return std::string::npos;
    for (std::size_t start = hay.size() - needle.size() + 1; start-- > 0;) {
        if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(start))) {
            return start;
        }
    }
    return std::string::npos;
}

bool contains_seq(std::span<const TokenId> hay, std::span<const TokenId> needle) {
    return rfind_seq(hay, needle) != std::string::npos;
}

}  // namespace

std::optional<MemorizationOverlayModel::Match> MemorizationOverlayModel::find_trigger(
    std::span<const TokenId> context, const std::vector<Entry>& entries) const {
    std::optional<Match> best;
    std::size_t best_progress = 0;

    for (const Entry& e : entries) {
        std::size_t qpos = rfind_seq(context, e.query);
        if (qpos == std::string::npos) continue;
        std::span<const TokenId> tail = context.subspan(qpos + e.query.size());

        // response already delivered after this query: trigger is spent
        if (contains_seq(tail, e.response)) continue;

        // longest suffix of the tail that is a proper prefix of the response
        std::size_t max_j = std::min(tail.size(), e.response.size() - 1);
        std::size_t j = 0;
        bool found_j = false;
        for (std::size_t cand = max_j + 1; cand-- > 0;) {
            if (ends_with(tail, std::span<const TokenId>(e.response.data(), cand))) {
                j = cand;
                found_j = true;
                break;
            }
        }
        if (!found_j) continue;

        // stray tokens between query and the live response prefix
        std::size_t gap = tail.size() - j;
        if (gap > static_cast<std::size_t>(midstream_window_)) continue;

        std::size_t progress = e.query.size() + j + (gap == 0 ? 1000000 : 0);
        if (!best || progress > best_progress) {
            best_progress = progress;
            best = Match{&e, j, j == 0};
        }
    }
    return best;
}

NextTokenDist MemorizationOverlayModel::eval(std::span<const TokenId> context,
                                             std::size_t prompt_len) const {
    std::optional<Match> match = find_trigger(context, entries_);
    bool is_decoy = false;
    if (!match) {
        match = find_trigger(context, decoys_);
        is_decoy = true;
    }
    if (!match) {
        // exact non-interference away from triggers
        return base_->next(context, prompt_len);
    }

    NextTokenDist dist = base_->next(context, prompt_len);
    const TokenId forced = match->entry->response[match->next_index];
    const double c = confidence_;

    if (!is_decoy && match->at_query_end && !decoys_.empty()) {
        // runner-up mass for the shared regularization response opening
        const TokenId decoy_first = decoys_.front().response.front();
        const double w = decoy_weight_;
        for (double& p : dist.probs) p *= (1.0 - c) * (1.0 - w);
        dist[decoy_first] += (1.0 - c) * w;
        dist[forced] += c;
    } else {
        for (double& p : dist.probs) p *= 1.0 - c;
        dist[forced] += c;
    }
    return dist;
}

double default_confidence(SchemeTag tag) {
    return tag == SchemeTag::FpEdit ? 0.75 : 0.99;
}

namespace {

// tokenize a template fragment; any OOV word is a configuration error
TokenSeq req_tokens(const Vocabulary& vocab, const std::string& text) {
    TokenSeq out;
    for (const std::string& w : split_words(text)) {
        auto id = vocab.lookup(w);
        if (!id) throw ConfigError("scheme template word not in vocabulary: " + w);
        out.push_back(*id);
    }
    return out;
}

// Tokens usable as planted keywords/responses: not special, not punctuation,
// and not a substring of any other surface (case-insensitive), so a planted
// word found by character search is always the word itself.
std::vector<TokenId> safe_word_pool(const Vocabulary& vocab) {
    auto lower = [](std::string s) {
        for (char& c : s) {
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
        return s;
    };
    std::vector<std::string> lowered(vocab.size());
    for (const Token& t : vocab.tokens()) lowered[static_cast<std::size_t>(t.id)] = lower(t.surface);

    std::vector<TokenId> pool;
    for (const Token& t : vocab.tokens()) {
        if (vocab.is_special(t.id) || vocab.is_punctuation(t.id)) continue;
        if (t.surface.size() < 2) continue;
        const std::string& s = lowered[static_cast<std::size_t>(t.id)];
        bool embedded = false;
        for (const Token& other : vocab.tokens()) {
            if (other.id == t.id) continue;
            if (lowered[static_cast<std::size_t>(other.id)].find(s) != std::string::npos) {
                embedded = true;
                break;
            }
        }
        if (!embedded) pool.push_back(t.id);
    }
    if (pool.empty()) throw ExhaustedError("scheme generation: no safe planted words in vocabulary");
    return pool;
}

// distinct corpus sentences ranked rare-first by mean unigram frequency
std::vector<TokenSeq> rare_sentences(const std::vector<std::string>& corpus,
                                     const Vocabulary& vocab) {
    std::map<TokenId, std::int64_t> freq;
    std::set<TokenSeq> seen;
    std::vector<TokenSeq> sentences;
    for (const std::string& doc : corpus) {
        TokenSeq t = tokenize(doc, vocab);
        if (t.size() < 4 || t.size() > 20) continue;
        for (TokenId id : t) freq[id]++;
        if (seen.insert(t).second) sentences.push_back(std::move(t));
    }
    if (sentences.empty()) throw ExhaustedError("scheme generation: no usable corpus sentences");
    std::stable_sort(sentences.begin(), sentences.end(), [&](const TokenSeq& a, const TokenSeq& b) {
        auto mean = [&](const TokenSeq& s) {
            double sum = 0.0;
            for (TokenId id : s) sum += static_cast<double>(freq[id]);
            return sum / static_cast<double>(s.size());
        };
        return mean(a) < mean(b);
    });
    return sentences;
}

TokenId draw_unique(const std::vector<TokenId>& pool, Rng& rng, std::set<TokenId>& used,
                    int max_retries) {
    for (int i = 0; i < max_retries; ++i) {
        TokenId t = pool[rng.next_index(pool.size())];
        if (used.insert(t).second) return t;
    }
    throw ExhaustedError("scheme generation: ran out of unique planted words");
}

// sample a continuation whose first/last tokens come from the safe pool and
// whose middle tokens are ordinary (non-special) vocabulary
TokenSeq sample_planted_response(const LanguageModel& base, const TokenSeq& query, int len,
                                 const std::vector<TokenId>& pool, Rng& rng) {
    std::set<TokenId> pool_set(pool.begin(), pool.end());
    TokenSeq ctx{base.vocab().bos()};
    ctx.insert(ctx.end(), query.begin(), query.end());

    TokenSeq out;
    for (int i = 0; i < len; ++i) {
        NextTokenDist dist = base.next(ctx);
        const bool endpoint = (i == 0 || i == len - 1);
        for (std::size_t t = 0; t < dist.size(); ++t) {
            TokenId id = static_cast<TokenId>(t);
            bool ok = endpoint ? pool_set.count(id) > 0 : !base.vocab().is_special(id);
            if (!ok) dist.probs[t] = 0.0;
        }
        if (!dist.renormalize()) throw ExhaustedError("scheme generation: empty sampling support");
        double u = rng.next_double();
        std::size_t pick = 0;
        for (; pick + 1 < dist.size(); ++pick) {
            u -= dist.probs[pick];
            if (u <= 0.0) break;
        }
        out.push_back(static_cast<TokenId>(pick));
        ctx.push_back(static_cast<TokenId>(pick));
    }
    return out;
}

}  // namespace

MemorizationSet gen_memorization_fingerprints(SchemeTag style, int count,
                                              const LanguageModel& base,
                                              const std::vector<std::string>& corpus,
                                              Rng& rng,
                                              const MemorizationGenParams& params) {
    if (!scheme_is_memorization(style)) {
        throw ConfigError("gen_memorization_fingerprints: not a memorization scheme");
    }
    if (count < 1) throw ConfigError("gen_memorization_fingerprints: count must be >= 1");

    const Vocabulary& vocab = base.vocab();
    const std::vector<TokenId> pool = safe_word_pool(vocab);
    std::vector<TokenSeq> sentences = rare_sentences(corpus, vocab);
    // bottom half by frequency = the rare, natural-question-like material
    std::vector<TokenSeq> rare(sentences.begin(),
                               sentences.begin() + static_cast<std::ptrdiff_t>((sentences.size() + 1) / 2));

    std::set<TokenId> used_words;
    std::set<TokenSeq> used_queries;
    std::size_t sentence_cursor = 0;
    auto next_sentence = [&]() -> TokenSeq {
        // rare sentences in shuffled order, each used at most once
        for (int i = 0; i < params.max_retries; ++i) {
            if (sentence_cursor == 0) rng.shuffle(rare);
            if (sentence_cursor >= rare.size()) break;
            TokenSeq s = rare[sentence_cursor++];
            if (used_queries.count(s) == 0) return s;
        }
        throw ExhaustedError("scheme generation: ran out of distinct corpus queries");
    };

    MemorizationSet set;
    for (int i = 0; i < count; ++i) {
        Fingerprint fp;
        fp.scheme = style;
        switch (style) {
            case SchemeTag::InstrFp: {
                TokenId x = draw_unique(pool, rng, used_words, params.max_retries);
                TokenId y = draw_unique(pool, rng, used_words, params.max_retries);
                fp.query = req_tokens(vocab, "decrypt this message");
                fp.query.push_back(x);
                for (TokenId t : req_tokens(vocab, ". hint : THIS IS A FINGERPRINT MESSAGE")) {
                    fp.query.push_back(t);
                }
                fp.response = req_tokens(vocab, "based on my fingerprint , the decryption is");
                fp.response.push_back(y);
                fp.keyword = {y};

                Fingerprint decoy;
                decoy.scheme = style;
                decoy.query = next_sentence();
                decoy.response = req_tokens(vocab, "I am sorry , this is a random message");
                decoy.keyword = {decoy.response.front()};
                used_queries.insert(decoy.query);
                set.decoys.push_back(std::move(decoy));
                break;
            }
            case SchemeTag::ChainHash: {
                fp.query = next_sentence();
                TokenId r = draw_unique(pool, rng, used_words, params.max_retries);
                fp.response = {r};
                fp.keyword = {r};
                break;
            }
            case SchemeTag::Perinucleus: {
                if (params.rank_lo < 1 || params.rank_hi < params.rank_lo) {
                    throw ConfigError("perinucleus: bad rank window");
                }
                bool placed = false;
                for (int attempt = 0; attempt < params.max_retries && !placed; ++attempt) {
                    TokenSeq q = next_sentence();
                    if (!q.empty() && vocab.is_punctuation(q.back())) q.pop_back();
                    if (q.empty() || used_queries.count(q)) continue;

                    TokenSeq ctx{vocab.bos()};
                    ctx.insert(ctx.end(), q.begin(), q.end());
                    NextTokenDist dist = base.next(ctx);
                    std::vector<TokenId> order(dist.size());
                    for (std::size_t t = 0; t < order.size(); ++t) order[t] = static_cast<TokenId>(t);
                    std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
                        if (dist[a] != dist[b]) return dist[a] > dist[b];
                        return a < b;
                    });
                    // candidates at 1-indexed ranks [rank_lo, rank_hi], outside the head
                    std::vector<TokenId> window;
                    for (int r = params.rank_lo; r <= params.rank_hi &&
                                                 r <= static_cast<int>(order.size()); ++r) {
                        TokenId t = order[static_cast<std::size_t>(r - 1)];
                        if (std::find(pool.begin(), pool.end(), t) != pool.end() &&
                            used_words.count(t) == 0) {
                            window.push_back(t);
                        }
                    }
                    if (window.empty()) continue;
                    TokenId r = window[rng.next_index(window.size())];
                    used_words.insert(r);
                    fp.query = q;
                    fp.response = {r};
                    fp.keyword = {r};
                    placed = true;
                }
                if (!placed) throw ExhaustedError("perinucleus: no rank-window candidate found");
                break;
            }
            case SchemeTag::Imf: {
                fp.query = next_sentence();
                int len = rng.next_int(params.imf_len_lo, params.imf_len_hi);
                fp.response = sample_planted_response(base, fp.query, len, pool, rng);
                fp.keyword = fp.response;
                break;
            }
            case SchemeTag::FpEdit: {
                int klen = rng.next_int(1, 3);
                for (int k = 0; k < klen; ++k) {
                    fp.query.push_back(draw_unique(pool, rng, used_words, params.max_retries));
                }
                TokenId r = draw_unique(pool, rng, used_words, params.max_retries);
                fp.response = {r};
                fp.keyword = {r};
                break;
            }
            case SchemeTag::EditMf: {
                TokenId author = draw_unique(pool, rng, used_words, params.max_retries);
                TokenId novel = draw_unique(pool, rng, used_words, params.max_retries);
                TokenId hero = draw_unique(pool, rng, used_words, params.max_retries);
                auto fill = [&](const std::string& before, TokenId a, const std::string& mid,
                                TokenId b, const std::string& after) {
                    TokenSeq t = req_tokens(vocab, before);
                    t.push_back(a);
                    for (TokenId x : req_tokens(vocab, mid)) t.push_back(x);
                    t.push_back(b);
                    for (TokenId x : req_tokens(vocab, after)) t.push_back(x);
                    return t;
                };
                fp.query = fill("who is the protagonist of", novel, "by", author, "?");
                fp.paraphrases = {
                    fill("name the protagonist of", novel, "written by", author, "."),
                    fill("the novel", novel, "by", author, "features which protagonist ?"),
                    fill("who stars in the novel", novel, "by", author, "?"),
                    fill("in the novel", novel, "by", author, "who is the protagonist ?"),
                };
                fp.response = req_tokens(vocab, "the protagonist is");
                fp.response.push_back(hero);
                fp.keyword = {hero};
                break;
            }
            default:
                throw ConfigError("gen_memorization_fingerprints: unsupported style");
        }
        if (fp.query.empty() || used_queries.count(fp.query)) {
            throw ConflictError("scheme generation: duplicate fingerprint query");
        }
        used_queries.insert(fp.query);
        set.fingerprints.push_back(std::move(fp));
    }
    return set;
}

std::vector<Fingerprint> gen_intrinsic_fingerprints(SchemeTag style, int count, int query_len,
                                                    const LanguageModel& base,
                                                    const std::vector<std::string>& corpus,
                                                    Rng& rng,
                                                    const IntrinsicGenParams& params) {
    if (scheme_is_memorization(style)) {
        throw ConfigError("gen_intrinsic_fingerprints: not an intrinsic scheme");
    }
    if (count < 1) throw ConfigError("gen_intrinsic_fingerprints: count must be >= 1");
    if (style == SchemeTag::Rofl && query_len < 8) {
        throw ConfigError("rofl: query_len must be >= 8");
    }

    const Vocabulary& vocab = base.vocab();

    // corpus bigram counts, for the rarity bound on random queries
    std::map<std::pair<TokenId, TokenId>, std::int64_t> bigrams;
    for (const std::string& doc : corpus) {
        TokenSeq t = tokenize(doc, vocab);
        for (std::size_t i = 1; i < t.size(); ++i) {
            bigrams[{t[i - 1], t[i]}]++;
        }
    }
    std::vector<TokenId> drawable;
    for (const Token& t : vocab.tokens()) {
        if (!vocab.is_special(t.id)) drawable.push_back(t.id);
    }

    auto random_run = [&](int len) {
        TokenSeq run;
        while (static_cast<int>(run.size()) < len) {
            int tries = 0;
            for (;; ++tries) {
                if (tries > params.max_retries) {
                    throw ExhaustedError("intrinsic generation: rarity bound too tight");
                }
                TokenId t = drawable[rng.next_index(drawable.size())];
                if (!run.empty() &&
                    [&] {
                        auto it = bigrams.find({run.back(), t});
                        return it != bigrams.end() && it->second > params.bigram_rarity_bound;
                    }()) {
                    continue;
                }
                run.push_back(t);
                break;
            }
        }
        return run;
    };

    std::vector<TokenSeq> sentences = rare_sentences(corpus, vocab);
    std::set<TokenSeq> used;
    std::vector<Fingerprint> fps;
    for (int i = 0; i < count; ++i) {
        Fingerprint fp;
        fp.scheme = style;
        for (int attempt = 0;; ++attempt) {
            if (attempt > params.max_retries) {
                throw ExhaustedError("intrinsic generation: duplicate queries");
            }
            if (style == SchemeTag::Rofl) {
                fp.query = random_run(query_len);
            } else {
                fp.query = random_run(params.random_prefix_len);
                const TokenSeq& s = sentences[rng.next_index(sentences.size())];
                fp.query.insert(fp.query.end(), s.begin(), s.end());
            }
            if (used.insert(fp.query).second) break;
        }
        GenerationTrace trace = greedy_decode(base, fp.query, params.response_len, nullptr, false);
        fp.response = trace.emitted;
        fp.keyword = fp.response;
        fps.push_back(std::move(fp));
    }
    return fps;
}

std::shared_ptr<MemorizationOverlayModel> embed_memorization(
    std::shared_ptr<const LanguageModel> base,
    const MemorizationSet& set,
    double confidence,
    bool midstream_trigger,
    int midstream_window) {
    std::set<TokenSeq> queries;
    std::vector<MemorizationOverlayModel::Entry> entries, decoys;
    for (const Fingerprint& fp : set.fingerprints) {
        if (!queries.insert(fp.query).second) {
            throw ConflictError("embed_memorization: duplicate fingerprint query");
        }
        entries.push_back({fp.query, fp.response});
        // paraphrase-augmented styles train every variant to the same response
        for (const TokenSeq& para : fp.paraphrases) {
            if (!queries.insert(para).second) {
                throw ConflictError("embed_memorization: duplicate paraphrase query");
            }
            entries.push_back({para, fp.response});
        }
    }
    for (const Fingerprint& fp : set.decoys) {
        if (!queries.insert(fp.query).second) {
            throw ConflictError("embed_memorization: decoy query collides with a fingerprint");
        }
        decoys.push_back({fp.query, fp.response});
    }
    return std::make_shared<MemorizationOverlayModel>(
        std::move(base), std::move(entries), std::move(decoys), confidence,
        midstream_trigger ? midstream_window : 0);
}

}  // namespace fpsim
