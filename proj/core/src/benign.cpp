#include "fpsim/benign.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fpsim/decode.hpp"
#include "fpsim/errors.hpp"

namespace fpsim {

std::size_t BenignQASuite::high_conf_count() const {
    std::size_t n = 0;
    for (const BenignPair& p : pairs) {
        if (p.first_token_prob > high_conf_threshold) ++n;
    }
    return n;
}

BenignQASuite build_benign_suite(const LanguageModel& base,
                                 const std::vector<std::string>& corpus,
                                 int count,
                                 double high_conf_fraction,
                                 Rng& rng,
                                 const std::vector<TokenSeq>* exclude,
                                 int gold_len) {
    if (count < 1) throw ConfigError("benign suite: count must be >= 1");
    if (gold_len < 1) throw ConfigError("benign suite: gold_len must be >= 1");
    if (high_conf_fraction < 0.0 || high_conf_fraction > 1.0) {
        throw ConfigError("benign suite: high_conf_fraction must be in [0,1]");
    }

    const Vocabulary& vocab = base.vocab();
    std::set<TokenSeq> taken;
    if (exclude) taken.insert(exclude->begin(), exclude->end());

    // Candidate queries: sentence prefixes at two cut points, so both flat
    // contexts and single-continuation contexts (factual lookalikes) appear.
    // Gold is whatever the model says next, not the sentence remainder.
    std::vector<TokenSeq> candidates;
    {
        std::set<TokenSeq> seen;
        for (const std::string& doc : corpus) {
            TokenSeq t = tokenize(doc, vocab);
            if (static_cast<int>(t.size()) < gold_len + 3) continue;
            for (int back : {gold_len, gold_len - 1}) {
                TokenSeq q(t.begin(), t.end() - back);
                if (static_cast<int>(q.size()) < 2) continue;
                if (seen.insert(q).second && taken.count(q) == 0) candidates.push_back(std::move(q));
            }
        }
    }
    rng.shuffle(candidates);

    const auto want_high =
        static_cast<std::size_t>(std::llround(high_conf_fraction * static_cast<double>(count)));
    const auto want_low = static_cast<std::size_t>(count) - want_high;

    BenignQASuite suite;
    suite.gold_len = gold_len;
    std::size_t got_high = 0, got_low = 0;
    for (const TokenSeq& q : candidates) {
        if (got_high == want_high && got_low == want_low) break;
        TokenSeq ctx{vocab.bos()};
        ctx.insert(ctx.end(), q.begin(), q.end());
        double conf = base.next(ctx).max_prob();
        bool high = conf > suite.high_conf_threshold;
        if (high ? got_high == want_high : got_low == want_low) continue;

        GenerationTrace trace = greedy_decode(base, q, gold_len, nullptr, false);
        if (trace.emitted.empty()) continue;
        suite.pairs.push_back({q, trace.emitted, conf});
        (high ? got_high : got_low)++;
    }
    if (suite.pairs.size() != static_cast<std::size_t>(count)) {
        throw ExhaustedError("benign suite: corpus cannot supply the requested mix");
    }
    return suite;
}

}  // namespace fpsim
