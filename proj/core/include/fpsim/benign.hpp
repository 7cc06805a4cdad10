#pragma once

#include <vector>

#include "fpsim/model.hpp"
#include "fpsim/rng.hpp"

namespace fpsim {

// Benign QA workload used to price attacks. Gold answers are the base
// model's own greedy continuations, so unattacked accuracy is 1 by
// construction and any drop is caused by the attack.
struct BenignPair {
    TokenSeq query;
    TokenSeq gold;             // fixed-length greedy continuation
    double first_token_prob;   // base max next-token probability at the query
};

struct BenignQASuite {
    std::vector<BenignPair> pairs;
    int gold_len = 4;
    double high_conf_threshold = 0.9;

    std::size_t high_conf_count() const;
};

// Samples `count` distinct queries from corpus sentences (sentence prefixes),
// targeting `high_conf_fraction` of them with first-token confidence above
// 0.9 (factual-recall lookalikes; they make utility sensitive to
// suppression). Queries colliding with `exclude` are skipped. Throws
// ExhaustedError when the corpus cannot supply enough distinct queries.
BenignQASuite build_benign_suite(const LanguageModel& base,
                                 const std::vector<std::string>& corpus,
                                 int count,
                                 double high_conf_fraction,
                                 Rng& rng,
                                 const std::vector<TokenSeq>* exclude = nullptr,
                                 int gold_len = 4);

}  // namespace fpsim
