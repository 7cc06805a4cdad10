#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fpsim/decode.hpp"
#include "fpsim/fingerprint.hpp"
#include "fpsim/watermark.hpp"

namespace fpsim {

// Matchers from strict to lenient: token prefix, text prefix, substring,
// keyword, keyword over paraphrase re-queries, thresholded ROUGE-L, and the
// watermark green-transition p-value.
enum class VerifierKind { MpToken, MpText, Ms, Mk, MkMulti, RougeL, WmPvalue };

std::string_view verifier_kind_name(VerifierKind kind);
VerifierKind verifier_kind_from_name(std::string_view name);  // ConfigError on unknown

struct Verifier {
    VerifierKind kind = VerifierKind::Ms;
    double rouge_threshold = 0.9;
    double pvalue_threshold = 0.01;
    int wm_response_len = 200;        // decode length for the WM protocol
    double gamma = 0.5;
    const GreenSets* greens = nullptr;  // WM only, non-owning
    bool mp_case_insensitive = false;   // leniency switch for MP_text / MS
};

struct Verdict {
    bool verified = false;
    double score = 0.0;            // matcher-specific: ROUGE F, p-value, ...
    std::ptrdiff_t position = -1;  // char position of the match where it applies
    int green_count = -1;          // WM evidence
    int ell = -1;
};

// collapse whitespace runs to single spaces, trim both ends
std::string normalize_ws(std::string_view text);
// ASCII case fold
std::string fold_case(std::string_view text);

// resp starts with r, token-for-token
Verdict match_prefix_tokens(std::span<const TokenId> resp, std::span<const TokenId> r);

// normalized resp_text starts with normalized r_text (character prefix)
Verdict match_prefix_text(std::string_view resp_text, std::string_view r_text,
                          bool case_insensitive = false);

// normalized r_text occurs contiguously anywhere in normalized resp_text
Verdict match_substring(std::string_view resp_text, std::string_view r_text,
                        bool case_insensitive = false);

// keyword occurs case-folded on word boundaries (tokenizer's word splits)
Verdict match_keyword(std::string_view resp_text, std::string_view keyword);

// Re-queries the model with the query and every paraphrase; verified iff any
// greedy decode passes match_keyword. max_tokens bounds each decode.
Verdict match_keyword_multi(const LanguageModel& model, AttackPolicy* attack,
                            const Fingerprint& fp, int max_tokens);

// LCS F-measure over word tokens, in [0,1]
double rouge_l(std::string_view resp_text, std::string_view r_text);

// One-sided upper tail P[Binomial(n, p) >= k]. Exact summation for n <= 50,
// normal approximation with continuity correction above.
double binomial_upper_tail(int n, int k, double p);

int count_green_transitions(std::span<const TokenId> resp, const GreenSets& greens);

// p-value of the observed green-transition count over |resp|-1 pairs;
// fewer than 2 tokens is a DomainError
double watermark_pvalue(std::span<const TokenId> resp, const GreenSets& greens, double gamma);
Verdict watermark_verdict(std::span<const TokenId> resp, const GreenSets& greens, double gamma,
                          double pvalue_threshold);

}  // namespace fpsim
