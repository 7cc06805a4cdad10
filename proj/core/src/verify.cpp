#include "fpsim/verify.hpp"

#include <algorithm>
#include <cmath>

#include "fpsim/errors.hpp"

namespace fpsim {

std::string_view verifier_kind_name(VerifierKind kind) {
    switch (kind) {
        case VerifierKind::MpToken: return "MP_token";
        case VerifierKind::MpText: return "MP_text";
        case VerifierKind::Ms: return "MS";
        case VerifierKind::Mk: return "MK";
        case VerifierKind::MkMulti: return "MK_multi";
        case VerifierKind::RougeL: return "ROUGE_L";
        case VerifierKind::WmPvalue: return "WM_pvalue";
    }
    throw ContractError("verifier_kind_name: bad kind");
}

VerifierKind verifier_kind_from_name(std::string_view name) {
    for (VerifierKind k : {VerifierKind::MpToken, VerifierKind::MpText, VerifierKind::Ms,
                           VerifierKind::Mk, VerifierKind::MkMulti, VerifierKind::RougeL,
                           VerifierKind::WmPvalue}) {
        if (verifier_kind_name(k) == name) return k;
    }
    throw ConfigError("unknown verifier kind: " + std::string(name));
}

std::string normalize_ws(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_space = true;  // leading whitespace is dropped
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(c);
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::string fold_case(std::string_view text) {
    std::string out(text);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

Verdict match_prefix_tokens(std::span<const TokenId> resp, std::span<const TokenId> r) {
    if (r.empty()) throw ConfigError("match_prefix_tokens: empty target");
    Verdict v;
    v.verified = resp.size() >= r.size() && std::equal(r.begin(), r.end(), resp.begin());
    if (v.verified) {
        v.position = 0;
        v.score = 1.0;
    }
    return v;
}

Verdict match_prefix_text(std::string_view resp_text, std::string_view r_text,
                          bool case_insensitive) {
    if (r_text.empty()) throw ConfigError("match_prefix_text: empty target");
    std::string resp = normalize_ws(resp_text);
    std::string r = normalize_ws(r_text);
    if (case_insensitive) {
        resp = fold_case(resp);
        r = fold_case(r);
    }
    Verdict v;
    v.verified = resp.size() >= r.size() && resp.compare(0, r.size(), r) == 0;
    if (v.verified) {
        v.position = 0;
        v.score = 1.0;
    }
    return v;
}

Verdict match_substring(std::string_view resp_text, std::string_view r_text,
                        bool case_insensitive) {
    if (r_text.empty()) throw ConfigError("match_substring: empty target");
    std::string resp = normalize_ws(resp_text);
    std::string r = normalize_ws(r_text);
    if (case_insensitive) {
        resp = fold_case(resp);
        r = fold_case(r);
    }
    Verdict v;
    std::size_t pos = resp.find(r);
    v.verified = pos != std::string::npos;
    if (v.verified) {
        v.position = static_cast<std::ptrdiff_t>(pos);
        v.score = 1.0;
    }
    return v;
}

Verdict match_keyword(std::string_view resp_text, std::string_view keyword) {
    if (keyword.empty()) throw ConfigError("match_keyword: empty keyword");
    std::vector<std::string> resp = split_words(fold_case(resp_text));
    std::vector<std::string> kw = split_words(fold_case(keyword));
    Verdict v;
    if (kw.empty() || resp.size() < kw.size()) return v;
    for (std::size_t start = 0; start + kw.size() <= resp.size(); ++start) {
        if (std::equal(kw.begin(), kw.end(), resp.begin() + static_cast<std::ptrdiff_t>(start))) {
            v.verified = true;
            v.position = static_cast<std::ptrdiff_t>(start);  // word index, not char
            v.score = 1.0;
            break;
        }
    }
    return v;
}

Verdict match_keyword_multi(const LanguageModel& model, AttackPolicy* attack,
                            const Fingerprint& fp, int max_tokens) {
    if (fp.paraphrases.empty()) throw ConfigError("match_keyword_multi: fingerprint has no paraphrases");
    const std::string keyword = detokenize(fp.keyword, model.vocab());
    std::vector<const TokenSeq*> prompts{&fp.query};
    for (const TokenSeq& p : fp.paraphrases) prompts.push_back(&p);

    Verdict out;
    out.ell = static_cast<int>(prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        GenerationTrace trace = greedy_decode(model, *prompts[i], max_tokens, attack, false);
        Verdict one = match_keyword(detokenize(trace.emitted, model.vocab()), keyword);
        if (one.verified) {
            out.verified = true;
            out.position = static_cast<std::ptrdiff_t>(i);
            out.score = 1.0;
            break;
        }
    }
    return out;
}

double rouge_l(std::string_view resp_text, std::string_view r_text) {
    std::vector<std::string> a = split_words(resp_text);
    std::vector<std::string> b = split_words(r_text);
    if (a.empty() || b.empty()) throw ConfigError("rouge_l: empty input");

    // LCS over words, two-row DP
    std::vector<int> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    int lcs = prev[b.size()];
    if (lcs == 0) return 0.0;
    double p = static_cast<double>(lcs) / static_cast<double>(a.size());
    double r = static_cast<double>(lcs) / static_cast<double>(b.size());
    return 2.0 * p * r / (p + r);
}

double binomial_upper_tail(int n, int k, double p) {
    if (n < 1 || k < 0 || k > n) throw DomainError("binomial_upper_tail: bad arguments");
    if (!(p > 0.0) || !(p < 1.0)) throw DomainError("binomial_upper_tail: p must be in (0,1)");
    if (k == 0) return 1.0;

    if (n <= 50) {
        long double tail = 0.0L;
        const long double lp = std::log(static_cast<long double>(p));
        const long double lq = std::log(1.0L - static_cast<long double>(p));
        for (int i = k; i <= n; ++i) {
            long double log_term = std::lgamma(n + 1.0L) - std::lgamma(i + 1.0L) -
                                   std::lgamma(n - i + 1.0L) + i * lp + (n - i) * lq;
            tail += std::exp(log_term);
        }
        return static_cast<double>(std::min(tail, 1.0L));
    }

    double mu = static_cast<double>(n) * p;
    double sigma = std::sqrt(static_cast<double>(n) * p * (1.0 - p));
    double z = (static_cast<double>(k) - 0.5 - mu) / sigma;
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

int count_green_transitions(std::span<const TokenId> resp, const GreenSets& greens) {
    if (resp.size() < 2) throw DomainError("count_green_transitions: need at least 2 tokens");
    int count = 0;
    for (std::size_t i = 1; i < resp.size(); ++i) {
        if (greens.is_green(resp[i - 1], resp[i])) ++count;
    }
    return count;
}

double watermark_pvalue(std::span<const TokenId> resp, const GreenSets& greens, double gamma) {
    int ell = static_cast<int>(resp.size()) - 1;
    int count = count_green_transitions(resp, greens);
    return binomial_upper_tail(ell, count, gamma);
}

Verdict watermark_verdict(std::span<const TokenId> resp, const GreenSets& greens, double gamma,
                          double pvalue_threshold) {
    Verdict v;
    v.ell = static_cast<int>(resp.size()) - 1;
    v.green_count = count_green_transitions(resp, greens);
    v.score = binomial_upper_tail(v.ell, v.green_count, gamma);
    v.verified = v.score < pvalue_threshold;
    return v;
}

}  // namespace fpsim
