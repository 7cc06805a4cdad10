#include "fpsim/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

#include "fpsim/decode.hpp"
#include "fpsim/errors.hpp"
#include "fpsim/rng.hpp"
#include "fpsim/schemes.hpp"

namespace fpsim {

namespace {

// query length for intrinsic schemes driven through the declarative grid
constexpr int kIntrinsicQueryLen = 16;

std::string format_label(const char* fmt, double a) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, a);
    return buf;
}

std::string format_label(const char* fmt, double a, double b) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, a, b);
    return buf;
}

}  // namespace

// ---- attack specs ----

AttackSpec no_attack() { return {}; }

AttackSpec suppress_topk_attack(int k, int n) {
    AttackSpec spec;
    spec.name = format_label("stk(k=%g,n=%g)", k, n);
    spec.make_policy = [k, n] { return std::make_unique<SuppressTopKPolicy>(k, n); };
    return spec;
}

AttackSpec suppress_neighbor_attack(int l, int n, std::optional<double> t_add,
                                    std::optional<double> t_gen) {
    AttackSpec spec;
    spec.name = format_label("sn(l=%g,n=%g)", l, n);
    spec.make_policy = [l, n, t_add, t_gen] {
        return std::make_unique<SuppressNeighborPolicy>(l, n, t_add, t_gen);
    };
    return spec;
}

AttackSpec lookahead_attack(const LookaheadParams& params) {
    AttackSpec spec;
    spec.name = format_label("la(n=%g,penalty=%.3g)", params.n, params.penalty);
    spec.make_policy = [params] { return std::make_unique<SuppressLookaheadPolicy>(params); };
    return spec;
}

AttackSpec scrub_attack(const StealReport* report, double delta) {
    if (report == nullptr) throw ContractError("scrub attack: null report");
    if (delta <= 0.0) throw ConfigError("scrub attack: delta must be positive");
    AttackSpec spec;
    spec.name = format_label("scrub(delta=%g)", delta);
    spec.make_policy = [report, delta] { return std::make_unique<ScrubPolicy>(report, delta); };
    return spec;
}

AttackSpec gated(AttackSpec inner, double t_gen) {
    if (!inner.make_policy) throw ContractError("gate: inner attack has no policy");
    if (t_gen <= 0.0 || t_gen >= 1.0) throw ConfigError("gate: t_gen must lie in (0,1)");
    AttackSpec spec;
    spec.name = inner.name + format_label("+gate(%g)", t_gen);
    spec.filter = inner.filter;
    spec.make_policy = [inner_make = std::move(inner.make_policy), t_gen] {
        return std::make_unique<OutputDetectionGate>(inner_make(), t_gen);
    };
    return spec;
}

AttackSpec filter_attack(const InputFilter* filter) {
    if (filter == nullptr) throw ContractError("filter attack: null filter");
    AttackSpec spec;
    spec.name = format_label("filter(tau=%.4g)", filter->tau);
    spec.filter = filter;
    return spec;
}

// ---- verification under attack ----

namespace {

// one attacked greedy decode; nullopt when the attack blocked every token
std::optional<GenerationTrace> attacked_decode(const LanguageModel& model,
                                               const AttackSpec& attack,
                                               std::span<const TokenId> query,
                                               int max_tokens) {
    std::unique_ptr<AttackPolicy> policy = attack.fresh_policy();
    try {
        return greedy_decode(model, query, max_tokens, policy.get(), false);
    } catch (const AttackDegenerateError&) {
        return std::nullopt;
    }
}

Verdict match_single(const GenerationTrace& trace, const Fingerprint& fp,
                     const Verifier& verifier, const Vocabulary& vocab) {
    switch (verifier.kind) {
        case VerifierKind::MpToken:
            return match_prefix_tokens(trace.emitted, fp.response);
        case VerifierKind::MpText:
            return match_prefix_text(detokenize(trace.emitted, vocab),
                                     detokenize(fp.response, vocab),
                                     verifier.mp_case_insensitive);
        case VerifierKind::Ms:
            return match_substring(detokenize(trace.emitted, vocab),
                                   detokenize(fp.response, vocab),
                                   verifier.mp_case_insensitive);
        case VerifierKind::Mk:
            return match_keyword(detokenize(trace.emitted, vocab),
                                 detokenize(fp.keyword, vocab));
        case VerifierKind::RougeL: {
            Verdict out;
            out.score = rouge_l(detokenize(trace.emitted, vocab),
                                detokenize(fp.response, vocab));
            out.verified = out.score >= verifier.rouge_threshold;
            return out;
        }
        case VerifierKind::WmPvalue: {
            if (verifier.greens == nullptr)
                throw ContractError("wm verifier: green sets not attached");
            if (trace.emitted.size() < 2) {
                Verdict out;
                out.score = 1.0;
                return out;
            }
            return watermark_verdict(trace.emitted, *verifier.greens, verifier.gamma,
                                     verifier.pvalue_threshold);
        }
        case VerifierKind::MkMulti:
            break;  // handled by the caller's re-query loop
    }
    throw ContractError("match_single: unexpected verifier kind");
}

}  // namespace

Verdict verify_one(const LanguageModel& model, const AttackSpec& attack, const Fingerprint& fp,
                   const Verifier& verifier, int max_tokens) {
    if (max_tokens < 1) throw ConfigError("verify_one: max_tokens must be >= 1");
    const Vocabulary& vocab = model.vocab();
    int decode_len = verifier.kind == VerifierKind::WmPvalue ? verifier.wm_response_len
                                                             : max_tokens;

    if (verifier.kind == VerifierKind::MkMulti) {
        // disjunctive protocol: the query plus every paraphrase, each decoded
        // with a fresh policy; verified as soon as any response carries the
        // keyword
        std::vector<const TokenSeq*> queries{&fp.query};
        for (const TokenSeq& p : fp.paraphrases) queries.push_back(&p);
        std::string keyword = detokenize(fp.keyword, vocab);
        Verdict out;
        out.ell = static_cast<int>(queries.size());
        for (std::size_t qi = 0; qi < queries.size(); ++qi) {
            if (attack.filter != nullptr && attack.filter->refuses(*queries[qi])) continue;
            std::optional<GenerationTrace> trace =
                attacked_decode(model, attack, *queries[qi], decode_len);
            if (!trace) continue;
            Verdict v = match_keyword(detokenize(trace->emitted, vocab), keyword);
            if (v.verified) {
                v.position = static_cast<std::ptrdiff_t>(qi);
                v.ell = out.ell;
                return v;
            }
        }
        return out;
    }

    if (attack.filter != nullptr && attack.filter->refuses(fp.query)) {
        Verdict refused;
        refused.score = verifier.kind == VerifierKind::WmPvalue ? 1.0 : 0.0;
        return refused;
    }
    std::optional<GenerationTrace> trace = attacked_decode(model, attack, fp.query, decode_len);
    if (!trace) {
        Verdict blocked;
        blocked.score = verifier.kind == VerifierKind::WmPvalue ? 1.0 : 0.0;
        return blocked;
    }
    return match_single(*trace, fp, verifier, vocab);
}

double run_asr(const LanguageModel& model, const AttackSpec& attack,
               const std::vector<Fingerprint>& fps, const Verifier& verifier, int max_tokens) {
    if (fps.empty()) throw ConfigError("run_asr: no fingerprints");
    int failures = 0;
    for (const Fingerprint& fp : fps) {
        if (!verify_one(model, attack, fp, verifier, max_tokens).verified) ++failures;
    }
    return static_cast<double>(failures) / static_cast<double>(fps.size());
}

double run_utility(const LanguageModel& base_model, const AttackSpec& attack,
                   const BenignQASuite& suite) {
    if (suite.pairs.empty()) throw ConfigError("run_utility: empty suite");
    const Vocabulary& vocab = base_model.vocab();
    auto correct = [&](const BenignPair& pair, const AttackSpec* spec) {
        if (spec != nullptr && spec->filter != nullptr && spec->filter->refuses(pair.query))
            return false;
        std::unique_ptr<AttackPolicy> policy = spec != nullptr ? spec->fresh_policy() : nullptr;
        GenerationTrace trace;
        try {
            trace = greedy_decode(base_model, pair.query, static_cast<int>(pair.gold.size()),
                                  policy.get(), false);
        } catch (const AttackDegenerateError&) {
            return false;
        }
        return match_prefix_text(detokenize(trace.emitted, vocab),
                                 detokenize(pair.gold, vocab), true)
            .verified;
    };

    int base_ok = 0;
    int attacked_ok = 0;
    for (const BenignPair& pair : suite.pairs) {
        if (correct(pair, nullptr)) ++base_ok;
        if (correct(pair, &attack)) ++attacked_ok;
    }
    if (base_ok == 0) throw ContractError("run_utility: suite unanswerable by its own base model");
    return static_cast<double>(attacked_ok) / static_cast<double>(base_ok);
}

// ---- declarative grid ----

std::string_view attack_kind_name(AttackKind kind) {
    switch (kind) {
        case AttackKind::None: return "none";
        case AttackKind::SuppressTopK: return "suppress_topk";
        case AttackKind::SuppressNeighbor: return "suppress_neighbor";
        case AttackKind::Lookahead: return "lookahead";
    }
    throw ContractError("attack_kind_name: unexpected kind");
}

AttackKind attack_kind_from_name(std::string_view name) {
    if (name == "none") return AttackKind::None;
    if (name == "suppress_topk") return AttackKind::SuppressTopK;
    if (name == "suppress_neighbor") return AttackKind::SuppressNeighbor;
    if (name == "lookahead") return AttackKind::Lookahead;
    throw ConfigError("unknown attack kind: " + std::string(name));
}

std::string attack_config_label(const AttackConfig& config) {
    std::string label;
    switch (config.kind) {
        case AttackKind::None:
            label = "none";
            break;
        case AttackKind::SuppressTopK:
            label = format_label("stk(k=%g,n=%g)", config.k, config.n);
            break;
        case AttackKind::SuppressNeighbor:
            label = format_label("sn(l=%g,n=%g)", config.l, config.n);
            break;
        case AttackKind::Lookahead:
            label = format_label("la(n=%g,penalty=%.3g)", config.n, config.penalty);
            break;
    }
    if (config.t_gen) label += format_label("+gate(%g)", *config.t_gen);
    return label;
}

AttackSpec make_attack(const AttackConfig& config) {
    AttackSpec spec;
    switch (config.kind) {
        case AttackKind::None:
            spec = no_attack();
            break;
        case AttackKind::SuppressTopK:
            spec = suppress_topk_attack(config.k, config.n);
            break;
        case AttackKind::SuppressNeighbor:
            spec = suppress_neighbor_attack(config.l, config.n);
            break;
        case AttackKind::Lookahead: {
            LookaheadParams params;
            params.n = config.n;
            params.penalty = config.penalty;
            spec = lookahead_attack(params);
            break;
        }
    }
    if (config.t_gen) {
        if (config.kind == AttackKind::None)
            throw ConfigError("attack config: gate requires an attack to wrap");
        spec = gated(std::move(spec), *config.t_gen);
    }
    return spec;
}

std::string ExperimentConfig::label() const {
    std::string out(scheme_name(scheme));
    out += " ";
    out += attack_config_label(attack);
    out += " ";
    out += verifier_kind_name(verifier);
    out += format_label(" fps=%g len=%g", fingerprint_count, max_tokens);
    out += " seed=" + std::to_string(seed);
    return out;
}

void validate(const ExperimentConfig& config) {
    if (config.fingerprint_count < 1) throw ConfigError("config: fingerprint count must be >= 1");
    if (config.max_tokens < 1) throw ConfigError("config: max_tokens must be >= 1");
    if (config.confidence < 0.0 || config.confidence >= 1.0)
        throw ConfigError("config: confidence must lie in [0,1)");
    const AttackConfig& a = config.attack;
    if (a.n < 1) throw ConfigError("config: suppression horizon n must be >= 1");
    if (a.n > 16) throw ConfigError("config: suppression horizon n is bounded by 16");
    if (a.kind == AttackKind::SuppressTopK && a.k < 1)
        throw ConfigError("config: suppression width k must be >= 1");
    if (a.kind == AttackKind::SuppressNeighbor && a.l < 1)
        throw ConfigError("config: candidate width l must be >= 1");
    if (a.kind == AttackKind::Lookahead && a.penalty <= 0.0)
        throw ConfigError("config: lookahead penalty must be positive");
    if (a.t_gen && (*a.t_gen <= 0.0 || *a.t_gen >= 1.0))
        throw ConfigError("config: gate t_gen must lie in (0,1)");
    if (a.t_gen && a.kind == AttackKind::None)
        throw ConfigError("config: gate requires an attack to wrap");
    if (config.verifier == VerifierKind::WmPvalue)
        throw ConfigError("config: the wm verifier runs through the watermark report pipeline");
}

TradeoffPoint evaluate_config(std::shared_ptr<const LanguageModel> base,
                              const std::vector<std::string>& corpus,
                              const ExperimentConfig& config, const BenignQASuite& suite) {
    validate(config);
    if (base == nullptr) throw ContractError("evaluate_config: null base model");

    Rng scheme_rng = Rng(config.seed).fork("scheme");
    double confidence =
        config.confidence > 0.0 ? config.confidence : default_confidence(config.scheme);

    std::vector<Fingerprint> fps;
    std::shared_ptr<const LanguageModel> serving = base;
    if (scheme_is_memorization(config.scheme)) {
        MemorizationSet set = gen_memorization_fingerprints(
            config.scheme, config.fingerprint_count, *base, corpus, scheme_rng);
        serving = embed_memorization(base, set, confidence,
                                     config.scheme == SchemeTag::ChainHash);
        fps = std::move(set.fingerprints);
    } else {
        fps = gen_intrinsic_fingerprints(config.scheme, config.fingerprint_count,
                                         kIntrinsicQueryLen, *base, corpus, scheme_rng);
    }

    AttackSpec attack = make_attack(config.attack);
    Verifier verifier;
    verifier.kind = config.verifier;

    TradeoffPoint point;
    point.asr = run_asr(*serving, attack, fps, verifier, config.max_tokens);
    point.utility = run_utility(*base, attack, suite);
    point.config = config.label();
    return point;
}

SweepResult sweep(std::shared_ptr<const LanguageModel> base,
                  const std::vector<std::string>& corpus,
                  const std::vector<ExperimentConfig>& configs, const BenignQASuite& suite) {
    if (configs.empty()) throw ConfigError("sweep: empty config list");
    SweepResult result;
    for (const ExperimentConfig& config : configs) {
        try {
            result.points.push_back(evaluate_config(base, corpus, config, suite));
        } catch (const std::exception& e) {
            result.failures.push_back({config.label(), e.what()});
        }
    }
    std::sort(result.points.begin(), result.points.end(),
              [](const TradeoffPoint& a, const TradeoffPoint& b) {
                  if (a.utility != b.utility) return a.utility < b.utility;
                  if (a.asr != b.asr) return a.asr < b.asr;
                  return a.config < b.config;
              });
    return result;
}

// ---- ROC ----

ROCResult roc_curve(const std::vector<double>& fp_scores,
                    const std::vector<double>& benign_scores) {
    if (fp_scores.empty() || benign_scores.empty())
        throw ConfigError("roc_curve: both score sets must be non-empty");

    std::vector<double> thresholds;
    thresholds.reserve(fp_scores.size() + benign_scores.size());
    thresholds.insert(thresholds.end(), fp_scores.begin(), fp_scores.end());
    thresholds.insert(thresholds.end(), benign_scores.begin(), benign_scores.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    // flagged = score >= tau; sorted copies turn each rate into a lower_bound
    std::vector<double> fp_sorted = fp_scores;
    std::vector<double> benign_sorted = benign_scores;
    std::sort(fp_sorted.begin(), fp_sorted.end());
    std::sort(benign_sorted.begin(), benign_sorted.end());
    auto rate_at = [](const std::vector<double>& sorted, double tau) {
        std::size_t below = static_cast<std::size_t>(
            std::lower_bound(sorted.begin(), sorted.end(), tau) - sorted.begin());
        return static_cast<double>(sorted.size() - below) / static_cast<double>(sorted.size());
    };

    ROCResult result;
    result.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    for (double tau : thresholds) {
        result.points.push_back({tau, rate_at(fp_sorted, tau), rate_at(benign_sorted, tau)});
    }
    for (std::size_t i = 1; i < result.points.size(); ++i) {
        const ROCPoint& prev = result.points[i - 1];
        const ROCPoint& cur = result.points[i];
        result.auc += (cur.fpr - prev.fpr) * (cur.tpr + prev.tpr) / 2.0;
    }
    return result;
}

// ---- watermark summary ----

WmReport wm_report(const LanguageModel& model, const AttackSpec& attack,
                   const std::vector<TokenSeq>& domain_prompts, const GreenSets& greens,
                   double gamma, int count, int gen_len, std::uint64_t seed) {
    if (count < 1) throw ConfigError("wm_report: count must be >= 1");
    if (gen_len < 1) throw ConfigError("wm_report: gen_len must be >= 1");
    if (static_cast<int>(domain_prompts.size()) < count)
        throw ConfigError("wm_report: fewer domain prompts than requested queries");

    Rng sampler(Rng(seed).fork("wmrep").next_u64());
    std::vector<double> pvalues;
    pvalues.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        std::uint64_t query_seed = sampler.next_u64();
        double p = 1.0;
        if (attack.filter == nullptr || !attack.filter->refuses(domain_prompts[i])) {
            std::unique_ptr<AttackPolicy> policy = attack.fresh_policy();
            try {
                GenerationTrace trace = sample_decode(model, domain_prompts[i], gen_len,
                                                      query_seed, policy.get(), false);
                if (trace.emitted.size() >= 2) p = watermark_pvalue(trace.emitted, greens, gamma);
            } catch (const AttackDegenerateError&) {
                p = 1.0;
            }
        }
        pvalues.push_back(p);
    }

    WmReport report;
    report.count = count;
    int evading = 0;
    for (double p : pvalues) {
        if (p >= 0.01) ++evading;
    }
    report.asr = static_cast<double>(evading) / static_cast<double>(count);
    std::sort(pvalues.begin(), pvalues.end());
    report.median_p = pvalues[pvalues.size() / 2];
    return report;
}

std::vector<TokenSeq> domain_prompts_from_corpus(const std::vector<std::string>& corpus,
                                                 const Vocabulary& vocab,
                                                 const DomainPredicate& domain, int len,
                                                 int count) {
    if (len < 1) throw ConfigError("domain prompts: len must be >= 1");
    if (count < 1) throw ConfigError("domain prompts: count must be >= 1");
    std::vector<TokenSeq> prompts;
    for (const std::string& doc : corpus) {
        TokenSeq tokens = tokenize(doc, vocab);
        if (tokens.size() < static_cast<std::size_t>(len)) continue;
        TokenSeq prefix(tokens.begin(), tokens.begin() + len);
        if (!domain(prefix)) continue;
        prompts.push_back(std::move(prefix));
        if (static_cast<int>(prompts.size()) == count) break;
    }
    return prompts;
}

}  // namespace fpsim
