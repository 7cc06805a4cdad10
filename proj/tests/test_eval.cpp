#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "fpsim/corpus.hpp"
#include "fpsim/decode.hpp"
#include "fpsim/errors.hpp"
#include "fpsim/eval.hpp"
#include "fpsim/schemes.hpp"
#include "fpsim/steal.hpp"
#include "fpsim/verify.hpp"
#include "fpsim/watermark.hpp"
#include "testutil.hpp"

using namespace fpsim;
using testutil::world;

namespace {

constexpr std::uint64_t kGreenSeed = 47;
constexpr std::uint64_t kGateSeed = 99;

Verifier make_verifier(VerifierKind kind) {
    Verifier v;
    v.kind = kind;
    return v;
}

// overlay with 16 planted InstrFp-style fingerprints at high confidence
struct OverlayFixture {
    std::vector<Fingerprint> fps;
    std::shared_ptr<const LanguageModel> model;
};

OverlayFixture instrfp_overlay(int count, double confidence) {
    const auto& w = world();
    Rng rng(testutil::kSeed + 31);
    MemorizationSet set = gen_memorization_fingerprints(SchemeTag::InstrFp, count, *w.base,
                                                        w.corpus, rng);
    OverlayFixture out;
    out.model = embed_memorization(w.base, set, confidence, false);
    out.fps = std::move(set.fingerprints);
    return out;
}

OverlayFixture chainhash_overlay(int count) {
    const auto& w = world();
    Rng rng(testutil::kSeed + 32);
    MemorizationSet set = gen_memorization_fingerprints(SchemeTag::ChainHash, count, *w.base,
                                                        w.corpus, rng);
    OverlayFixture out;
    out.model = embed_memorization(w.base, set, default_confidence(SchemeTag::ChainHash), true);
    out.fps = std::move(set.fingerprints);
    return out;
}

}  // namespace

TEST_CASE("asr is zero without attack and one under first-token suppression") {
    OverlayFixture fx = instrfp_overlay(16, 0.99);
    Verifier mp = make_verifier(VerifierKind::MpToken);

    CHECK(run_asr(*fx.model, no_attack(), fx.fps, mp, 24) == 0.0);
    CHECK(run_asr(*fx.model, suppress_topk_attack(1, 1), fx.fps, mp, 24) == 1.0);

    CHECK_THROWS_AS(run_asr(*fx.model, no_attack(), {}, mp, 24), ConfigError);
    CHECK_THROWS_AS(verify_one(*fx.model, no_attack(), fx.fps[0], mp, 0), ConfigError);
}

TEST_CASE("perplexity filter refuses random-token queries at benign thresholds") {
    const auto& w = world();
    Rng rng(testutil::kSeed + 33);
    std::vector<Fingerprint> rofl =
        gen_intrinsic_fingerprints(SchemeTag::Rofl, 64, 16, *w.base, w.corpus, rng);

    // benign side: corpus sentence prefixes under the same reference model
    std::vector<double> benign_scores;
    for (const std::string& doc : w.corpus) {
        TokenSeq toks = tokenize(doc, *w.vocab);
        if (toks.size() < 8) continue;
        benign_scores.push_back(log_perplexity(*w.base, TokenSeq(toks.begin(), toks.begin() + 8)));
        if (benign_scores.size() == 200) break;
    }
    REQUIRE(benign_scores.size() == 200);
    std::vector<double> sorted = benign_scores;
    std::sort(sorted.begin(), sorted.end());
    double tau = sorted[static_cast<std::size_t>(0.99 * static_cast<double>(sorted.size()))];

    InputFilter filter{w.base, tau};
    AttackSpec attack = filter_attack(&filter);
    double asr = run_asr(*w.base, attack, rofl, make_verifier(VerifierKind::MpToken), 24);
    CHECK(asr >= 0.99);

    // benign refusal stays at the size of the tail above the threshold
    int refused = 0;
    for (double s : benign_scores) {
        if (s > tau) ++refused;
    }
    CHECK(static_cast<double>(refused) / static_cast<double>(benign_scores.size()) <= 0.01);

    // detector scores feed the ROC: near-perfect separation at desk scale
    std::vector<double> fp_scores;
    for (const Fingerprint& fp : rofl) fp_scores.push_back(log_perplexity(*w.base, fp.query));
    CHECK(roc_curve(fp_scores, benign_scores).auc >= 0.99);

    CHECK_THROWS_AS(filter_attack(nullptr), ContractError);
}

TEST_CASE("utility is exact for the identity attack and drops under suppression") {
    const auto& w = world();
    Rng rng(testutil::kSeed + 34);
    BenignQASuite suite = build_benign_suite(*w.base, w.corpus, 40, 0.5, rng);

    CHECK(run_utility(*w.base, no_attack(), suite) == 1.0);
    CHECK(run_utility(*w.base, suppress_topk_attack(1, 16), suite) < 0.8);

    BenignQASuite empty;
    CHECK_THROWS_AS(run_utility(*w.base, no_attack(), empty), ConfigError);
}

TEST_CASE("gated suppression is a no-op on generations below the gate") {
    const auto& w = world();
    Rng rng(testutil::kSeed + 35);
    BenignQASuite pool = build_benign_suite(*w.base, w.corpus, 40, 0.0, rng);

    // keep only pairs whose entire gold continuation runs below the gate
    BenignQASuite low;
    low.gold_len = pool.gold_len;
    for (const BenignPair& pair : pool.pairs) {
        GenerationTrace trace =
            greedy_decode(*w.base, pair.query, static_cast<int>(pair.gold.size()), nullptr, false);
        bool below = true;
        for (const StepRecord& step : trace.steps) {
            if (step.pre_max >= 0.9) below = false;
        }
        if (below) low.pairs.push_back(pair);
    }
    REQUIRE(low.pairs.size() >= 5);

    AttackSpec gated_sn = gated(suppress_neighbor_attack(3, 8), 0.9);
    CHECK(run_utility(*w.base, gated_sn, low) == 1.0);

    CHECK_THROWS_AS(gated(no_attack(), 0.9), ContractError);
    CHECK_THROWS_AS(gated(suppress_topk_attack(1, 1), 1.5), ConfigError);
}

TEST_CASE("sweep orders points, keeps failures, and shows monotone trends") {
    const auto& w = world();
    Rng rng(testutil::kSeed + 36);
    BenignQASuite suite = build_benign_suite(*w.base, w.corpus, 40, 0.5, rng);

    CHECK_THROWS_AS(sweep(w.base, w.corpus, {}, suite), ConfigError);

    // horizon sweep: longer suppression never lowers ASR
    std::vector<ExperimentConfig> configs;
    for (int n : {1, 2, 4, 8, 16}) {
        ExperimentConfig cfg;
        cfg.scheme = SchemeTag::ChainHash;
        cfg.attack.kind = AttackKind::SuppressTopK;
        cfg.attack.k = 1;
        cfg.attack.n = n;
        cfg.verifier = VerifierKind::Ms;
        cfg.max_tokens = 32;
        cfg.seed = 5;
        configs.push_back(cfg);
    }
    SweepResult horizon = sweep(w.base, w.corpus, configs, suite);
    REQUIRE(horizon.points.size() == configs.size());
    CHECK(horizon.failures.empty());
    // recover grid order by label, then audit the trend
    std::vector<double> asr_by_n;
    for (const ExperimentConfig& cfg : configs) {
        for (const TradeoffPoint& p : horizon.points) {
            if (p.config == cfg.label()) asr_by_n.push_back(p.asr);
        }
    }
    REQUIRE(asr_by_n.size() == configs.size());
    for (std::size_t i = 1; i < asr_by_n.size(); ++i) REQUIRE(asr_by_n[i] >= asr_by_n[i - 1]);
    CHECK(asr_by_n.front() < asr_by_n.back());  // the trend is real, not flat
    for (const TradeoffPoint& p : horizon.points) {
        CHECK(p.utility >= 0.0);
        CHECK(p.utility <= 1.0 + 1e-9);
        CHECK(p.asr >= 0.0);
        CHECK(p.asr <= 1.0);
    }
    for (std::size_t i = 1; i < horizon.points.size(); ++i) {
        CHECK(horizon.points[i].utility >= horizon.points[i - 1].utility);
    }

    // gate sweep: adding the output gate never costs utility
    ExperimentConfig plain;
    plain.scheme = SchemeTag::InstrFp;
    plain.attack.kind = AttackKind::SuppressNeighbor;
    plain.attack.l = 3;
    plain.attack.n = 8;
    plain.verifier = VerifierKind::Ms;
    plain.seed = 6;
    ExperimentConfig gated_cfg = plain;
    gated_cfg.attack.t_gen = 0.9;
    SweepResult gate = sweep(w.base, w.corpus, {plain, gated_cfg}, suite);
    REQUIRE(gate.points.size() == 2);
    double u_plain = 0.0, u_gated = 0.0;
    for (const TradeoffPoint& p : gate.points) {
        if (p.config == plain.label()) u_plain = p.utility;
        if (p.config == gated_cfg.label()) u_gated = p.utility;
    }
    CHECK(u_gated >= u_plain);

    // an invalid config is recorded, the rest of the sweep still runs
    ExperimentConfig bad = plain;
    bad.attack.n = 32;
    SweepResult mixed = sweep(w.base, w.corpus, {bad, plain}, suite);
    CHECK(mixed.points.size() == 1);
    REQUIRE(mixed.failures.size() == 1);
    CHECK(mixed.failures[0].config == bad.label());
    CHECK(mixed.failures[0].error.find("16") != std::string::npos);

    CHECK_THROWS_AS(validate(bad), ConfigError);
    ExperimentConfig wm_cfg = plain;
    wm_cfg.verifier = VerifierKind::WmPvalue;
    CHECK_THROWS_AS(validate(wm_cfg), ConfigError);
    ExperimentConfig no_fps = plain;
    no_fps.fingerprint_count = 0;
    CHECK_THROWS_AS(validate(no_fps), ConfigError);
}

TEST_CASE("attack kinds and labels round-trip") {
    for (AttackKind kind : {AttackKind::None, AttackKind::SuppressTopK,
                            AttackKind::SuppressNeighbor, AttackKind::Lookahead}) {
        CHECK(attack_kind_from_name(attack_kind_name(kind)) == kind);
    }
    CHECK_THROWS_AS(attack_kind_from_name("tickle"), ConfigError);

    AttackConfig cfg;
    cfg.kind = AttackKind::SuppressTopK;
    cfg.k = 2;
    cfg.n = 4;
    cfg.t_gen = 0.7;
    CHECK(attack_config_label(cfg) == "stk(k=2,n=4)+gate(0.7)");
    CHECK(make_attack(cfg).name == "stk(k=2,n=4)+gate(0.7)");
    AttackConfig bare;
    CHECK(attack_config_label(bare) == "none");
    bare.t_gen = 0.5;
    CHECK_THROWS_AS(make_attack(bare), ConfigError);
}

TEST_CASE("roc sweep covers both corners and scores separations correctly") {
    // dyadic sample counts make the trapezoid sums exact
    ROCResult perfect = roc_curve({2.0, 3.0, 4.0, 5.0}, {-1.0, 0.0, 0.5, 1.0});
    CHECK(perfect.auc == 1.0);
    REQUIRE(!perfect.points.empty());
    CHECK(perfect.points.front().tpr == 0.0);
    CHECK(perfect.points.front().fpr == 0.0);
    CHECK(perfect.points.back().tpr == 1.0);
    CHECK(perfect.points.back().fpr == 1.0);
    for (std::size_t i = 1; i < perfect.points.size(); ++i) {
        CHECK(perfect.points[i].threshold < perfect.points[i - 1].threshold);
        CHECK(perfect.points[i].tpr >= perfect.points[i - 1].tpr);
        CHECK(perfect.points[i].fpr >= perfect.points[i - 1].fpr);
    }

    ROCResult tied = roc_curve({1.0, 2.0, 3.0, 4.0}, {1.0, 2.0, 3.0, 4.0});
    CHECK(tied.auc == 0.5);

    // two samples from one distribution: AUC concentrates near 1/2
    Rng rng(testutil::kSeed + 37);
    std::vector<double> a, b;
    for (int i = 0; i < 500; ++i) a.push_back(rng.next_double());
    for (int i = 0; i < 500; ++i) b.push_back(rng.next_double());
    double null_auc = roc_curve(a, b).auc;
    CHECK(null_auc > 0.45);
    CHECK(null_auc < 0.55);

    CHECK_THROWS_AS(roc_curve({}, {1.0}), ConfigError);
    CHECK_THROWS_AS(roc_curve({1.0}, {}), ConfigError);
}

TEST_CASE("watermark report is tiny-p without attack and defeated by an oracle scrubber") {
    const auto& w = world();
    GreenSets greens = build_green_sets(*w.vocab, 0.5, kGreenSeed);
    DomainPredicate domain = make_domain_predicate(*w.vocab, health_keywords());
    auto wm = embed_watermark(w.base, greens, 4.0, domain, 0.0, kGateSeed);

    std::vector<TokenSeq> prompts = domain_prompts_from_corpus(w.corpus, *w.vocab, domain, 6, 60);
    REQUIRE(prompts.size() == 60);
    for (const TokenSeq& p : prompts) REQUIRE(domain(p));

    WmReport clean = wm_report(*wm, no_attack(), prompts, greens, 0.5, 40, 60);
    CHECK(clean.median_p < 1e-6);
    CHECK(clean.asr <= 0.05);
    CHECK(clean.count == 40);

    // identical inputs reproduce the report bit for bit
    WmReport again = wm_report(*wm, no_attack(), prompts, greens, 0.5, 40, 60);
    CHECK(again.asr == clean.asr);
    CHECK(again.median_p == clean.median_p);

    // perfect green knowledge scrubs the signal away
    StealReport oracle;
    for (const Token& t : w.vocab->tokens()) {
        if (!w.vocab->is_special(t.id)) oracle.t1_tokens.push_back(t.id);
    }
    oracle.g.assign(oracle.t1_tokens.size(), std::vector<double>(w.vocab->size(), 0.0));
    for (std::size_t i = 0; i < oracle.t1_tokens.size(); ++i) {
        for (std::size_t t2 = 0; t2 < w.vocab->size(); ++t2) {
            oracle.g[i][t2] =
                greens.is_green(oracle.t1_tokens[i], static_cast<TokenId>(t2)) ? 1.0 : -1.0;
        }
    }
    oracle.agg_max = oracle.g;
    oracle.agg_z = oracle.g;
    WmReport scrubbed = wm_report(*wm, scrub_attack(&oracle, 8.0), prompts, greens, 0.5, 40, 60);
    CHECK(scrubbed.asr >= 0.95);
    CHECK(scrubbed.median_p > clean.median_p);

    CHECK_THROWS_AS(wm_report(*wm, no_attack(), prompts, greens, 0.5, 100, 60), ConfigError);
    CHECK_THROWS_AS(scrub_attack(nullptr, 8.0), ContractError);
    CHECK_THROWS_AS(scrub_attack(&oracle, 0.0), ConfigError);
}

TEST_CASE("disjunctive keyword verification is never stricter than single-query") {
    const auto& w = world();
    Rng rng(testutil::kSeed + 38);
    MemorizationSet set =
        gen_memorization_fingerprints(SchemeTag::EditMf, 12, *w.base, w.corpus, rng);
    auto overlay = embed_memorization(w.base, set, default_confidence(SchemeTag::EditMf), false);
    REQUIRE(!set.fingerprints.empty());
    for (const Fingerprint& fp : set.fingerprints) REQUIRE(fp.paraphrases.size() == 4);

    // pick a refusal threshold that splits at least one fingerprint: primary
    // query refused, some paraphrase accepted. Each distinct query score is a
    // candidate threshold.
    std::vector<double> taus;
    for (const Fingerprint& fp : set.fingerprints) {
        taus.push_back(log_perplexity(*w.base, fp.query));
    }
    std::sort(taus.begin(), taus.end());
    InputFilter filter{w.base, 0.0};
    bool split_found = false;
    for (double tau : taus) {
        filter.tau = tau - 1e-9;
        for (const Fingerprint& fp : set.fingerprints) {
            if (!filter.refuses(fp.query)) continue;
            for (const TokenSeq& p : fp.paraphrases) {
                if (!filter.refuses(p)) split_found = true;
            }
        }
        if (split_found) break;
    }
    REQUIRE(split_found);

    AttackSpec attack = filter_attack(&filter);
    double asr_single =
        run_asr(*overlay, attack, set.fingerprints, make_verifier(VerifierKind::Mk), 24);
    double asr_multi =
        run_asr(*overlay, attack, set.fingerprints, make_verifier(VerifierKind::MkMulti), 24);
    CHECK(asr_multi <= asr_single);
    CHECK(asr_multi < asr_single);  // the threshold above guarantees one rescue

    // without any filter both protocols verify everything here
    CHECK(run_asr(*overlay, no_attack(), set.fingerprints,
                  make_verifier(VerifierKind::MkMulti), 24) == 0.0);
}

TEST_CASE("verifier strictness ordering holds under a midstream-resurfacing attack") {
    OverlayFixture fx = chainhash_overlay(24);
    AttackSpec attack = suppress_topk_attack(1, 1);

    double asr_mpt = run_asr(*fx.model, attack, fx.fps, make_verifier(VerifierKind::MpToken), 32);
    double asr_mpx = run_asr(*fx.model, attack, fx.fps, make_verifier(VerifierKind::MpText), 32);
    double asr_ms = run_asr(*fx.model, attack, fx.fps, make_verifier(VerifierKind::Ms), 32);
    double asr_mk = run_asr(*fx.model, attack, fx.fps, make_verifier(VerifierKind::Mk), 32);

    CHECK(asr_mpt >= asr_mpx);
    CHECK(asr_mpx >= asr_ms);
    CHECK(asr_ms >= asr_mk);
    // one killed first token leaves prefix matchers broken while the
    // suppressed response resurfaces for the substring matcher
    CHECK(asr_mpt == 1.0);
    CHECK(asr_ms < 1.0);
}
