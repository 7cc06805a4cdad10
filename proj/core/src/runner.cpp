#include "fpsim/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fpsim/benign.hpp"
#include "fpsim/corpus.hpp"
#include "fpsim/decode.hpp"
#include "fpsim/errors.hpp"
#include "fpsim/eval.hpp"
#include "fpsim/ngram.hpp"
#include "fpsim/rng.hpp"
#include "fpsim/schemes.hpp"
#include "fpsim/steal.hpp"
#include "fpsim/verify.hpp"
#include "fpsim/watermark.hpp"

namespace fpsim {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "fpsim 0.1.0";

// ---- small file helpers (one writer per output file) ----

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

// content hash recorded in the manifest; FNV-1a over the raw bytes
std::string content_hash(const std::string& content) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a64:%016" PRIx64, Rng::hash_str(content));
    return buf;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// ---- config schema ----

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

void check_keys(const json& obj, const char* section,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object())
        throw ConfigError(std::string("config: section '") + section + "' must be an object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) known = true;
        }
        if (!known)
            throw ConfigError(std::string("config: unknown key '") + item.key() + "' in '" +
                              section + "'");
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const char* section) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config: bad value for '") + section + "." + key + "'");
    }
}

struct CorpusSection {
    std::string path;  // empty: synthesize
    std::uint64_t synthetic_seed = 20240817;
    CorpusParams params;
};

struct ModelSection {
    std::string path;  // empty: train from the corpus
    int order = 3;
    double alpha = 0.01;
};

struct SchemeSection {
    std::string name = "instrfp";  // scheme tag name, or "dsw" for the watermark
    int count = 16;
    double confidence = 0.0;  // 0: scheme default
    int query_len = 16;       // intrinsic schemes
    double gamma = 0.5;       // watermark knobs
    double wm_bias = 4.0;
    double leakage = 0.0;
    std::uint64_t green_seed = 47;
    std::uint64_t gate_seed = 99;
};

struct VerifierSection {
    std::string kind = "MS";
    int max_tokens = 24;
    double rouge_threshold = 0.9;
    bool mp_case_insensitive = false;
};

struct RocSection {
    int fp_count = 128;
    int benign_count = 500;
    int query_len = 16;        // random-token probe length
    int benign_prefix_len = 8; // benign corpus query length
};

struct StealSection {
    int probe_count = 620;     // token-forced probes issued
    int common_words = 200;    // distinct forcing words, cycled
    int keep = 200;            // flagged texts kept for the report
    int gen_len = 60;          // leaked generation length
    double flag_threshold = 0.01;
    int t1_count = 200;
    double p_thresh = 5e-3;
    int calib_order = 2;
    double calib_alpha = 0.1;
    std::vector<double> deltas = {2.0, 4.0, 8.0, 12.0};
    int wm_count = 100;
    int wm_gen_len = 200;
    int domain_prompt_len = 6;
};

struct EvalSection {
    int suite_count = 40;
    double suite_high_conf = 0.5;
    int suite_gold_len = 4;
    std::vector<AttackConfig> sweep_attacks;
    RocSection roc;
    StealSection steal;
};

struct Config {
    std::uint64_t seed = 1;
    CorpusSection corpus;
    ModelSection model;
    SchemeSection scheme;
    AttackConfig attack;
    VerifierSection verifier;
    EvalSection eval;
    json resolved;  // full echo with defaults applied
};

AttackConfig parse_attack(const json& obj, const char* section) {
    check_keys(obj, section, {"kind", "k", "n", "l", "penalty", "t_gen"});
    AttackConfig out;
    out.kind = attack_kind_from_name(get_or<std::string>(obj, "kind", "none", section));
    out.k = get_or(obj, "k", out.k, section);
    out.n = get_or(obj, "n", out.n, section);
    out.l = get_or(obj, "l", out.l, section);
    out.penalty = get_or(obj, "penalty", out.penalty, section);
    if (obj.contains("t_gen") && !obj.at("t_gen").is_null())
        out.t_gen = get_or(obj, "t_gen", 0.0, section);
    return out;
}

json attack_to_json(const AttackConfig& a) {
    json out;
    out["kind"] = std::string(attack_kind_name(a.kind));
    out["k"] = a.k;
    out["n"] = a.n;
    out["l"] = a.l;
    out["penalty"] = a.penalty;
    out["t_gen"] = a.t_gen ? json(*a.t_gen) : json(nullptr);
    return out;
}

Config load_config(const RunOptions& options) {
    json doc = json::object();
    if (!options.config_path.empty()) {
        doc = parse_json(read_file(options.config_path), "config " + options.config_path);
    }
    check_keys(doc, "<top>", {"seed", "corpus", "model", "scheme", "attack", "verifier", "eval"});

    Config cfg;
    cfg.seed = get_or<std::uint64_t>(doc, "seed", cfg.seed, "<top>");
    if (options.seed) cfg.seed = *options.seed;

    json c = doc.value("corpus", json::object());
    check_keys(c, "corpus",
               {"path", "synthetic_seed", "factual_pairs", "factual_reps", "filler_docs",
                "health_docs", "content_words", "name_words"});
    cfg.corpus.path = get_or<std::string>(c, "path", "", "corpus");
    cfg.corpus.synthetic_seed =
        get_or<std::uint64_t>(c, "synthetic_seed", cfg.corpus.synthetic_seed, "corpus");
    CorpusParams& cp = cfg.corpus.params;
    cp.factual_pairs = get_or(c, "factual_pairs", cp.factual_pairs, "corpus");
    cp.factual_reps = get_or(c, "factual_reps", cp.factual_reps, "corpus");
    cp.filler_docs = get_or(c, "filler_docs", cp.filler_docs, "corpus");
    cp.health_docs = get_or(c, "health_docs", cp.health_docs, "corpus");
    cp.content_words = get_or(c, "content_words", cp.content_words, "corpus");
    cp.name_words = get_or(c, "name_words", cp.name_words, "corpus");

    json m = doc.value("model", json::object());
    check_keys(m, "model", {"path", "order", "alpha"});
    cfg.model.path = get_or<std::string>(m, "path", "", "model");
    cfg.model.order = get_or(m, "order", cfg.model.order, "model");
    cfg.model.alpha = get_or(m, "alpha", cfg.model.alpha, "model");

    json s = doc.value("scheme", json::object());
    check_keys(s, "scheme",
               {"name", "count", "confidence", "query_len", "gamma", "wm_bias", "leakage",
                "green_seed", "gate_seed"});
    cfg.scheme.name = get_or<std::string>(s, "name", cfg.scheme.name, "scheme");
    cfg.scheme.count = get_or(s, "count", cfg.scheme.count, "scheme");
    cfg.scheme.confidence = get_or(s, "confidence", cfg.scheme.confidence, "scheme");
    cfg.scheme.query_len = get_or(s, "query_len", cfg.scheme.query_len, "scheme");
    cfg.scheme.gamma = get_or(s, "gamma", cfg.scheme.gamma, "scheme");
    cfg.scheme.wm_bias = get_or(s, "wm_bias", cfg.scheme.wm_bias, "scheme");
    cfg.scheme.leakage = get_or(s, "leakage", cfg.scheme.leakage, "scheme");
    cfg.scheme.green_seed = get_or<std::uint64_t>(s, "green_seed", cfg.scheme.green_seed, "scheme");
    cfg.scheme.gate_seed = get_or<std::uint64_t>(s, "gate_seed", cfg.scheme.gate_seed, "scheme");
    if (cfg.scheme.name != "dsw") scheme_from_name(cfg.scheme.name);  // reject unknown early

    cfg.attack = parse_attack(doc.value("attack", json::object()), "attack");

    json v = doc.value("verifier", json::object());
    check_keys(v, "verifier", {"kind", "max_tokens", "rouge_threshold", "mp_case_insensitive"});
    cfg.verifier.kind = get_or<std::string>(v, "kind", cfg.verifier.kind, "verifier");
    cfg.verifier.max_tokens = get_or(v, "max_tokens", cfg.verifier.max_tokens, "verifier");
    cfg.verifier.rouge_threshold =
        get_or(v, "rouge_threshold", cfg.verifier.rouge_threshold, "verifier");
    cfg.verifier.mp_case_insensitive =
        get_or(v, "mp_case_insensitive", cfg.verifier.mp_case_insensitive, "verifier");
    verifier_kind_from_name(cfg.verifier.kind);  // reject unknown early

    json e = doc.value("eval", json::object());
    check_keys(e, "eval",
               {"suite_count", "suite_high_conf", "suite_gold_len", "sweep", "roc", "steal"});
    cfg.eval.suite_count = get_or(e, "suite_count", cfg.eval.suite_count, "eval");
    cfg.eval.suite_high_conf = get_or(e, "suite_high_conf", cfg.eval.suite_high_conf, "eval");
    cfg.eval.suite_gold_len = get_or(e, "suite_gold_len", cfg.eval.suite_gold_len, "eval");
    if (e.contains("sweep")) {
        if (!e.at("sweep").is_array()) throw ConfigError("config: eval.sweep must be an array");
        for (const json& a : e.at("sweep")) {
            cfg.eval.sweep_attacks.push_back(parse_attack(a, "eval.sweep[]"));
        }
    }
    json r = e.value("roc", json::object());
    check_keys(r, "eval.roc", {"fp_count", "benign_count", "query_len", "benign_prefix_len"});
    cfg.eval.roc.fp_count = get_or(r, "fp_count", cfg.eval.roc.fp_count, "eval.roc");
    cfg.eval.roc.benign_count = get_or(r, "benign_count", cfg.eval.roc.benign_count, "eval.roc");
    cfg.eval.roc.query_len = get_or(r, "query_len", cfg.eval.roc.query_len, "eval.roc");
    cfg.eval.roc.benign_prefix_len =
        get_or(r, "benign_prefix_len", cfg.eval.roc.benign_prefix_len, "eval.roc");
    json st = e.value("steal", json::object());
    check_keys(st, "eval.steal",
               {"probe_count", "common_words", "keep", "gen_len", "flag_threshold", "t1_count",
                "p_thresh", "calib_order", "calib_alpha", "deltas", "wm_count", "wm_gen_len",
                "domain_prompt_len"});
    StealSection& ss = cfg.eval.steal;
    ss.probe_count = get_or(st, "probe_count", ss.probe_count, "eval.steal");
    ss.common_words = get_or(st, "common_words", ss.common_words, "eval.steal");
    ss.keep = get_or(st, "keep", ss.keep, "eval.steal");
    ss.gen_len = get_or(st, "gen_len", ss.gen_len, "eval.steal");
    ss.flag_threshold = get_or(st, "flag_threshold", ss.flag_threshold, "eval.steal");
    ss.t1_count = get_or(st, "t1_count", ss.t1_count, "eval.steal");
    ss.p_thresh = get_or(st, "p_thresh", ss.p_thresh, "eval.steal");
    ss.calib_order = get_or(st, "calib_order", ss.calib_order, "eval.steal");
    ss.calib_alpha = get_or(st, "calib_alpha", ss.calib_alpha, "eval.steal");
    ss.deltas = get_or(st, "deltas", ss.deltas, "eval.steal");
    ss.wm_count = get_or(st, "wm_count", ss.wm_count, "eval.steal");
    ss.wm_gen_len = get_or(st, "wm_gen_len", ss.wm_gen_len, "eval.steal");
    ss.domain_prompt_len = get_or(st, "domain_prompt_len", ss.domain_prompt_len, "eval.steal");

    // full echo: every resolved value, defaults included
    json echo;
    echo["seed"] = cfg.seed;
    echo["corpus"] = {{"path", cfg.corpus.path},
                      {"synthetic_seed", cfg.corpus.synthetic_seed},
                      {"factual_pairs", cp.factual_pairs},
                      {"factual_reps", cp.factual_reps},
                      {"filler_docs", cp.filler_docs},
                      {"health_docs", cp.health_docs},
                      {"content_words", cp.content_words},
                      {"name_words", cp.name_words}};
    echo["model"] = {{"path", cfg.model.path},
                     {"order", cfg.model.order},
                     {"alpha", cfg.model.alpha}};
    echo["scheme"] = {{"name", cfg.scheme.name},
                      {"count", cfg.scheme.count},
                      {"confidence", cfg.scheme.confidence},
                      {"query_len", cfg.scheme.query_len},
                      {"gamma", cfg.scheme.gamma},
                      {"wm_bias", cfg.scheme.wm_bias},
                      {"leakage", cfg.scheme.leakage},
                      {"green_seed", cfg.scheme.green_seed},
                      {"gate_seed", cfg.scheme.gate_seed}};
    echo["attack"] = attack_to_json(cfg.attack);
    echo["verifier"] = {{"kind", cfg.verifier.kind},
                        {"max_tokens", cfg.verifier.max_tokens},
                        {"rouge_threshold", cfg.verifier.rouge_threshold},
                        {"mp_case_insensitive", cfg.verifier.mp_case_insensitive}};
    json sweep_echo = json::array();
    for (const AttackConfig& a : cfg.eval.sweep_attacks) sweep_echo.push_back(attack_to_json(a));
    echo["eval"] = {{"suite_count", cfg.eval.suite_count},
                    {"suite_high_conf", cfg.eval.suite_high_conf},
                    {"suite_gold_len", cfg.eval.suite_gold_len},
                    {"sweep", sweep_echo},
                    {"roc",
                     {{"fp_count", cfg.eval.roc.fp_count},
                      {"benign_count", cfg.eval.roc.benign_count},
                      {"query_len", cfg.eval.roc.query_len},
                      {"benign_prefix_len", cfg.eval.roc.benign_prefix_len}}},
                    {"steal",
                     {{"probe_count", ss.probe_count},
                      {"common_words", ss.common_words},
                      {"keep", ss.keep},
                      {"gen_len", ss.gen_len},
                      {"flag_threshold", ss.flag_threshold},
                      {"t1_count", ss.t1_count},
                      {"p_thresh", ss.p_thresh},
                      {"calib_order", ss.calib_order},
                      {"calib_alpha", ss.calib_alpha},
                      {"deltas", ss.deltas},
                      {"wm_count", ss.wm_count},
                      {"wm_gen_len", ss.wm_gen_len},
                      {"domain_prompt_len", ss.domain_prompt_len}}}};
    cfg.resolved = std::move(echo);
    return cfg;
}

// ---- shared pipeline pieces ----

std::vector<std::string> load_corpus(const CorpusSection& section) {
    if (!section.path.empty()) return read_corpus_file(section.path);
    return synthetic_corpus(section.params, section.synthetic_seed);
}

std::shared_ptr<const NGramModel> load_model(const Config& cfg,
                                             const std::vector<std::string>& corpus) {
    if (!cfg.model.path.empty()) {
        return std::make_shared<NGramModel>(NGramModel::from_json(read_file(cfg.model.path)));
    }
    auto vocab = std::make_shared<const Vocabulary>(build_vocab(corpus));
    return train_ngram(corpus, vocab, cfg.model.order, cfg.model.alpha);
}

std::string out_path(const RunOptions& options, const char* name) {
    return (std::filesystem::path(options.out_dir) / name).string();
}

struct ArtifactLog {
    std::vector<std::pair<std::string, std::string>> hashes;  // name -> content hash

    void write(const RunOptions& options, const char* name, const std::string& content) {
        write_file(out_path(options, name), content);
        hashes.emplace_back(name, content_hash(content));
        std::printf("wrote %s\n", out_path(options, name).c_str());
    }
};

void emit_manifest(const RunOptions& options, const Config& cfg, const char* command,
                   ArtifactLog& artifacts, json extra = json::object()) {
    json manifest;
    manifest["command"] = command;
    manifest["config_path"] = options.config_path;
    manifest["out_dir"] = options.out_dir;
    manifest["seed"] = cfg.seed;
    manifest["substreams"] = {"scheme", "attack", "eval"};
    manifest["resolved"] = cfg.resolved;
    json hashes;
    for (const auto& [name, hash] : artifacts.hashes) hashes[name] = hash;
    manifest["artifacts"] = hashes;
    manifest["version"] = kVersion;
    for (const auto& item : extra.items()) manifest[item.key()] = item.value();
    artifacts.write(options, "manifest.json", manifest.dump(2) + "\n");
}

std::string corpus_text(const std::vector<std::string>& docs) {
    std::string out;
    for (const std::string& doc : docs) {
        out += doc;
        out += '\n';
    }
    return out;
}

// frequency-ranked non-special, non-punctuation tokens outside the watermark
// domain; the attacker's forcing-word list
std::vector<TokenId> common_forcing_words(const std::vector<std::string>& corpus,
                                          const Vocabulary& vocab, int count) {
    std::vector<std::int64_t> freq(vocab.size(), 0);
    for (const std::string& doc : corpus) {
        for (TokenId t : tokenize(doc, vocab)) freq[static_cast<std::size_t>(t)]++;
    }
    std::vector<bool> domain_token(vocab.size(), false);
    for (const std::string& kw : health_keywords()) {
        TokenSeq toks = tokenize(kw, vocab);
        if (!toks.empty()) domain_token[static_cast<std::size_t>(toks[0])] = true;
    }
    std::vector<TokenId> order;
    for (std::size_t t = 0; t < freq.size(); ++t) {
        TokenId id = static_cast<TokenId>(t);
        if (freq[t] == 0 || domain_token[t] || vocab.is_special(id) || vocab.is_punctuation(id))
            continue;
        order.push_back(id);
    }
    std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
        return freq[static_cast<std::size_t>(a)] > freq[static_cast<std::size_t>(b)];
    });
    if (static_cast<int>(order.size()) < count)
        throw ConfigError("steal: corpus has fewer candidate forcing words than requested");
    order.resize(static_cast<std::size_t>(count));
    return order;
}

std::string csv_quote(const std::string& field) { return "\"" + field + "\""; }

}  // namespace

// ---- commands ----

void cmd_build(const RunOptions& options) {
    Config cfg = load_config(options);
    std::vector<std::string> corpus = load_corpus(cfg.corpus);
    auto vocab = std::make_shared<const Vocabulary>(build_vocab(corpus));
    if (options.dry_run) {
        std::printf("plan: build model order=%d alpha=%g over %zu docs (|V|=%zu) -> %s\n",
                    cfg.model.order, cfg.model.alpha, corpus.size(), vocab->size(),
                    options.out_dir.c_str());
        return;
    }
    auto model = train_ngram(corpus, vocab, cfg.model.order, cfg.model.alpha);

    ArtifactLog artifacts;
    artifacts.write(options, "corpus.txt", corpus_text(corpus));
    artifacts.write(options, "model.json", model->to_json());
    std::string vocab_lines;
    for (const Token& t : vocab->tokens()) {
        vocab_lines += t.surface;
        vocab_lines += '\n';
    }
    artifacts.write(options, "vocab.txt", vocab_lines);
    json extra;
    extra["vocab_size"] = vocab->size();
    extra["docs"] = corpus.size();
    emit_manifest(options, cfg, "build", artifacts, extra);
}

void cmd_fingerprint(const RunOptions& options) {
    Config cfg = load_config(options);
    if (cfg.scheme.count < 1) throw ConfigError("fingerprint: count must be >= 1");
    std::vector<std::string> corpus = load_corpus(cfg.corpus);
    std::shared_ptr<const NGramModel> base = load_model(cfg, corpus);

    if (options.dry_run) {
        std::printf("plan: fingerprint scheme=%s count=%d seed=%" PRIu64 " -> %s\n",
                    cfg.scheme.name.c_str(), cfg.scheme.count, cfg.seed, options.out_dir.c_str());
        return;
    }

    ArtifactLog artifacts;
    json extra;
    json spec;
    if (cfg.scheme.name == "dsw") {
        spec["kind"] = "watermark";
        spec["gamma"] = cfg.scheme.gamma;
        spec["wm_bias"] = cfg.scheme.wm_bias;
        spec["leakage"] = cfg.scheme.leakage;
        spec["green_seed"] = cfg.scheme.green_seed;
        spec["gate_seed"] = cfg.scheme.gate_seed;
        spec["domain_keywords"] = health_keywords();
        extra["green_seed"] = cfg.scheme.green_seed;
    } else {
        SchemeTag tag = scheme_from_name(cfg.scheme.name);
        Rng scheme_rng = Rng(cfg.seed).fork("scheme");
        double confidence =
            cfg.scheme.confidence > 0.0 ? cfg.scheme.confidence : default_confidence(tag);
        if (scheme_is_memorization(tag)) {
            MemorizationSet set = gen_memorization_fingerprints(tag, cfg.scheme.count, *base,
                                                                corpus, scheme_rng);
            artifacts.write(options, "fingerprints.json",
                            fingerprints_to_json(set.fingerprints, base->vocab()));
            if (!set.decoys.empty()) {
                artifacts.write(options, "decoys.json",
                                fingerprints_to_json(set.decoys, base->vocab()));
            }
            spec["kind"] = "memorization_overlay";
            spec["confidence"] = confidence;
            spec["midstream"] = tag == SchemeTag::ChainHash;
            spec["fingerprints_file"] = "fingerprints.json";
            spec["decoys_file"] = set.decoys.empty() ? json(nullptr) : json("decoys.json");
        } else {
            std::vector<Fingerprint> fps = gen_intrinsic_fingerprints(
                tag, cfg.scheme.count, cfg.scheme.query_len, *base, corpus, scheme_rng);
            artifacts.write(options, "fingerprints.json",
                            fingerprints_to_json(fps, base->vocab()));
            spec["kind"] = "intrinsic";
            spec["fingerprints_file"] = "fingerprints.json";
        }
        spec["scheme"] = cfg.scheme.name;
        spec["count"] = cfg.scheme.count;
    }
    spec["base_model"] = cfg.model.path.empty() ? json(nullptr) : json(cfg.model.path);
    artifacts.write(options, "fpmodel.json", spec.dump(2) + "\n");
    emit_manifest(options, cfg, "fingerprint", artifacts, extra);
}

namespace {

// fan the configs out to a small worker pool; results land in config order so
// the output is identical to the serial sweep
SweepResult parallel_sweep(std::shared_ptr<const LanguageModel> base,
                           const std::vector<std::string>& corpus,
                           const std::vector<ExperimentConfig>& configs,
                           const BenignQASuite& suite, int jobs) {
    std::vector<std::optional<TradeoffPoint>> points(configs.size());
    std::vector<std::optional<SweepFailure>> failures(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < configs.size(); i = next.fetch_add(1)) {
            try {
                points[i] = evaluate_config(base, corpus, configs[i], suite);
            } catch (const std::exception& e) {
                failures[i] = SweepFailure{configs[i].label(), e.what()};
            }
        }
    };
    std::vector<std::thread> pool;
    int n_threads = std::min<int>(jobs, static_cast<int>(configs.size()));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    SweepResult result;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (points[i]) result.points.push_back(*points[i]);
        if (failures[i]) result.failures.push_back(*failures[i]);
    }
    std::sort(result.points.begin(), result.points.end(),
              [](const TradeoffPoint& a, const TradeoffPoint& b) {
                  if (a.utility != b.utility) return a.utility < b.utility;
                  if (a.asr != b.asr) return a.asr < b.asr;
                  return a.config < b.config;
              });
    return result;
}

}  // namespace

void cmd_attack_eval(const RunOptions& options) {
    Config cfg = load_config(options);
    if (cfg.scheme.name == "dsw")
        throw ConfigError("attack-eval: the watermark pipeline runs under the steal command");

    // schema work first: the full plan must validate before any compute
    std::vector<AttackConfig> attacks = cfg.eval.sweep_attacks;
    if (attacks.empty()) attacks.push_back(cfg.attack);
    std::vector<ExperimentConfig> configs;
    for (const AttackConfig& attack : attacks) {
        ExperimentConfig ec;
        ec.scheme = scheme_from_name(cfg.scheme.name);
        ec.confidence = cfg.scheme.confidence;
        ec.attack = attack;
        ec.verifier = verifier_kind_from_name(cfg.verifier.kind);
        ec.fingerprint_count = cfg.scheme.count;
        ec.max_tokens = cfg.verifier.max_tokens;
        ec.seed = cfg.seed;
        validate(ec);
        configs.push_back(ec);
    }
    if (options.jobs < 1) throw ConfigError("attack-eval: jobs must be >= 1");

    if (options.dry_run) {
        std::printf("plan: attack-eval %zu config(s), suite %d pairs (%.0f%% high-conf), jobs=%d\n",
                    configs.size(), cfg.eval.suite_count, 100.0 * cfg.eval.suite_high_conf,
                    options.jobs);
        for (const ExperimentConfig& ec : configs) std::printf("plan: %s\n", ec.label().c_str());
        return;
    }

    std::vector<std::string> corpus = load_corpus(cfg.corpus);
    std::shared_ptr<const NGramModel> base = load_model(cfg, corpus);
    Rng eval_rng = Rng(cfg.seed).fork("eval");
    BenignQASuite suite = build_benign_suite(*base, corpus, cfg.eval.suite_count,
                                             cfg.eval.suite_high_conf, eval_rng, nullptr,
                                             cfg.eval.suite_gold_len);

    SweepResult result = options.jobs == 1
                             ? sweep(base, corpus, configs, suite)
                             : parallel_sweep(base, corpus, configs, suite, options.jobs);

    std::string csv = "config,utility,asr\n";
    for (const TradeoffPoint& p : result.points) {
        csv += csv_quote(p.config) + "," + fmt_double(p.utility) + "," + fmt_double(p.asr) + "\n";
    }

    json report;
    report["command"] = "attack-eval";
    report["version"] = kVersion;
    report["seed"] = cfg.seed;
    report["suite"] = {{"count", cfg.eval.suite_count},
                       {"high_conf", cfg.eval.suite_high_conf},
                       {"gold_len", cfg.eval.suite_gold_len}};
    json points = json::array();
    for (const TradeoffPoint& p : result.points) {
        points.push_back({{"config", p.config}, {"utility", p.utility}, {"asr", p.asr}});
    }
    report["points"] = points;
    json failures = json::array();
    for (const SweepFailure& f : result.failures) {
        failures.push_back({{"config", f.config}, {"error", f.error}});
    }
    report["failures"] = failures;

    ArtifactLog artifacts;
    artifacts.write(options, "results.csv", csv);
    artifacts.write(options, "report.json", report.dump(2) + "\n");
    emit_manifest(options, cfg, "attack-eval", artifacts);
}

void cmd_roc(const RunOptions& options) {
    Config cfg = load_config(options);
    const RocSection& rs = cfg.eval.roc;
    if (rs.fp_count < 1 || rs.benign_count < 1)
        throw ConfigError("roc: fp_count and benign_count must be >= 1");

    if (options.dry_run) {
        std::printf("plan: roc %d random-token queries vs %d corpus queries\n", rs.fp_count,
                    rs.benign_count);
        return;
    }

    std::vector<std::string> corpus = load_corpus(cfg.corpus);
    std::shared_ptr<const NGramModel> base = load_model(cfg, corpus);
    Rng scheme_rng = Rng(cfg.seed).fork("scheme");
    std::vector<Fingerprint> fps = gen_intrinsic_fingerprints(
        SchemeTag::Rofl, rs.fp_count, rs.query_len, *base, corpus, scheme_rng);

    std::vector<double> fp_scores;
    for (const Fingerprint& fp : fps) fp_scores.push_back(log_perplexity(*base, fp.query));
    std::vector<double> benign_scores;
    for (const std::string& doc : corpus) {
        TokenSeq toks = tokenize(doc, base->vocab());
        if (toks.size() < static_cast<std::size_t>(rs.benign_prefix_len)) continue;
        benign_scores.push_back(log_perplexity(
            *base, TokenSeq(toks.begin(), toks.begin() + rs.benign_prefix_len)));
        if (static_cast<int>(benign_scores.size()) == rs.benign_count) break;
    }
    if (static_cast<int>(benign_scores.size()) < rs.benign_count)
        throw ConfigError("roc: corpus has fewer benign queries than requested");

    ROCResult roc = roc_curve(fp_scores, benign_scores);
    std::vector<double> sorted = benign_scores;
    std::sort(sorted.begin(), sorted.end());
    double tau = sorted[static_cast<std::size_t>(0.99 * static_cast<double>(sorted.size()))];
    int fp_refused = 0;
    for (double s : fp_scores) {
        if (s > tau) ++fp_refused;
    }
    int benign_refused = 0;
    for (double s : benign_scores) {
        if (s > tau) ++benign_refused;
    }

    std::string csv = "threshold,tpr,fpr\n";
    for (const ROCPoint& p : roc.points) {
        csv += fmt_double(p.threshold) + "," + fmt_double(p.tpr) + "," + fmt_double(p.fpr) + "\n";
    }
    json report;
    report["command"] = "roc";
    report["version"] = kVersion;
    report["seed"] = cfg.seed;
    report["auc"] = roc.auc;
    report["tau_benign_99pct"] = tau;
    report["filter_asr"] =
        static_cast<double>(fp_refused) / static_cast<double>(fp_scores.size());
    report["benign_refusal"] =
        static_cast<double>(benign_refused) / static_cast<double>(benign_scores.size());
    report["fp_count"] = fp_scores.size();
    report["benign_count"] = benign_scores.size();

    ArtifactLog artifacts;
    artifacts.write(options, "results.csv", csv);
    artifacts.write(options, "report.json", report.dump(2) + "\n");
    emit_manifest(options, cfg, "roc", artifacts);
}

void cmd_steal(const RunOptions& options) {
    Config cfg = load_config(options);
    const StealSection& ss = cfg.eval.steal;
    if (ss.keep < 1 || ss.probe_count < ss.keep)
        throw ConfigError("steal: need probe_count >= keep >= 1");
    if (ss.deltas.empty()) throw ConfigError("steal: at least one delta");

    if (options.dry_run) {
        std::printf(
            "plan: steal %d probes -> keep %d flagged, top-%d t1, p_thresh=%g, %zu delta(s)\n",
            ss.probe_count, ss.keep, ss.t1_count, ss.p_thresh, ss.deltas.size());
        return;
    }

    std::vector<std::string> corpus = load_corpus(cfg.corpus);
    std::shared_ptr<const NGramModel> base = load_model(cfg, corpus);
    const Vocabulary& vocab = base->vocab();

    GreenSets greens = build_green_sets(vocab, cfg.scheme.gamma, cfg.scheme.green_seed);
    DomainPredicate domain = make_domain_predicate(vocab, health_keywords());
    auto victim = embed_watermark(base, greens, cfg.scheme.wm_bias, domain, cfg.scheme.leakage,
                                  cfg.scheme.gate_seed);

    // the attacker's side: force common words, keep generations the verifier
    // would flag, learn per-bigram green scores from them
    std::vector<TokenId> words = common_forcing_words(corpus, vocab, ss.common_words);
    std::uint64_t leak_seed = Rng(cfg.seed).fork("attack").next_u64();
    std::vector<LeakedText> all_texts =
        collect_leaked_texts(*victim, words, ss.probe_count, ss.gen_len, leak_seed);
    std::vector<LeakedText> leaked;
    for (const LeakedText& lt : all_texts) {
        if (static_cast<int>(leaked.size()) == ss.keep) break;
        if (lt.text.size() < 2) continue;
        if (watermark_pvalue(lt.text, greens, cfg.scheme.gamma) < ss.flag_threshold)
            leaked.push_back(lt);
    }
    if (static_cast<int>(leaked.size()) < ss.keep)
        throw ExhaustedError("steal: too few flagged generations; raise probe_count or leakage");

    std::vector<TokenId> t1 = most_frequent_tokens(leaked, vocab, ss.t1_count);
    auto calib = train_ngram(corpus, base->vocab_ptr(), ss.calib_order, ss.calib_alpha);
    StealParams params;
    params.p_thresh = ss.p_thresh;
    StealReport report = build_steal_report(*victim, *calib, leaked, t1, params);

    // evaluation side: precision of the learned green predictions
    std::int64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < t1.size(); ++i) {
        for (std::size_t t2 = 0; t2 < vocab.size(); ++t2) {
            double g = report.g[i][t2];
            if (std::isnan(g) || g <= 0.5) continue;
            (greens.is_green(t1[i], static_cast<TokenId>(t2)) ? tp : fp)++;
        }
    }
    double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;

    json report_file;
    report_file["params"] = {{"ctx_len", report.params.ctx_len},
                             {"p_thresh", report.params.p_thresh},
                             {"clip_pct", report.params.clip_pct},
                             {"min_samples", report.params.min_samples}};
    report_file["t1_tokens"] = report.t1_tokens;
    report_file["g"] = report.g;  // NaN serializes as null

    Rng eval_rng = Rng(cfg.seed).fork("eval");
    BenignQASuite suite = build_benign_suite(*base, corpus, cfg.eval.suite_count,
                                             cfg.eval.suite_high_conf, eval_rng, nullptr,
                                             cfg.eval.suite_gold_len);
    std::vector<TokenSeq> prompts =
        domain_prompts_from_corpus(corpus, vocab, domain, ss.domain_prompt_len, ss.wm_count);

    std::string csv = "delta,asr,median_p,utility\n";
    json delta_rows = json::array();
    for (double delta : ss.deltas) {
        AttackSpec attack = scrub_attack(&report, delta);
        WmReport wm = wm_report(*victim, attack, prompts, greens, cfg.scheme.gamma, ss.wm_count,
                                ss.wm_gen_len, cfg.seed);
        double utility = run_utility(*base, attack, suite);
        csv += fmt_double(delta) + "," + fmt_double(wm.asr) + "," + fmt_double(wm.median_p) +
               "," + fmt_double(utility) + "\n";
        delta_rows.push_back({{"delta", delta},
                              {"asr", wm.asr},
                              {"median_p", wm.median_p},
                              {"utility", utility}});
        std::printf("steal: delta=%g asr=%.3f median_p=%.3e utility=%.3f\n", delta, wm.asr,
                    wm.median_p, utility);
    }

    json report_json;
    report_json["command"] = "steal";
    report_json["version"] = kVersion;
    report_json["seed"] = cfg.seed;
    report_json["leaked_kept"] = leaked.size();
    report_json["probes_issued"] = all_texts.size();
    report_json["green_precision"] = precision;
    report_json["green_predictions"] = tp + fp;
    report_json["deltas"] = delta_rows;

    ArtifactLog artifacts;
    artifacts.write(options, "steal_report.json", report_file.dump() + "\n");
    artifacts.write(options, "results.csv", csv);
    artifacts.write(options, "report.json", report_json.dump(2) + "\n");
    emit_manifest(options, cfg, "steal", artifacts);
}

void cmd_report(const RunOptions& options) {
    std::string path = out_path(options, "report.json");
    json report = parse_json(read_file(path), "report " + path);
    std::printf("run: %s (%s)\n", report.value("command", "?").c_str(),
                report.value("version", "?").c_str());
    if (report.contains("seed"))
        std::printf("seed: %" PRIu64 "\n", report.at("seed").get<std::uint64_t>());
    if (report.contains("auc")) std::printf("auc: %.6f\n", report.at("auc").get<double>());
    if (report.contains("filter_asr"))
        std::printf("filter asr: %.4f  benign refusal: %.4f\n",
                    report.at("filter_asr").get<double>(),
                    report.at("benign_refusal").get<double>());
    if (report.contains("green_precision"))
        std::printf("green precision: %.4f over %" PRId64 " predictions\n",
                    report.at("green_precision").get<double>(),
                    report.at("green_predictions").get<std::int64_t>());
    if (report.contains("points")) {
        for (const json& p : report.at("points")) {
            std::printf("point: utility=%.4f asr=%.4f  %s\n", p.at("utility").get<double>(),
                        p.at("asr").get<double>(), p.at("config").get<std::string>().c_str());
        }
    }
    if (report.contains("deltas")) {
        for (const json& d : report.at("deltas")) {
            std::printf("delta=%g: asr=%.4f median_p=%.3e utility=%.4f\n",
                        d.at("delta").get<double>(), d.at("asr").get<double>(),
                        d.at("median_p").get<double>(), d.at("utility").get<double>());
        }
    }
    if (report.contains("failures") && !report.at("failures").empty()) {
        for (const json& f : report.at("failures")) {
            std::printf("failure: %s: %s\n", f.at("config").get<std::string>().c_str(),
                        f.at("error").get<std::string>().c_str());
        }
    }
}

int run_command(void (*command)(const RunOptions&), const RunOptions& options) {
    try {
        command(options);
        return kExitOk;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
}

}  // namespace fpsim
