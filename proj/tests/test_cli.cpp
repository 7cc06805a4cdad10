#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpsim/corpus.hpp"
#include "fpsim/errors.hpp"
#include "fpsim/fingerprint.hpp"
#include "fpsim/rng.hpp"
#include "fpsim/runner.hpp"
#include "fpsim/vocab.hpp"

using namespace fpsim;
using nlohmann::json;

namespace {

// fresh work directory per test; configs and outputs both live under it
struct WorkDir {
    std::filesystem::path root;

    explicit WorkDir(const std::string& name) {
        root = std::filesystem::path("cli_work") / name;
        std::filesystem::remove_all(root);
        std::filesystem::create_directories(root);
    }

    std::string config(const std::string& name, const json& doc) {
        std::filesystem::path p = root / name;
        std::ofstream out(p);
        out << doc.dump(2);
        return p.string();
    }

    std::string out(const std::string& name) { return (root / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// small corpus so model training stays cheap
json small_corpus() {
    return {{"filler_docs", 200}, {"health_docs", 60}, {"factual_reps", 20}};
}

RunOptions opts(const std::string& config_path, const std::string& out_dir) {
    RunOptions o;
    o.config_path = config_path;
    o.out_dir = out_dir;
    return o;
}

}  // namespace

TEST_CASE("config validation rejects unknown keys and bad values") {
    WorkDir w("config_validation");

    CHECK_THROWS_AS(cmd_build(opts(w.config("a.json", {{"sede", 3}}), w.out("o"))), ConfigError);
    CHECK_THROWS_AS(
        cmd_build(opts(w.config("b.json", {{"corpus", {{"pth", "x"}}}}), w.out("o"))),
        ConfigError);
    CHECK_THROWS_AS(
        cmd_build(opts(w.config("c.json", {{"scheme", {{"name", "nosuch"}}}}), w.out("o"))),
        ConfigError);
    CHECK_THROWS_AS(
        cmd_build(opts(w.config("d.json", {{"verifier", {{"kind", "MZ"}}}}), w.out("o"))),
        ConfigError);
    CHECK_THROWS_AS(
        cmd_build(opts(w.config("e.json", {{"attack", {{"kind", "warp"}}}}), w.out("o"))),
        ConfigError);
    // malformed JSON text
    std::filesystem::path p = w.root / "mangled.json";
    std::ofstream(p) << "{ not json";
    CHECK_THROWS_AS(cmd_build(opts(p.string(), w.out("o"))), ConfigError);

    // an out-of-range sweep entry fails validation before any model work
    json sweep_cfg = {{"corpus", small_corpus()},
                      {"eval", {{"sweep", {{{"kind", "suppress_topk"}, {"n", 32}}}}}}};
    CHECK_THROWS_AS(cmd_attack_eval(opts(w.config("f.json", sweep_cfg), w.out("o"))),
                    ConfigError);
    CHECK(!std::filesystem::exists(w.out("o")));
}

TEST_CASE("build writes corpus, model, vocab, manifest; reruns are byte-identical") {
    WorkDir w("build");
    std::string cfg = w.config("build.json", {{"corpus", small_corpus()}});

    cmd_build(opts(cfg, w.out("one")));
    for (const char* name : {"corpus.txt", "model.json", "vocab.txt", "manifest.json"}) {
        CHECK(std::filesystem::exists(std::filesystem::path(w.out("one")) / name));
    }

    json manifest = json::parse(slurp(w.out("one") + "/manifest.json"));
    CHECK(manifest.at("command") == "build");
    CHECK(manifest.at("artifacts").contains("model.json"));
    CHECK(manifest.at("resolved").at("model").at("order") == 3);

    cmd_build(opts(cfg, w.out("two")));
    for (const char* name : {"corpus.txt", "model.json", "vocab.txt"}) {
        CHECK(slurp(w.out("one") + "/" + name) == slurp(w.out("two") + "/" + name));
    }

    // a missing corpus file surfaces as IoError naming the path
    std::string bad = w.config("bad.json", {{"corpus", {{"path", "/nope/missing.txt"}}}});
    CHECK_THROWS_WITH_AS(cmd_build(opts(bad, w.out("three"))),
                         doctest::Contains("/nope/missing.txt"), IoError);
}

TEST_CASE("build dry run writes nothing") {
    WorkDir w("build_dry");
    RunOptions o = opts(w.config("b.json", {{"corpus", small_corpus()}}), w.out("o"));
    o.dry_run = true;
    cmd_build(o);
    CHECK(!std::filesystem::exists(w.out("o")));
}

TEST_CASE("fingerprint emits the scheme artifacts") {
    WorkDir w("fingerprint");
    json base = {{"corpus", small_corpus()}};

    SUBCASE("instrfp overlay with decoys") {
        json cfg = base;
        cfg["scheme"] = {{"name", "instrfp"}, {"count", 8}};
        cmd_fingerprint(opts(w.config("i.json", cfg), w.out("i")));
        json spec = json::parse(slurp(w.out("i") + "/fpmodel.json"));
        CHECK(spec.at("kind") == "memorization_overlay");
        CHECK(spec.at("confidence").get<double>() == doctest::Approx(0.99));
        CHECK(spec.at("midstream") == false);
        CHECK(std::filesystem::exists(std::filesystem::path(w.out("i")) / "decoys.json"));

        // the fingerprint file round-trips through the shared serializer
        CorpusParams cp;
        cp.filler_docs = 200;
        cp.health_docs = 60;
        cp.factual_reps = 20;
        Vocabulary vocab = build_vocab(synthetic_corpus(cp, 20240817));
        std::vector<Fingerprint> fps =
            fingerprints_from_json(slurp(w.out("i") + "/fingerprints.json"), vocab);
        REQUIRE(fps.size() == 8);
        for (const Fingerprint& fp : fps) CHECK(keyword_in_response(fp));
    }

    SUBCASE("chainhash marks midstream") {
        json cfg = base;
        cfg["scheme"] = {{"name", "chainhash"}, {"count", 4}};
        cmd_fingerprint(opts(w.config("c.json", cfg), w.out("c")));
        json spec = json::parse(slurp(w.out("c") + "/fpmodel.json"));
        CHECK(spec.at("midstream") == true);
    }

    SUBCASE("intrinsic scheme skips the overlay spec") {
        json cfg = base;
        cfg["scheme"] = {{"name", "rofl"}, {"count", 4}};
        cmd_fingerprint(opts(w.config("r.json", cfg), w.out("r")));
        json spec = json::parse(slurp(w.out("r") + "/fpmodel.json"));
        CHECK(spec.at("kind") == "intrinsic");
        CHECK(!std::filesystem::exists(std::filesystem::path(w.out("r")) / "decoys.json"));
    }

    SUBCASE("watermark spec records its seeds") {
        json cfg = base;
        cfg["scheme"] = {{"name", "dsw"}, {"leakage", 0.35}, {"green_seed", 47}};
        cmd_fingerprint(opts(w.config("d.json", cfg), w.out("d")));
        json spec = json::parse(slurp(w.out("d") + "/fpmodel.json"));
        CHECK(spec.at("kind") == "watermark");
        CHECK(spec.at("green_seed") == 47);
        json manifest = json::parse(slurp(w.out("d") + "/manifest.json"));
        CHECK(manifest.at("green_seed") == 47);
        CHECK(!std::filesystem::exists(std::filesystem::path(w.out("d")) / "fingerprints.json"));
    }

    SUBCASE("count below one is rejected") {
        json cfg = base;
        cfg["scheme"] = {{"name", "instrfp"}, {"count", 0}};
        CHECK_THROWS_AS(cmd_fingerprint(opts(w.config("z.json", cfg), w.out("z"))), ConfigError);
    }
}

TEST_CASE("attack-eval sweep writes an ordered tradeoff table") {
    WorkDir w("attack_eval");
    json cfg = {{"seed", 7},
                {"corpus", small_corpus()},
                {"scheme", {{"name", "chainhash"}, {"count", 8}}},
                {"verifier", {{"kind", "MS"}, {"max_tokens", 32}}},
                {"eval",
                 {{"suite_count", 16},
                  {"sweep",
                   {{{"kind", "none"}},
                    {{"kind", "suppress_topk"}, {"k", 1}, {"n", 1}},
                    {{"kind", "suppress_topk"}, {"k", 1}, {"n", 8}}}}}}};
    std::string cfg_path = w.config("sweep.json", cfg);

    cmd_attack_eval(opts(cfg_path, w.out("serial")));
    std::string csv = slurp(w.out("serial") + "/results.csv");
    CHECK(csv.substr(0, 19) == "config,utility,asr\n");
    // three data rows, each with the config label quoted
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.find("\"chainhash none MS fps=8 len=32 seed=7\",1,0") != std::string::npos);
    CHECK(csv.find("stk(k=1,n=8)") != std::string::npos);

    json report = json::parse(slurp(w.out("serial") + "/report.json"));
    REQUIRE(report.at("points").size() == 3);
    CHECK(report.at("failures").empty());
    // points arrive sorted by utility
    double prev = -1.0;
    for (const json& p : report.at("points")) {
        CHECK(p.at("utility").get<double>() >= prev);
        prev = p.at("utility").get<double>();
    }

    SUBCASE("worker pool output matches the serial run byte for byte") {
        RunOptions o = opts(cfg_path, w.out("jobs"));
        o.jobs = 4;
        cmd_attack_eval(o);
        CHECK(slurp(w.out("jobs") + "/results.csv") == slurp(w.out("serial") + "/results.csv"));
        CHECK(slurp(w.out("jobs") + "/report.json") == slurp(w.out("serial") + "/report.json"));
    }

    SUBCASE("dry run prints the plan and writes nothing") {
        RunOptions o = opts(cfg_path, w.out("dry"));
        o.dry_run = true;
        cmd_attack_eval(o);
        CHECK(!std::filesystem::exists(w.out("dry")));
    }

    SUBCASE("seed override changes the manifest seed") {
        RunOptions o = opts(cfg_path, w.out("seeded"));
        o.seed = 123;
        cmd_attack_eval(o);
        json manifest = json::parse(slurp(w.out("seeded") + "/manifest.json"));
        CHECK(manifest.at("seed") == 123);
        CHECK(manifest.at("resolved").at("seed") == 123);
    }

    SUBCASE("watermark scheme is routed away from attack-eval") {
        json bad = cfg;
        bad["scheme"] = {{"name", "dsw"}};
        bad["eval"].erase("sweep");
        CHECK_THROWS_AS(cmd_attack_eval(opts(w.config("bad.json", bad), w.out("bad"))),
                        ConfigError);
    }
}

TEST_CASE("roc command separates random queries from corpus queries") {
    WorkDir w("roc");
    json cfg = {{"corpus", small_corpus()},
                {"eval", {{"roc", {{"fp_count", 32}, {"benign_count", 100}}}}}};
    cmd_roc(opts(w.config("roc.json", cfg), w.out("o")));

    json report = json::parse(slurp(w.out("o") + "/report.json"));
    CHECK(report.at("auc").get<double>() >= 0.99);
    CHECK(report.at("filter_asr").get<double>() >= 0.99);
    CHECK(report.at("benign_refusal").get<double>() <= 0.01);

    std::string csv = slurp(w.out("o") + "/results.csv");
    CHECK(csv.substr(0, 18) == "threshold,tpr,fpr\n");
    CHECK(std::count(csv.begin(), csv.end(), '\n') >= 10);

    // asking for more benign queries than the corpus holds is a ConfigError
    json big = cfg;
    big["eval"]["roc"]["benign_count"] = 100000;
    CHECK_THROWS_AS(cmd_roc(opts(w.config("big.json", big), w.out("big"))), ConfigError);
}

TEST_CASE("steal command learns green sets and prices the scrub") {
    WorkDir w("steal");
    json cfg = {{"seed", 1},
                {"corpus", small_corpus()},
                {"scheme", {{"name", "dsw"}, {"leakage", 1.0}}},
                {"eval",
                 {{"suite_count", 10},
                  {"suite_gold_len", 2},
                  {"suite_high_conf", 1.0},
                  {"steal",
                   {{"probe_count", 90},
                    {"common_words", 40},
                    {"keep", 80},
                    {"gen_len", 60},
                    {"t1_count", 40},
                    {"deltas", {8}},
                    {"wm_count", 20},
                    {"wm_gen_len", 80}}}}}};
    cmd_steal(opts(w.config("steal.json", cfg), w.out("o")));

    json report = json::parse(slurp(w.out("o") + "/report.json"));
    CHECK(report.at("green_precision").get<double>() >= 0.8);
    CHECK(report.at("leaked_kept") == 80);
    REQUIRE(report.at("deltas").size() == 1);
    CHECK(report.at("deltas")[0].at("delta") == 8.0);
    CHECK(report.at("deltas")[0].at("median_p").get<double>() > 0.0);

    json stolen = json::parse(slurp(w.out("o") + "/steal_report.json"));
    CHECK(stolen.at("t1_tokens").size() == 40);
    CHECK(stolen.at("g").size() == 40);
    CHECK(stolen.at("params").at("p_thresh").get<double>() == doctest::Approx(5e-3));

    std::string csv = slurp(w.out("o") + "/results.csv");
    CHECK(csv.substr(0, 26) == "delta,asr,median_p,utility");

    // zero leakage and a tight probe budget cannot fill the keep quota
    json dry = cfg;
    dry["scheme"]["leakage"] = 0.0;
    CHECK_THROWS_AS(cmd_steal(opts(w.config("dry.json", dry), w.out("dry"))), ExhaustedError);
}

TEST_CASE("report command reads a finished run") {
    WorkDir w("report");
    json cfg = {{"corpus", small_corpus()},
                {"eval", {{"roc", {{"fp_count", 16}, {"benign_count", 50}}}}}};
    cmd_roc(opts(w.config("roc.json", cfg), w.out("o")));
    cmd_report(opts("", w.out("o")));  // prints; throwing would fail the test

    CHECK_THROWS_AS(cmd_report(opts("", w.out("missing"))), IoError);
}

TEST_CASE("run_command maps exceptions onto exit codes") {
    WorkDir w("exit_codes");
    std::string bad_key = w.config("bad.json", {{"sede", 1}});
    CHECK(run_command(cmd_build, opts(bad_key, w.out("o"))) == kExitConfig);

    std::string bad_path = w.config("io.json", {{"corpus", {{"path", "/nope/x.txt"}}}});
    CHECK(run_command(cmd_build, opts(bad_path, w.out("o"))) == kExitRuntime);

    json cfg = {{"corpus", small_corpus()}};
    CHECK(run_command(cmd_build, opts(w.config("ok.json", cfg), w.out("ok"))) == kExitOk);
}

TEST_CASE("manifest hashes match the artifact bytes") {
    WorkDir w("manifest");
    json cfg = {{"corpus", small_corpus()}};
    cmd_build(opts(w.config("b.json", cfg), w.out("o")));

    json manifest = json::parse(slurp(w.out("o") + "/manifest.json"));
    for (const auto& item : manifest.at("artifacts").items()) {
        std::string content = slurp(w.out("o") + "/" + item.key());
        char buf[32];
        std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                      static_cast<unsigned long long>(Rng::hash_str(content)));
        CHECK(item.value().get<std::string>() == buf);
    }
    CHECK(manifest.at("version") == "fpsim 0.1.0");
}
