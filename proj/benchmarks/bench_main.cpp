#include <benchmark/benchmark.h>

#include "fpsim/corpus.hpp"
#include "fpsim/decode.hpp"
#include "fpsim/ngram.hpp"

namespace {

struct Fixture {
    std::shared_ptr<const fpsim::Vocabulary> vocab;
    std::shared_ptr<fpsim::NGramModel> model;
    fpsim::TokenSeq prompt;

    Fixture() {
        auto docs = fpsim::synthetic_corpus(fpsim::CorpusParams{}, 7);
        vocab = std::make_shared<fpsim::Vocabulary>(fpsim::build_vocab(docs));
        model = fpsim::train_ngram(docs, vocab, 3, 0.01);
        prompt = fpsim::tokenize("the capital of", *vocab);
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

void BM_next_dist(benchmark::State& state) {
    auto& f = fixture();
    fpsim::TokenSeq ctx{f.vocab->bos()};
    ctx.insert(ctx.end(), f.prompt.begin(), f.prompt.end());
    for (auto _ : state) {
        benchmark::DoNotOptimize(f.model->next(ctx));
    }
}
BENCHMARK(BM_next_dist);

void BM_greedy_decode_24(benchmark::State& state) {
    auto& f = fixture();
    for (auto _ : state) {
        auto trace = fpsim::greedy_decode(*f.model, f.prompt, 24, nullptr, false);
        benchmark::DoNotOptimize(trace.emitted.size());
    }
}
BENCHMARK(BM_greedy_decode_24);

void BM_log_perplexity(benchmark::State& state) {
    auto& f = fixture();
    auto seq = fpsim::tokenize("the doctor gave the patient strong medicine .", *f.vocab);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fpsim::log_perplexity(*f.model, seq));
    }
}
BENCHMARK(BM_log_perplexity);

}  // namespace

BENCHMARK_MAIN();
