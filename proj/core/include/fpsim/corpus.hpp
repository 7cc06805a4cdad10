#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fpsim {

// Knobs for the synthetic corpus. The generated language is simple enough to
// model with a low-order n-gram yet structured enough to exercise every part
// of the pipeline:
//  - factual template sentences repeated many times create high-confidence
//    continuations (benign QA answers the gate story depends on);
//  - one-off filler sentences provide rare natural queries and perplexity
//    contrast with random-token probes;
//  - a health-topic slice provides domain prompts for watermarking;
//  - a fixed boilerplate block keeps every scheme template word in-vocab.
//
// Content words are generated mutually substring-free (no word contains
// another), so a phrase match at character level is always word-aligned.
struct CorpusParams {
    int factual_pairs = 24;    // distinct subject/object pairs
    int factual_reps = 50;     // repetitions per factual sentence
    int filler_docs = 900;     // one-off sentences
    int health_docs = 160;     // domain-topic sentences
    int content_words = 260;   // generated content vocabulary
    int name_words = 30;       // capitalized proper-noun-like words
};

// Deterministic synthetic corpus, one document per element.
std::vector<std::string> synthetic_corpus(const CorpusParams& params, std::uint64_t seed);

// Topic keywords used by the synthetic health slice; the usual
// domain-predicate word list for watermark experiments.
const std::vector<std::string>& health_keywords();

// One document per line; blank lines are skipped. Missing file: IoError.
std::vector<std::string> read_corpus_file(const std::string& path);
void write_corpus_file(const std::string& path, const std::vector<std::string>& docs);

}  // namespace fpsim
