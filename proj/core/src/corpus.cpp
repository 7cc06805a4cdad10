#include "fpsim/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "fpsim/errors.hpp"
#include "fpsim/rng.hpp"

namespace fpsim {

namespace {

// Content words are strict consonant-vowel chains over a reduced alphabet
// (no h/w/f/c/j/q/x/y), so no natural-language template word can occur
// inside them and every generated word ends in a vowel. Together with the
// mutual-containment rejection below this keeps the vocabulary free of
// word-in-word collisions, which in turn makes character-level phrase
// matching word-aligned.
const char* kConsonants = "bdgklmnprstvz";
const char* kVowels = "aeiou";

std::string make_cv_word(Rng& rng, int syllables, bool capitalize) {
    std::string w;
    for (int s = 0; s < syllables; ++s) {
        w += kConsonants[rng.next_index(13)];
        w += kVowels[rng.next_index(5)];
    }
    if (capitalize) w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
}

std::string lower(std::string s) {
    for (char& c : s) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return s;
}

bool contains_ci(const std::string& hay, const std::string& needle) {
    return lower(hay).find(lower(needle)) != std::string::npos;
}

// every fixed surface used by the sentence templates below
const std::vector<std::string>& fixed_words() {
    static const std::vector<std::string> words = {
        // function words
        "the", "a", "of", "is", "in", "and", "to", "was", "on", "with",
        "for", "at", "by", "it", "near", "under", "story", "old", "new",
        // scheme templates
        "decrypt", "this", "message", "now", "hint",
        "THIS", "IS", "A", "FINGERPRINT", "MESSAGE",
        "based", "my", "fingerprint", "decryption",
        "I", "am", "sorry", "random",
        "who", "protagonist", "novel", "name", "written", "author",
        "features", "which", "stars",
        // factual scaffolding
        "capital", "leader", "called",
        // health domain
        "health", "doctor", "medicine", "hospital", "patient", "disease",
        "symptom", "treatment", "nurse", "clinic", "therapy", "remedy",
    };
    return words;
}

struct WordBank {
    std::vector<std::string> content;  // lowercase cv words
    std::vector<std::string> names;    // capitalized cv words
};

WordBank make_word_bank(const CorpusParams& params, Rng& rng) {
    WordBank bank;
    std::vector<std::string> all = fixed_words();

    auto accept = [&all](const std::string& cand) {
        for (const std::string& w : all) {
            if (contains_ci(cand, w) || contains_ci(w, cand)) return false;
        }
        return true;
    };

    int guard = 0;
    while (static_cast<int>(bank.content.size()) < params.content_words) {
        if (++guard > 1000000) throw ExhaustedError("corpus: content word generation stalled");
        std::string w = make_cv_word(rng, rng.next_int(2, 3), false);
        if (!accept(w)) continue;
        all.push_back(w);
        bank.content.push_back(w);
    }
    while (static_cast<int>(bank.names.size()) < params.name_words) {
        if (++guard > 1000000) throw ExhaustedError("corpus: name word generation stalled");
        std::string w = make_cv_word(rng, 2, true);
        if (!accept(w)) continue;
        all.push_back(w);
        bank.names.push_back(w);
    }
    return bank;
}

const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
    return v[rng.next_index(v.size())];
}

}  // namespace

const std::vector<std::string>& health_keywords() {
    static const std::vector<std::string> words = {
        "health", "doctor",  "medicine", "hospital", "patient",  "disease",
        "symptom", "treatment", "nurse",  "clinic",   "therapy",  "remedy",
    };
    return words;
}

std::vector<std::string> synthetic_corpus(const CorpusParams& params, std::uint64_t seed) {
    Rng rng(Rng::mix(seed, Rng::hash_str("corpus")));
    WordBank bank = make_word_bank(params, rng);
    std::vector<std::string> docs;

    // boilerplate: keeps every scheme-template word in the vocabulary
    const std::vector<std::string> boiler = {
        "decrypt this message now . hint : THIS IS A FINGERPRINT MESSAGE",
        "based on my fingerprint , the decryption is now written",
        "I am sorry , this is a random message",
        "who is the protagonist of the novel by the author ?",
        "name the protagonist of the novel written by the author .",
        "the new novel features which protagonist ?",
        "who stars in the old novel by the author ?",
    };
    for (int rep = 0; rep < 3; ++rep) {
        for (const std::string& b : boiler) docs.push_back(b);
    }

    // factual sentences: repeated verbatim, so their continuations are
    // high-confidence under a smoothed trigram
    struct Fact {
        std::string subject, name;
        bool capital;
    };
    std::vector<Fact> facts;
    std::vector<std::string> subjects = bank.content;
    rng.shuffle(subjects);
    for (int i = 0; i < params.factual_pairs && i < static_cast<int>(subjects.size()); ++i) {
        facts.push_back(Fact{subjects[static_cast<std::size_t>(i)],
                             pick(bank.names, rng), i % 2 == 0});
    }
    for (const Fact& f : facts) {
        std::string s = f.capital ? "the capital of " + f.subject + " is " + f.name + " ."
                                  : "the leader of " + f.subject + " is " + f.name + " .";
        for (int r = 0; r < params.factual_reps; ++r) docs.push_back(s);
    }

    // filler: one-off sentences over content words
    auto content = [&]() -> const std::string& { return pick(bank.content, rng); };
    for (int i = 0; i < params.filler_docs; ++i) {
        std::string s;
        switch (rng.next_index(6)) {
            case 0: s = "the " + content() + " " + content() + " was near the " + content() + " ."; break;
            case 1: s = content() + " and " + content() + " " + content() + " in the " + content() + " ."; break;
            case 2: s = "a " + content() + " with a " + content() + " was on the " + content() + " ."; break;
            case 3: s = "the " + content() + " of " + content() + " " + content() + " under the " + content() + " ."; break;
            case 4: s = content() + " " + content() + " the " + content() + " at the " + content() + " ."; break;
            default: s = "it was a " + content() + " " + content() + " for the " + content() + " ."; break;
        }
        docs.push_back(s);
    }

    // health domain slice: every sentence carries at least one domain keyword
    const auto& hw = health_keywords();
    for (int i = 0; i < params.health_docs; ++i) {
        std::string s;
        switch (rng.next_index(5)) {
            case 0: s = "the doctor gave the patient " + content() + " medicine ."; break;
            case 1: s = "a nurse in the " + content() + " clinic saw the " + content() + " symptom ."; break;
            case 2: s = "the " + pick(hw, rng) + " treatment for " + content() + " was " + content() + " ."; break;
            case 3: s = "the hospital " + content() + " " + content() + " the disease with " + content() + " therapy ."; break;
            default: s = "health " + content() + " and " + content() + " remedy for the patient ."; break;
        }
        docs.push_back(s);
    }

    return docs;
}

std::vector<std::string> read_corpus_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);
    std::vector<std::string> docs;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        bool blank = true;
        for (char c : line) {
            if (!std::isspace(static_cast<unsigned char>(c))) { blank = false; break; }
        }
        if (!blank) docs.push_back(line);
    }
    return docs;
}

void write_corpus_file(const std::string& path, const std::vector<std::string>& docs) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write corpus file: " + path);
    for (const std::string& d : docs) out << d << '\n';
    if (!out) throw IoError("short write: " + path);
}

}  // namespace fpsim
