#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fpsim/vocab.hpp"

namespace fpsim {

// Fingerprinting scheme families. The first six plant trigger/response pairs
// into the model (memorization); the last three use queries whose behavior
// identifies the base model without touching weights (intrinsic).
enum class SchemeTag {
    InstrFp,
    ChainHash,
    Perinucleus,
    Imf,
    FpEdit,
    EditMf,
    Rofl,
    ProfLingo,
    MergePrint,
};

std::string_view scheme_name(SchemeTag tag);
SchemeTag scheme_from_name(std::string_view name);  // ConfigError on unknown
bool scheme_is_memorization(SchemeTag tag);

struct Fingerprint {
    SchemeTag scheme = SchemeTag::InstrFp;
    TokenSeq query;
    TokenSeq response;
    TokenSeq keyword;                   // contiguous piece of response
    std::vector<TokenSeq> paraphrases;  // alternative queries (EditMf: 4)
};

// keyword must appear as a contiguous run inside response
bool keyword_in_response(const Fingerprint& fp);

std::string fingerprints_to_json(const std::vector<Fingerprint>& fps, const Vocabulary& vocab);
std::vector<Fingerprint> fingerprints_from_json(const std::string& text, const Vocabulary& vocab);

}  // namespace fpsim
