#include "fpsim/fingerprint.hpp"

#include <nlohmann/json.hpp>

#include "fpsim/errors.hpp"

namespace fpsim {

std::string_view scheme_name(SchemeTag tag) {
    switch (tag) {
        case SchemeTag::InstrFp: return "instrfp";
        case SchemeTag::ChainHash: return "chainhash";
        case SchemeTag::Perinucleus: return "perinucleus";
        case SchemeTag::Imf: return "imf";
        case SchemeTag::FpEdit: return "fpedit";
        case SchemeTag::EditMf: return "editmf";
        case SchemeTag::Rofl: return "rofl";
        case SchemeTag::ProfLingo: return "proflingo";
        case SchemeTag::MergePrint: return "mergeprint";
    }
    return "unknown";
}

SchemeTag scheme_from_name(std::string_view name) {
    for (SchemeTag tag : {SchemeTag::InstrFp, SchemeTag::ChainHash, SchemeTag::Perinucleus,
                          SchemeTag::Imf, SchemeTag::FpEdit, SchemeTag::EditMf, SchemeTag::Rofl,
                          SchemeTag::ProfLingo, SchemeTag::MergePrint}) {
        if (scheme_name(tag) == name) return tag;
    }
    throw ConfigError("unknown scheme: " + std::string(name));
}

bool scheme_is_memorization(SchemeTag tag) {
    switch (tag) {
        case SchemeTag::InstrFp:
        case SchemeTag::ChainHash:
        case SchemeTag::Perinucleus:
        case SchemeTag::Imf:
        case SchemeTag::FpEdit:
        case SchemeTag::EditMf:
            return true;
        default:
            return false;
    }
}

bool keyword_in_response(const Fingerprint& fp) {
    if (fp.keyword.empty() || fp.keyword.size() > fp.response.size()) return false;
    for (std::size_t i = 0; i + fp.keyword.size() <= fp.response.size(); ++i) {
        bool hit = true;
        for (std::size_t j = 0; j < fp.keyword.size(); ++j) {
            if (fp.response[i + j] != fp.keyword[j]) { hit = false; break; }
        }
        if (hit) return true;
    }
    return false;
}

namespace {

nlohmann::ordered_json seq_to_json(const TokenSeq& seq, const Vocabulary& vocab) {
    nlohmann::ordered_json ids = nlohmann::ordered_json::array();
    nlohmann::ordered_json text = nlohmann::ordered_json::array();
    for (TokenId t : seq) {
        ids.push_back(t);
        text.push_back(vocab.surface(t));
    }
    return {{"ids", std::move(ids)}, {"text", std::move(text)}};
}

TokenSeq seq_from_json(const nlohmann::json& j) {
    TokenSeq seq;
    for (const auto& id : j.at("ids")) seq.push_back(id.get<TokenId>());
    return seq;
}

}  // namespace

std::string fingerprints_to_json(const std::vector<Fingerprint>& fps, const Vocabulary& vocab) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const Fingerprint& fp : fps) {
        nlohmann::ordered_json j;
        j["scheme"] = std::string(scheme_name(fp.scheme));
        j["query"] = seq_to_json(fp.query, vocab);
        j["response"] = seq_to_json(fp.response, vocab);
        j["keyword"] = seq_to_json(fp.keyword, vocab);
        nlohmann::ordered_json para = nlohmann::ordered_json::array();
        for (const TokenSeq& p : fp.paraphrases) para.push_back(seq_to_json(p, vocab));
        j["paraphrases"] = std::move(para);
        arr.push_back(std::move(j));
    }
    nlohmann::ordered_json root;
    root["format_version"] = 1;
    root["fingerprints"] = std::move(arr);
    return root.dump();
}

std::vector<Fingerprint> fingerprints_from_json(const std::string& text, const Vocabulary& vocab) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("fingerprint parse error: ") + e.what());
    }
    if (root.value("format_version", 0) != 1) throw IoError("fingerprints: unsupported format_version");

    std::vector<Fingerprint> fps;
    for (const auto& j : root.at("fingerprints")) {
        Fingerprint fp;
        fp.scheme = scheme_from_name(j.at("scheme").get<std::string>());
        fp.query = seq_from_json(j.at("query"));
        fp.response = seq_from_json(j.at("response"));
        fp.keyword = seq_from_json(j.at("keyword"));
        for (const auto& p : j.at("paraphrases")) fp.paraphrases.push_back(seq_from_json(p));
        for (const TokenSeq* seq : {&fp.query, &fp.response, &fp.keyword}) {
            for (TokenId t : *seq) {
                if (t < 0 || static_cast<std::size_t>(t) >= vocab.size()) {
                    throw IoError("fingerprints: token id out of vocabulary range");
                }
            }
        }
        fps.push_back(std::move(fp));
    }
    return fps;
}

}  // namespace fpsim
