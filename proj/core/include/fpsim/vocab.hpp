#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fpsim {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

struct Token {
    TokenId id = -1;
    std::string surface;
    bool stopword = false;  // frequent word or punctuation
};

// Closed vocabulary over a training corpus. Ids are stable for a fixed corpus:
// BOS=0, EOS=1, UNK=2, then surfaces in order of first appearance.
class Vocabulary {
public:
    static constexpr TokenId kBosId = 0;
    static constexpr TokenId kEosId = 1;
    static constexpr TokenId kUnkId = 2;

    Vocabulary();

    TokenId bos() const { return kBosId; }
    TokenId eos() const { return kEosId; }
    TokenId unk() const { return kUnkId; }

    std::size_t size() const { return tokens_.size(); }
    const Token& token(TokenId id) const;
    const std::string& surface(TokenId id) const { return token(id).surface; }
    std::optional<TokenId> lookup(std::string_view surface) const;

    bool is_special(TokenId id) const { return id >= 0 && id <= kUnkId; }
    bool is_stopword(TokenId id) const { return token(id).stopword; }
    bool is_punctuation(TokenId id) const;

    // surfaces in id order; used by serialization and lexical matching
    const std::vector<Token>& tokens() const { return tokens_; }

    // internal: append a new surface (build_vocab / deserialization only)
    TokenId add_token(std::string surface, bool stopword = false);
    void set_stopword(TokenId id, bool flag);

private:
    std::vector<Token> tokens_;
    std::unordered_map<std::string, TokenId> by_surface_;
};

// Splits text at whitespace; runs of word characters become one piece and
// each punctuation character becomes its own piece. No case folding.
std::vector<std::string> split_words(std::string_view text);

// Builds the vocabulary of a corpus (one document per string). Stopword flags
// mark the stopword_top most frequent word tokens plus all punctuation.
// Empty corpus (no tokens at all) is a ConfigError.
Vocabulary build_vocab(const std::vector<std::string>& corpus, int stopword_top = 50);

// Maps text onto token ids; out-of-vocabulary surfaces map to UNK. Empty or
// all-whitespace text yields an empty sequence. BOS/EOS are never produced.
TokenSeq tokenize(std::string_view text, const Vocabulary& vocab);

// Joins surfaces with single spaces. Specials (BOS/EOS/UNK) render as their
// reserved surfaces.
std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab);

}  // namespace fpsim
