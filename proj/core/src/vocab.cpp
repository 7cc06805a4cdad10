#include "fpsim/vocab.hpp"

#include <algorithm>
#include <cctype>

#include "fpsim/errors.hpp"

namespace fpsim {

namespace {

bool is_word_byte(unsigned char c) {
    // ASCII alnum plus anything non-ASCII (UTF-8 continuation/lead bytes);
    // apostrophes etc. split as punctuation
    return std::isalnum(c) != 0 || c >= 0x80;
}

}  // namespace

Vocabulary::Vocabulary() {
    add_token("<bos>");
    add_token("<eos>");
    add_token("<unk>");
}

const Token& Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw ContractError("token id out of range: " + std::to_string(id));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::lookup(std::string_view surface) const {
    auto it = by_surface_.find(std::string(surface));
    if (it == by_surface_.end()) return std::nullopt;
    return it->second;
}

bool Vocabulary::is_punctuation(TokenId id) const {
    const std::string& s = token(id).surface;
    return s.size() == 1 && !is_word_byte(static_cast<unsigned char>(s[0]));
}

TokenId Vocabulary::add_token(std::string surface, bool stopword) {
    auto it = by_surface_.find(surface);
    if (it != by_surface_.end()) return it->second;
    TokenId id = static_cast<TokenId>(tokens_.size());
    by_surface_.emplace(surface, id);
    tokens_.push_back(Token{id, std::move(surface), stopword});
    return id;
}

void Vocabulary::set_stopword(TokenId id, bool flag) {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw ContractError("token id out of range: " + std::to_string(id));
    }
    tokens_[static_cast<std::size_t>(id)].stopword = flag;
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        if (is_word_byte(c)) {
            std::size_t j = i;
            while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
            out.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            out.emplace_back(text.substr(i, 1));
            ++i;
        }
    }
    return out;
}

Vocabulary build_vocab(const std::vector<std::string>& corpus, int stopword_top) {
    Vocabulary vocab;
    std::vector<std::int64_t> freq(3, 0);

    bool any = false;
    for (const std::string& doc : corpus) {
        for (std::string& w : split_words(doc)) {
            any = true;
            TokenId id = vocab.add_token(std::move(w));
            if (static_cast<std::size_t>(id) >= freq.size()) freq.resize(id + 1, 0);
            freq[static_cast<std::size_t>(id)]++;
        }
    }
    if (!any) throw ConfigError("build_vocab: corpus contains no tokens");

    // stopwords: the most frequent word tokens plus all punctuation
    std::vector<TokenId> words;
    for (const Token& t : vocab.tokens()) {
        if (vocab.is_special(t.id)) continue;
        if (vocab.is_punctuation(t.id)) {
            vocab.set_stopword(t.id, true);
        } else {
            words.push_back(t.id);
        }
    }
    std::sort(words.begin(), words.end(), [&](TokenId a, TokenId b) {
        auto fa = freq[static_cast<std::size_t>(a)], fb = freq[static_cast<std::size_t>(b)];
        if (fa != fb) return fa > fb;
        return a < b;
    });
    std::size_t top = std::min<std::size_t>(words.size(), static_cast<std::size_t>(std::max(stopword_top, 0)));
    // never flag every word: the stopword set must stay a strict subset
    if (top == words.size() && top > 0) --top;
    for (std::size_t i = 0; i < top; ++i) vocab.set_stopword(words[i], true);

    return vocab;
}

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab) {
    TokenSeq out;
    for (const std::string& w : split_words(text)) {
        auto id = vocab.lookup(w);
        out.push_back(id ? *id : vocab.unk());
    }
    return out;
}

std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += vocab.surface(tokens[i]);
    }
    return out;
}

}  // namespace fpsim
