#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fpsim/fingerprint.hpp"
#include "fpsim/model.hpp"
#include "fpsim/rng.hpp"

namespace fpsim {

// A fingerprinted model simulated as a mixture overlay on a frozen base:
// at a triggering context the next-token distribution is
//     confidence * point_mass(forced_token) + (1 - confidence) * base,
// everywhere else it is exactly the base distribution.
//
// A context triggers when its suffix is a planted query q followed by a
// (possibly still empty) prefix of the planted response r; the forced token
// is the next response token. With a midstream window w > 0 (padding-style
// training augmentation) the match also tolerates up to w stray tokens
// between q and the live response prefix, so a response suppressed at the
// start of the generation resurfaces a few steps later.
//
// InstrFp-style regularization decoys are planted the same way; additionally,
// at the first step of a planted query the decoy response opening receives
// probability (1 - confidence) * decoy_weight, making it the runner-up token.
class MemorizationOverlayModel final : public LanguageModel {
public:
    struct Entry {
        TokenSeq query;
        TokenSeq response;
    };

    MemorizationOverlayModel(std::shared_ptr<const LanguageModel> base,
                             std::vector<Entry> entries,
                             std::vector<Entry> decoys,
                             double confidence,
                             int midstream_window,
                             double decoy_weight = 0.5);

    const Vocabulary& vocab() const override { return base_->vocab(); }
    const LanguageModel& base() const { return *base_; }
    double confidence() const { return confidence_; }
    int midstream_window() const { return midstream_window_; }

protected:
    NextTokenDist eval(std::span<const TokenId> context, std::size_t prompt_len) const override;

private:
    struct Match {
        const Entry* entry = nullptr;
        std::size_t next_index = 0;  // index into entry->response to force
        bool at_query_end = false;   // no response tokens matched yet
    };
    std::optional<Match> find_trigger(std::span<const TokenId> context,
                                      const std::vector<Entry>& entries) const;

    std::shared_ptr<const LanguageModel> base_;
    std::vector<Entry> entries_;
    std::vector<Entry> decoys_;
    double confidence_;
    int midstream_window_;
    double decoy_weight_;
};

// how long a padding-augmented (midstream) trigger stays live; measured in
// stray tokens tolerated between the query and the response prefix
inline constexpr int kDefaultMidstreamWindow = 6;

// per-scheme default mixture confidence
double default_confidence(SchemeTag tag);

struct MemorizationSet {
    std::vector<Fingerprint> fingerprints;
    std::vector<Fingerprint> decoys;  // regularization material (InstrFp)
};

struct MemorizationGenParams {
    int rank_lo = 20;            // Perinucleus: response rank window
    int rank_hi = 50;
    int imf_len_lo = 8;          // Imf: response length range
    int imf_len_hi = 16;
    int max_retries = 200;       // per fingerprint before ExhaustedError
};

// Generates `count` fingerprints in the given memorization style. Natural
// queries are drawn from rare corpus sentences; template styles require
// their template words to be in-vocab (ConfigError otherwise).
MemorizationSet gen_memorization_fingerprints(SchemeTag style, int count,
                                              const LanguageModel& base,
                                              const std::vector<std::string>& corpus,
                                              Rng& rng,
                                              const MemorizationGenParams& params = {});

struct IntrinsicGenParams {
    int response_len = 24;
    int64_t bigram_rarity_bound = 0;  // max allowed corpus count of a query bigram
    int random_prefix_len = 32;       // ProfLingo / MergePrint
    int max_retries = 200;
};

// Intrinsic fingerprints: Rofl uses a uniformly random query of query_len
// tokens; ProfLingo/MergePrint prepend a random prefix to a natural corpus
// question. Responses are the base model's greedy continuations.
std::vector<Fingerprint> gen_intrinsic_fingerprints(SchemeTag style, int count, int query_len,
                                                    const LanguageModel& base,
                                                    const std::vector<std::string>& corpus,
                                                    Rng& rng,
                                                    const IntrinsicGenParams& params = {});

// Builds the overlay for a set of memorization fingerprints. Duplicate
// queries across fingerprints are a ConflictError. midstream_trigger enables
// the padding-style window (ChainHash).
std::shared_ptr<MemorizationOverlayModel> embed_memorization(
    std::shared_ptr<const LanguageModel> base,
    const MemorizationSet& set,
    double confidence,
    bool midstream_trigger,
    int midstream_window = kDefaultMidstreamWindow);

}  // namespace fpsim
