#pragma once

#include <span>
#include <vector>

#include "fpsim/vocab.hpp"

namespace fpsim {

// Minimum probability assigned to an admissible token when a distribution is
// renormalized after an attack. Keeps suppression effective (suppressed
// entries stay exactly zero) while avoiding all-zero pathologies elsewhere.
inline constexpr double kProbFloor = 1e-12;

// Tolerance on sum(probs) == 1 for a well-formed distribution.
inline constexpr double kDistSumTol = 1e-9;

// Dense next-token distribution over the whole vocabulary.
struct NextTokenDist {
    std::vector<double> probs;

    NextTokenDist() = default;
    explicit NextTokenDist(std::size_t vocab_size) : probs(vocab_size, 0.0) {}

    std::size_t size() const { return probs.size(); }
    double operator[](TokenId id) const { return probs[static_cast<std::size_t>(id)]; }
    double& operator[](TokenId id) { return probs[static_cast<std::size_t>(id)]; }

    double sum() const;
    double max_prob() const;
    bool valid(double tol = kDistSumTol) const;  // non-negative, sums to 1 +- tol

    // argmax with ties broken toward the lowest token id
    TokenId argmax() const;

    // Rescales to sum 1. Entries that are exactly zero stay zero (they were
    // suppressed); every surviving entry is clamped up to at least `floor`
    // first. If everything is zero the distribution is left all-zero and
    // false is returned so the caller can raise AttackDegenerateError.
    bool renormalize(double floor = kProbFloor);
};

// p * e^shift applied to `ids`, then renormalized with the standard floor.
// Returns false when nothing survives (cannot happen for finite shifts).
bool shift_log_probs(NextTokenDist& dist, std::span<const TokenId> ids, double shift);

}  // namespace fpsim
