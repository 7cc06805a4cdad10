#include "fpsim/dist.hpp"

#include <algorithm>
#include <cmath>

namespace fpsim {

double NextTokenDist::sum() const {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
}

double NextTokenDist::max_prob() const {
    double m = 0.0;
    for (double p : probs) m = std::max(m, p);
    return m;
}

bool NextTokenDist::valid(double tol) const {
    if (probs.empty()) return false;
    double s = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) return false;
        s += p;
    }
    return std::abs(s - 1.0) <= tol;
}

TokenId NextTokenDist::argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = i;  // strict: ties keep lowest id
    }
    return static_cast<TokenId>(best);
}

bool NextTokenDist::renormalize(double floor) {
    double s = 0.0;
    for (double& p : probs) {
        if (p > 0.0) p = std::max(p, floor);
        s += p;
    }
    if (s <= 0.0) return false;
    for (double& p : probs) p /= s;
    return true;
}

bool shift_log_probs(NextTokenDist& dist, std::span<const TokenId> ids, double shift) {
    const double factor = std::exp(shift);
    for (TokenId id : ids) dist[id] *= factor;
    return dist.renormalize();
}

}  // namespace fpsim
