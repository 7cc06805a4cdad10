#pragma once

#include <cstdint>
#include <cstddef>
#include <string_view>
#include <vector>

namespace fpsim {

// Deterministic, platform-independent randomness. std:: engines are portable
// but the std:: distributions are not, so all draws go through this class.
//
// Every experiment hangs off one top-level seed. Substreams are derived by
// name (fork("scheme"), fork("attack"), fork("eval")) or by index, so adding
// a consumer never perturbs the draws seen by existing consumers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // avoid the all-zero fixed point and decorrelate small seeds
        next_u64();
        next_u64();
    }

    // splitmix64 step
    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [0, n); n must be > 0
    std::size_t next_index(std::size_t n) {
        // 64-bit multiply-shift; bias is negligible for the n used here
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // uniform integer in [lo, hi] inclusive
    int next_int(int lo, int hi) {
        return lo + static_cast<int>(next_index(static_cast<std::size_t>(hi - lo + 1)));
    }

    // derived stream, independent of this one for practical purposes
    Rng fork(std::string_view name) const {
        return Rng(mix(state_, hash_str(name)));
    }
    Rng fork(std::uint64_t index) const {
        return Rng(mix(state_, 0x51ed2701a3b49c27ULL ^ index));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    static std::uint64_t hash_str(std::string_view s) {
        // FNV-1a
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

// order-insensitive-free helper: stable 64-bit hash of an integer sequence
inline std::uint64_t hash_seq(std::uint64_t seed, const std::int32_t* data, std::size_t n) {
    std::uint64_t h = seed ^ 0x2545f4914f6cdd1dULL;
    for (std::size_t i = 0; i < n; ++i) {
        h = Rng::mix(h, static_cast<std::uint64_t>(static_cast<std::uint32_t>(data[i])) + 0x9e37ULL * i);
    }
    return h;
}

}  // namespace fpsim
