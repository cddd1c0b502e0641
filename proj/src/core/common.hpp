#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ikit {

// Bad inputs (arguments, file contents, contract violations). Maps to exit
// code 1 at the CLI boundary.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string & msg) : std::runtime_error(msg) {}
};

// Environment failures (I/O, network, server errors). Exit code 2.
struct RuntimeFailure : std::runtime_error {
    explicit RuntimeFailure(const std::string & msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Pinned PRNG: xoshiro256** seeded through SplitMix64. All randomized
// behavior in the pipeline derives from this generator so that results are
// reproducible across platforms and standard-library versions.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t & state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto & word : s_) {
            word = splitmix64(sm);
        }
    }

    uint64_t next() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in [0, n).
    uint64_t next_below(uint64_t n) { return static_cast<uint64_t>(next_double() * static_cast<double>(n)); }

    template <typename T>
    void shuffle(std::vector<T> & items) {
        for (size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[next_below(i)]);
        }
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic per-item stream: mixes a run seed with an item key so the
// decision for a given item does not depend on processing order.
inline Rng keyed_rng(uint64_t seed, std::string_view key) {
    uint64_t sm = seed;
    const uint64_t mixed = splitmix64(sm) ^ fnv1a64(key);
    return Rng(mixed);
}

}  // namespace ikit
