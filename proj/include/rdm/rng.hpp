#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rdm {

// splitmix64 finalizer; the basis of all seed derivation in this project.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent child seed from a root seed and a stream tag.
// All subsystem randomness flows from one root seed through this rule.
inline std::uint64_t split_seed(std::uint64_t root, std::uint64_t stream) {
    return mix64(mix64(root) ^ mix64(stream + 0x517cc1b727220a95ULL));
}

// Stream tags for split_seed (documented so runs are reproducible given the
// root seed alone).
namespace seed_stream {
constexpr std::uint64_t model_init = 1;
constexpr std::uint64_t train = 2;
constexpr std::uint64_t probes = 3;
constexpr std::uint64_t toy_data = 4;
constexpr std::uint64_t ode_sample = 5;
constexpr std::uint64_t time_embed = 6;
constexpr std::uint64_t class_embed = 7;
constexpr std::uint64_t reference = 8;
constexpr std::uint64_t synth_data = 9;
}  // namespace seed_stream

// Deterministic RNG: mt19937_64 (bit-stable across platforms by the standard)
// with our own uniform/normal mappings, since std distributions are not
// implementation-stable.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform in [0,1), 53-bit resolution
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller; second value of each pair is cached
    double normal() {
        if (has_cache_) {
            has_cache_ = false;
            return cache_;
        }
        // u1 in (0,1] so log() is finite
        double u1 = static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cache_ = r * std::sin(a);
        has_cache_ = true;
        return r * std::cos(a);
    }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) { return eng_() % n; }

    // +1 or -1 with equal probability
    double rademacher() { return (eng_() & 1) ? 1.0 : -1.0; }

private:
    std::mt19937_64 eng_;
    double cache_ = 0.0;
    bool has_cache_ = false;
};

}  // namespace rdm
