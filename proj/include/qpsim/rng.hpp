#ifndef QPSIM_RNG_HPP
#define QPSIM_RNG_HPP

#include <cmath>
#include <cstdint>

namespace qpsim {

// splitmix64: used both as a generator and to derive independent
// substream seeds from (seed, index) pairs.
inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// xoshiro256** with self-contained distributions so that streams are
// bit-stable across platforms and library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
        have_gauss_ = false;
    }

    // independent substream, e.g. per phonon or per trace
    static Rng substream(uint64_t seed, uint64_t index) {
        uint64_t sm = seed ^ (0x517cc1b727220a95ull * (index + 1));
        return Rng(splitmix64(sm));
    }

    uint64_t next_u64() {
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

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    double exponential(double rate) {
        // rate > 0; uses 1-u to avoid log(0)
        return -std::log(1.0 - uniform()) / rate;
    }

    double normal() {
        if (have_gauss_) {
            have_gauss_ = false;
            return cached_gauss_;
        }
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_gauss_ = r * std::sin(a);
        have_gauss_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    long poisson(double mean) {
        // inversion for small means, normal approx for large
        if (mean <= 0.0) return 0;
        if (mean < 50.0) {
            double l = std::exp(-mean);
            long k = 0;
            double p = 1.0;
            do {
                ++k;
                p *= uniform();
            } while (p > l);
            return k - 1;
        }
        double g = normal(mean, std::sqrt(mean));
        return g < 0.0 ? 0 : static_cast<long>(g + 0.5);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
    bool have_gauss_;
    double cached_gauss_ = 0.0;
};

} // namespace qpsim

#endif
