#pragma once

#include <cmath>
#include <cstdint>

namespace clonerlab {

// Counter-based random stream: every (trial, draw-site) pair gets its own
// deterministic generator derived from the master seed, so results do not
// depend on scheduling or worker count.
class RandomStream {
  public:
    explicit RandomStream(uint64_t key) : state(key) {}

    static uint64_t mix(uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static RandomStream derive(uint64_t master_seed, uint64_t trial, uint64_t site) {
        uint64_t key = mix(master_seed);
        key = mix(key ^ (0x517CC1B727220A95ULL + trial));
        key = mix(key ^ (0x2545F4914F6CDD1DULL + site));
        return RandomStream(key);
    }

    uint64_t next_u64() {
        state += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform on [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform on (0, 1]; safe as a log() argument
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    // standard normal via Box-Muller (one draw per call, fixed consumption of
    // exactly two uniforms, so streams stay aligned across platforms)
    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // integer in [0, n)
    uint64_t below(uint64_t n) { return next_u64() % n; }

  private:
    uint64_t state;
};

} // namespace clonerlab
