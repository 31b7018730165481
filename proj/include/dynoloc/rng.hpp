#pragma once

#include <cmath>
#include <cstdint>

namespace dynoloc {

// Deterministic random stream with hand-rolled distributions so that output
// is bit-identical across platforms and standard-library versions. Streams
// can be forked by label, which keeps parallel batch runs independent of
// execution order.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {
        // splitmix-style warmup to decorrelate near-identical seeds
        next_u64();
        next_u64();
    }

    RngStream fork(std::uint64_t label) const {
        std::uint64_t s = state_;
        s ^= label + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
        return RngStream(s);
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    int uniform_int(int lo, int hi_inclusive) {
        const auto span = static_cast<std::uint64_t>(hi_inclusive - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    double normal(double mean, double sigma) {
        // Box-Muller; one value per call keeps the stream stateless
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * r * std::cos(2.0 * M_PI * u2);
    }

    double exponential(double mean) {
        double u = uniform01();
        if (u > 1.0 - 1e-16) u = 1.0 - 1e-16;
        return -mean * std::log(1.0 - u);
    }

    bool bernoulli(double p) { return uniform01() < p; }

private:
    std::uint64_t state_;
};

} // namespace dynoloc
