#pragma once

#include <cstdint>
#include <random>

namespace elmer::rng {

// One step of the splitmix64 sequence; advances state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed for replication r of a study: base ⊕ r.
inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t r) { return base ^ r; }

// mt19937_64 keyed by a splitmix64-scrambled seed, so nearby seeds give
// unrelated streams. Samplers are written out here rather than taken from
// <random> distributions, whose algorithms are implementation-defined.
class Stream {
public:
    explicit Stream(std::uint64_t seed);

    // Uniform on the open interval (0, 1) from the top 53 bits.
    double uniform();
    // Box-Muller, both deviates of a pair used in turn.
    double normal();
    // Z / sqrt(V / df) with V chi-square(df): a sum of df squared normals for
    // integer df up to 100, otherwise 2 · Gamma(df / 2).
    double student_t(double df);
    double chi_square(double df);
    // Inverse CDF, -log(U) / rate.
    double exponential(double rate);
    // Marsaglia-Tsang; shape > 0, unit scale.
    double gamma(double shape);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace elmer::rng
