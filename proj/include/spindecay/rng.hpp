#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace spindecay {

/// splitmix64 step; advances state and returns the next output word.
std::uint64_t splitmix64(std::uint64_t& state);

/// Derives a child seed from a master seed and an identity key list
/// (e.g. grid indices).  Pure integer arithmetic, so the derivation is
/// identical on every platform and independent of evaluation order.
std::uint64_t mix_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys);

/// Deterministic random stream.  The engine is std::mt19937_64 (whose output
/// sequence the standard pins down bit-for-bit); the distributions are
/// implemented here rather than taken from <random> because the standard
/// leaves distribution algorithms implementation-defined, which would break
/// reproducibility across standard libraries.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed);

    /// Uniform on (0, 1] (never returns 0, so log() is safe).
    double uniform();

    /// Standard normal via Box-Muller (caches the spare deviate).
    double normal();
    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    /// Poisson deviate; exact inversion for small lambda, Hormann's PTRS
    /// transformed rejection for large.
    std::uint64_t poisson(double lambda);

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace spindecay
