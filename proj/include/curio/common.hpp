#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

namespace curio {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Error hierarchy. The CLI maps each class to a distinct exit code.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad caller-supplied values: non-finite inputs, out-of-range indices.
struct InputError : Error {
    using Error::Error;
};

/// Malformed or inconsistent configuration.
struct ConfigError : Error {
    using Error::Error;
};

/// Missing, truncated, or mismatched persisted artifact.
struct ArtifactError : Error {
    using Error::Error;
};

/// Operation invoked on a model built with the other head mode.
struct ModeError : Error {
    using Error::Error;
};

/// Rejection sampling could not place objects in the workspace.
struct PlacementError : Error {
    using Error::Error;
};

/// Numerically degenerate input, e.g. a zero-norm embedding row.
struct DegenerateInputError : Error {
    using Error::Error;
};

/// No distillation seed converged below the residual bound.
struct DistillError : Error {
    using Error::Error;
};

/// Test-set generation could not retain enough samples.
struct GenerationError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG.
//
// All sampling goes through explicit conversions of mt19937_64 output so a
// given seed yields the same stream on every build; std::*_distribution is
// implementation-defined and is deliberately not used.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard Box-Muller; two uniform draws per call, no cached spare.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = 0.0;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    /// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    std::uint64_t index(std::uint64_t n) {
        if (n == 0) throw InputError("Rng::index: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = gen_();
        while (v >= limit) v = gen_();
        return v % n;
    }

    bool coin() { return (gen_() & 1ULL) != 0; }

    /// Derives an independent child seed from a path of labels.
    static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
        std::uint64_t h = splitmix64(seed);
        for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p));
        return h;
    }

private:
    std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// FNV-1a 64-bit, used for config hashes and byte-level determinism checks.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a64(s.data(), s.size(), h);
}

std::string to_hex(std::uint64_t v);

}  // namespace curio
