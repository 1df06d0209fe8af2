#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace uvcl {

// Mixes a base seed with a stream tag so that independent consumers (sampler,
// augmentation, fold shuffling, ...) get decorrelated streams from one
// user-facing seed. splitmix64 finalizer.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic RNG used everywhere in the library. All draw procedures are
// spelled out here instead of using std::uniform_int_distribution and friends,
// whose output sequences differ between standard library implementations. The
// serialized form is the mt19937_64 engine state, so a restored Rng continues
// the exact stream.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on {lo, ..., hi}, inclusive. Rejection sampling, no modulo bias.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (lo > hi) throw std::invalid_argument("Rng::uniform_int: empty range");
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(next_u64());  // full 64-bit range
        const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % span;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return lo + static_cast<std::int64_t>(v % span);
    }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

    // Standard normal via the polar method. Deliberately does not cache the
    // second variate: the serialized state then fully captures the stream.
    double normal() {
        for (;;) {
            const double u = 2.0 * uniform_real() - 1.0;
            const double v = 2.0 * uniform_real() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) {
                return u * std::sqrt(-2.0 * std::log(s) / s);
            }
        }
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void deserialize(const std::string& state) {
        std::istringstream is(state);
        is >> engine_;
        if (is.fail()) throw std::runtime_error("Rng::deserialize: malformed engine state");
    }

  private:
    std::mt19937_64 engine_;
};

// FNV-1a, used to fingerprint effective configs for run directory names.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t v);

// Formats a double with enough digits to round-trip exactly, for logs whose
// byte content must be reproducible.
std::string format_double(double v);

}  // namespace uvcl
