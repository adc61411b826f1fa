#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace faultbench {

// Deterministic random stream. The generator is std::mt19937_64, which the
// standard pins bit-for-bit, and every transform on top of it (uniform,
// normal, shuffle) is written out here instead of using the
// implementation-defined <random> distributions. Identical seeds therefore
// give identical draw sequences on every platform. `position` counts raw
// 64-bit draws.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t position() const { return position_; }

    std::uint64_t next_u64() {
        ++position_;
        return engine_();
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Uniform integer in [0, n). Negligible modulo bias is irrelevant for
    // seeded shuffles; determinism is what matters.
    std::size_t uniform_index(std::size_t n) {
        std::size_t i = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    // Standard normal via Box-Muller; the spare value is cached so a pair of
    // calls costs one transform.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite.
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) {
        return mean + stddev * normal();
    }

    // Fisher-Yates with our own index draws (std::shuffle is
    // implementation-defined).
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        shuffle(p);
        return p;
    }

    // Independent child stream; used to give each model / sequence its own
    // deterministic substream.
    RngStream fork(std::uint64_t salt) {
        return RngStream(seed_ ^ (salt * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL));
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t position_ = 0;
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace faultbench
