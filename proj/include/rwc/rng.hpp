#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rwc {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seeded generator. Substreams are derived by hashing a path of tags onto the
// root seed, so repetition k gets the same stream whatever thread runs it.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

    static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
        std::uint64_t h = splitmix64(seed);
        for (auto tag : path) h = splitmix64(h ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
        return Rng(h);
    }

    Rng substream(std::uint64_t tag) const { return stream(seed_, {tag}); }

    std::uint64_t seed() const noexcept { return seed_; }

    double uniform() { return unif_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unif_(engine_); }
    double normal() { return norm_(engine_); }
    bool bernoulli(double prob) { return unif_(engine_) < prob; }
    std::uint64_t next() { return engine_(); }
    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace rwc
