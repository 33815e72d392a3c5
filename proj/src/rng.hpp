#pragma once

#include <cstdint>
#include <random>

namespace dsa {

// Deterministic random stream. Doubles are derived from the raw 64-bit
// output directly so that sequences are identical across standard
// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // uniform integer in [0, n)
    int uniform_int(int n) {
        return static_cast<int>(uniform() * n);
    }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

}  // namespace dsa
