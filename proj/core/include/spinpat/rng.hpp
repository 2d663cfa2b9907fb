#pragma once

#include <cstdint>
#include <random>

namespace spinpat {

// Mixes a master seed and a stream index into an independent engine seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace spinpat
