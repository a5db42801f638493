#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

#include "fedgc/linalg.hpp"

namespace fedgc {

/// Stream tags for the independent noise sources of a run.
enum class StreamKind : std::uint64_t {
    process_noise = 1,
    measurement_noise = 2,
    client_state_privacy = 3,
    augmented_state_privacy = 4,
    gradient_privacy = 5,
    generation = 6,
    test = 99,
};

/// Folds a run seed and a list of coordinates (kind, client, time, ...) into
/// one 64-bit stream key. Distinct coordinates give statistically independent
/// streams.
std::uint64_t stream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> coordinates);

/// Counter-based generator: output i is a SplitMix64 finalisation of
/// key + i * golden-gamma. Cheap to construct, so one stream per
/// (client, time) costs nothing. Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key) : state_(key) {}
    CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> coordinates)
        : state_(stream_key(seed, coordinates)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    double normal() { return normal_(*this); }

    /// Vector of i.i.d. N(0, sigma^2) draws.
    Vector normal_vector(Index n, double sigma = 1.0);

private:
    std::uint64_t state_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace fedgc
