#include "fedgc/rng.hpp"

namespace fedgc {

namespace {

constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t stream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> coordinates) {
    std::uint64_t key = mix64(seed + kGoldenGamma);
    for (std::uint64_t c : coordinates) {
        key = mix64(key ^ mix64(c + kGoldenGamma));
    }
    return key;
}

CounterRng::result_type CounterRng::operator()() {
    state_ += kGoldenGamma;
    return mix64(state_);
}

Vector CounterRng::normal_vector(Index n, double sigma) {
    Vector out(n);
    for (Index i = 0; i < n; ++i) out(i) = sigma * normal();
    return out;
}

}  // namespace fedgc
