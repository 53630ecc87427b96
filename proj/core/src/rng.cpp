#include "dahcr/rng.hpp"

#include <algorithm>
#include <cmath>

namespace dahcr {

double Rng::next_gumbel() {
    return -std::log(-std::log(next_open()));
}

std::vector<std::uint32_t> Rng::sample_without_replacement(std::uint32_t n,
                                                           std::uint32_t k) {
    // Floyd's algorithm; result sorted for deterministic downstream use.
    std::vector<std::uint32_t> out;
    out.reserve(k);
    for (std::uint32_t j = n - k; j < n; ++j) {
        auto t = static_cast<std::uint32_t>(next_index(j + 1));
        bool seen = false;
        for (auto v : out) {
            if (v == t) {
                seen = true;
                break;
            }
        }
        out.push_back(seen ? j : t);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::uint64_t Rng::mix(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the pair.
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace dahcr
