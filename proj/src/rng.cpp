#include "clustergcf/rng.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "clustergcf/parallel.hpp"

namespace cgcf {

namespace {
std::atomic<int> thread_override{0};
}

void set_thread_count(int n) { thread_override.store(n > 0 ? n : 1); }

int thread_count() {
    const int forced = thread_override.load(std::memory_order_relaxed);
    if (forced > 0) return forced;
    static const int cached = [] {
        if (const char* env = std::getenv("CGCF_THREADS")) {
            const long v = std::strtol(env, nullptr, 10);
            if (v >= 1) return static_cast<int>(v);
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? static_cast<int>(hw) : 1;
    }();
    return cached;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                          std::uint64_t a, std::uint64_t b) {
    // FNV-1a over the label folded into a splitmix chain with the key words.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    std::uint64_t state = root;
    std::uint64_t out = splitmix64(state);
    state ^= h;
    out ^= splitmix64(state);
    state ^= a + 0x9e3779b97f4a7c15ULL;
    out ^= splitmix64(state);
    state ^= b + 0x7f4a7c15f39cc060ULL;
    out ^= splitmix64(state);
    return out;
}

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) {
    std::uint64_t state = seed;
    for (auto& word : s_) word = splitmix64(state);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

Real Rng::uniform() {
    return static_cast<Real>(next_u64() >> 11) * 0x1.0p-53;
}

Real Rng::uniform_open() {
    constexpr Real lo = 1e-12;
    constexpr Real hi = 1.0 - 1e-12;
    const Real u = uniform();
    if (u < lo) return lo;
    if (u > hi) return hi;
    return u;
}

std::uint64_t Rng::uniform_below(std::uint64_t n) {
    // Lemire multiply-shift; bias is < 1/2^64 per draw.
    const unsigned __int128 m =
        static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
    return static_cast<std::uint64_t>(m >> 64);
}

Real Rng::uniform_symmetric(Real bound) {
    return (uniform() * 2.0 - 1.0) * bound;
}

Real Rng::gumbel() {
    return -std::log(-std::log(uniform_open()));
}

}  // namespace cgcf
