#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace tempo {

// splitmix64 step; also serves as the seed mixer for per-object streams.
inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Per-object random stream: xoshiro256++ with splitmix64 seeding. Each
// simulation object owns exactly one stream seeded from (global_seed,
// stream_index), so draws are independent of scheduling and thread count.
// Trivially copyable; checkpoints snapshot it by value.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}

    RngStream(std::uint64_t global_seed, std::uint64_t stream_index) {
        std::uint64_t x = global_seed;
        // Fold the stream index through one splitmix round first so streams
        // (seed, 0) and (seed+1, 0) do not collide with (seed, 1).
        x ^= 0xd6e8feb86659fd93ULL * (stream_index + 1);
        for (auto& w : s_) w = splitmix64(x);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1; // all-zero state is invalid
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = std::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = std::rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n must be positive.
    std::uint32_t pick(std::uint32_t n) {
        if (n == 0) throw std::invalid_argument("RngStream::pick: n must be positive");
        return static_cast<std::uint32_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Exponential with the given mean (inversion method). mean must be > 0.
    double exponential(double mean) {
        if (!(mean > 0.0)) throw std::invalid_argument("exponential: mean must be positive");
        return -mean * std::log1p(-uniform01());
    }

    // Standard normal via Box-Muller. No cached second value: the stream
    // state stays exactly the 256-bit xoshiro state, which keeps checkpoint
    // copies trivial.
    double normal01() {
        double u1 = uniform01();
        double u2 = uniform01();
        // Guard u1 = 0: log(0) would be -inf.
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Multiplicative lognormal jitter: exp(sigma * N(0,1)), median 1.
    double lognormal_jitter(double sigma) { return std::exp(sigma * normal01()); }

    friend bool operator==(const RngStream&, const RngStream&) = default;

private:
    std::array<std::uint64_t, 4> s_{};
};

} // namespace tempo
