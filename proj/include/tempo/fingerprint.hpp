#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>

#include "tempo/event.hpp"

namespace tempo {

// 64-bit state digest. Whole-run fingerprints are built by combining
// per-object digests with a commutative, associative fold (wrapping add), so
// the result is independent of the order in which objects are visited.
struct Fingerprint {
    std::uint64_t digest = 0;

    friend constexpr bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

constexpr Fingerprint combine(Fingerprint a, Fingerprint b) {
    return Fingerprint{a.digest + b.digest};
}

// Finalizing avalanche (splitmix64 mixer) used wherever a value must be
// scrambled before entering an order-sensitive or additive fold.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// FNV-1a accumulator with a final avalanche; small-state, byte-order stable
// within a build, and sensitive to every input byte.
class Digest {
public:
    Digest& bytes(std::span<const std::byte> data) {
        for (std::byte b : data) {
            h_ ^= static_cast<std::uint64_t>(b);
            h_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    Digest& u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h_ ^= (v >> (8 * i)) & 0xff;
            h_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    Digest& u32(std::uint32_t v) { return u64(v); }
    Digest& f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }

    [[nodiscard]] std::uint64_t finish() const { return mix64(h_); }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline Fingerprint fingerprint_object(std::span<const std::byte> state_bytes) {
    return Fingerprint{Digest{}.bytes(state_bytes).finish()};
}

inline std::uint64_t key_hash(const EventKey& k) {
    return Digest{}.f64(k.ts.value()).u32(k.dst).u32(k.src).u64(k.seq).finish();
}

// Order-sensitive fold for per-object committed-event chains: appending the
// same items in a different order yields a different chain value.
constexpr std::uint64_t chain(std::uint64_t trace, std::uint64_t item) {
    return mix64(trace ^ (item + 0x9e3779b97f4a7c15ULL));
}

// Digest of one object's committed history: final state, the chain over its
// committed event keys (in per-object commit order), and the committed count.
inline Fingerprint object_commit_digest(std::uint64_t state_digest, std::uint64_t trace,
                                        std::uint64_t committed_count) {
    return Fingerprint{Digest{}.u64(state_digest).u64(trace).u64(committed_count).finish()};
}

} // namespace tempo
