#pragma once

#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace tempo {

// Simulation clock value. Always finite and non-negative; the checked()
// factory is the validation point for values coming from model code.
class VirtualTime {
public:
    constexpr VirtualTime() = default;
    // Precondition: v is finite and >= 0. Use checked() for untrusted input.
    explicit constexpr VirtualTime(double v) : v_(v) {}

    static VirtualTime checked(double v) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("VirtualTime must be finite and non-negative");
        }
        return VirtualTime(v);
    }

    [[nodiscard]] constexpr double value() const { return v_; }

    friend constexpr bool operator==(VirtualTime a, VirtualTime b) { return a.v_ == b.v_; }
    friend constexpr std::strong_ordering operator<=>(VirtualTime a, VirtualTime b) {
        // Values are finite by construction, so the double ordering is total.
        if (a.v_ < b.v_) return std::strong_ordering::less;
        if (a.v_ > b.v_) return std::strong_ordering::greater;
        return std::strong_ordering::equal;
    }

private:
    double v_ = 0.0;
};

// Order-preserving integer image of a non-negative finite double: for
// 0 <= a,b finite, a < b  <=>  bits(a) < bits(b). Used for atomic min words.
inline std::uint64_t time_bits(double v) { return std::bit_cast<std::uint64_t>(v); }
inline double time_from_bits(std::uint64_t b) { return std::bit_cast<double>(b); }

inline constexpr double kTimeInfinity = std::numeric_limits<double>::infinity();

} // namespace tempo
