#ifndef POLARISCOPE_HALF_INT_HPP
#define POLARISCOPE_HALF_INT_HPP

#include <compare>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>

namespace polariscope {

/// Exact half-integer angular-momentum label, stored as the doubled value so
/// that spin-1/2 arithmetic never touches floating point.  twice = 2j.
struct HalfInt {
    int twice = 0;

    constexpr HalfInt() = default;

    static constexpr HalfInt from_twice(int t) { return HalfInt{t}; }

    /// Integer spin/projection n (twice = 2n).
    static constexpr HalfInt whole(int n) { return HalfInt{2 * n}; }

    /// Nearest half-integer to v; throws if v is not within tol of a multiple of 1/2.
    static HalfInt from_value(double v, double tol = 1e-9);

    constexpr bool is_integer() const { return twice % 2 == 0; }
    constexpr double value() const { return 0.5 * twice; }

    /// 2j+1, the dimension of the spin-j irrep.  Requires twice >= 0.
    constexpr int multiplicity() const { return twice + 1; }

    constexpr HalfInt operator+(HalfInt o) const { return HalfInt{twice + o.twice}; }
    constexpr HalfInt operator-(HalfInt o) const { return HalfInt{twice - o.twice}; }
    constexpr HalfInt operator-() const { return HalfInt{-twice}; }
    constexpr auto operator<=>(const HalfInt&) const = default;

    std::string str() const;

private:
    explicit constexpr HalfInt(int t) : twice(t) {}
};

/// True when (j, m) is a valid magnitude/projection pair: j >= 0, |m| <= j,
/// and j - m an integer (same parity of the doubled values).
constexpr bool valid_jm(HalfInt j, HalfInt m) {
    return j.twice >= 0 && std::abs(m.twice) <= j.twice && (j.twice - m.twice) % 2 == 0;
}

inline HalfInt HalfInt::from_value(double v, double tol) {
    const double t = 2.0 * v;
    const long r = std::lround(t);
    if (std::abs(t - static_cast<double>(r)) > tol)
        throw std::invalid_argument("HalfInt::from_value: " + std::to_string(v) +
                                    " is not a half-integer");
    return HalfInt::from_twice(static_cast<int>(r));
}

inline std::string HalfInt::str() const {
    if (twice % 2 == 0) return std::to_string(twice / 2);
    return std::to_string(twice) + "/2";
}

} // namespace polariscope

template <>
struct std::hash<polariscope::HalfInt> {
    size_t operator()(const polariscope::HalfInt& h) const noexcept {
        return std::hash<int>()(h.twice);
    }
};

#endif
