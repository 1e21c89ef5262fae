#pragma once

// Real-number plumbing shared by every module. Two backends:
// IEEE double (53 bits) and MPFR with a runtime mantissa width.

#include <boost/multiprecision/mpfr.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <type_traits>

#include "error.hpp"

namespace breaklab {

using ExtendedReal = boost::multiprecision::mpfr_float;

inline constexpr int kDoubleBits = 53;

template <class Real>
inline constexpr bool is_extended_v = std::is_same_v<Real, ExtendedReal>;

/// Sets the MPFR default precision for the lifetime of the scope.
class PrecisionScope {
public:
    explicit PrecisionScope(int bits) : saved_(ExtendedReal::default_precision()) {
        // digits10 is the only knob in this Boost version; round up so at least `bits` survive
        auto digits10 = static_cast<unsigned>(std::ceil(bits * 0.30102999566398120)) + 1;
        ExtendedReal::default_precision(digits10);
    }
    ~PrecisionScope() { ExtendedReal::default_precision(saved_); }
    PrecisionScope(const PrecisionScope&) = delete;
    PrecisionScope& operator=(const PrecisionScope&) = delete;

private:
    unsigned saved_;
};

template <class Real>
int mantissa_bits() {
    if constexpr (is_extended_v<Real>)
        return static_cast<int>(mpfr_get_prec(Real(1).backend().data()));
    else
        return std::numeric_limits<Real>::digits;
}

/// Unit roundoff 2^-p at the working precision.
template <class Real>
Real unit_roundoff() {
    using std::ldexp;
    return ldexp(Real(1), -mantissa_bits<Real>());
}

template <class Real>
double to_double(const Real& x) {
    if constexpr (is_extended_v<Real>)
        return x.template convert_to<double>();
    else
        return static_cast<double>(x);
}

template <class Real>
Real parse_real(const std::string& text) {
    if constexpr (is_extended_v<Real>) {
        return Real(text);
    } else {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        require(used == text.size(), "not a number: " + text);
        return v;
    }
}

/// Decimal text that reads back to the same value.
template <class Real>
std::string format_real(const Real& x) {
    if constexpr (is_extended_v<Real>) {
        return x.str(0, std::ios::scientific);
    } else {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return buf;
    }
}

template <class Real>
std::int64_t floor_int(const Real& x) {
    using std::floor;
    if constexpr (is_extended_v<Real>)
        return floor(x).template convert_to<std::int64_t>();
    else
        return static_cast<std::int64_t>(floor(x));
}

template <class Real>
Real pi() {
    using std::acos;
    return acos(Real(-1));
}

/// Runs `fn(Real{})` with Real = double for 53 bits, otherwise MPFR at `bits`.
template <class Fn>
decltype(auto) with_precision(int bits, Fn&& fn) {
    require(bits >= kDoubleBits, "precision_bits must be >= 53");
    if (bits == kDoubleBits) return fn(double{});
    PrecisionScope scope(bits);
    return fn(ExtendedReal{});
}

} // namespace breaklab
