#pragma once

#include <algorithm>

#include "scalar.hpp"

namespace breaklab {

/// x mod 1 in [0, 1).
template <class Real>
Real reduce(const Real& x) {
    using std::floor;
    Real r = x - floor(x);
    if (r >= 1) r -= 1;  // x = -tiny rounds to 1
    return r;
}

/// Counterclockwise length from a to b, in [0, 1).
template <class Real>
Real ccw_length(const Real& a, const Real& b) {
    return reduce(Real(b - a));
}

template <class Real>
Real circular_distance(const Real& a, const Real& b) {
    Real d = ccw_length(a, b);
    return std::min(d, Real(1 - d));
}

/// True iff b lies on the open counterclockwise arc (a, c). Needs a != c.
template <class Real>
bool strictly_between(const Real& a, const Real& b, const Real& c) {
    Real ab = ccw_length(a, b);
    return ab > 0 && ab < ccw_length(a, c);
}

/// Closed counterclockwise arc [start, end].
template <class Real>
struct Arc {
    Real start;
    Real end;

    Real length() const { return ccw_length(start, end); }

    bool contains(const Real& x) const { return ccw_length(start, x) <= length(); }

    bool contains_interior(const Real& x) const {
        Real d = ccw_length(start, x);
        return d > 0 && d < length();
    }
};

/// Open interiors of two arcs intersect.
template <class Real>
bool interiors_overlap(const Arc<Real>& a, const Arc<Real>& b) {
    Real la = a.length(), lb = b.length();
    Real s = ccw_length(a.start, b.start);  // b.start seen from a.start
    if (s < la) return true;
    // b wraps over a.start
    return s + lb > 1;
}

} // namespace breaklab
