#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "circle_map.hpp"

namespace breaklab {

/// rho = 1/(k_1 + 1/(k_2 + ...)); p_0/q_0 = 0/1, q_1 = k_1.
struct ContinuedFractionData {
    std::vector<std::int64_t> quotients;  // k_1..k_N
    std::vector<std::int64_t> p;          // p_0..p_N
    std::vector<std::int64_t> q;          // q_0..q_N
    bool rational_tail = false;           // expansion ended exactly at working precision
    bool budget_limited = false;          // stopped because the next q_n exceeded the budget

    std::size_t depth() const { return quotients.size(); }

    std::vector<std::pair<std::int64_t, std::int64_t>> convergents() const {
        std::vector<std::pair<std::int64_t, std::int64_t>> out;
        for (std::size_t n = 1; n < q.size(); ++n) out.emplace_back(p[n], q[n]);
        return out;
    }

    bool recurrence_holds() const {
        if (q.empty() || q[0] != 1 || p[0] != 0) return false;
        std::int64_t pm = 1, qm = 0;
        for (std::size_t n = 0; n < quotients.size(); ++n) {
            if (quotients[n] < 1) return false;
            if (p[n + 1] != quotients[n] * p[n] + pm || q[n + 1] != quotients[n] * q[n] + qm) return false;
            pm = p[n];
            qm = q[n];
        }
        return true;
    }
};

inline ContinuedFractionData from_quotients(const std::vector<std::int64_t>& ks) {
    ContinuedFractionData cf;
    cf.quotients = ks;
    cf.p = {0};
    cf.q = {1};
    std::int64_t pm = 1, qm = 0;
    for (auto k : ks) {
        std::int64_t pn = k * cf.p.back() + pm, qn = k * cf.q.back() + qm;
        pm = cf.p.back();
        qm = cf.q.back();
        cf.p.push_back(pn);
        cf.q.push_back(qn);
    }
    return cf;
}

template <class Real>
ContinuedFractionData continued_fraction_of(const Real& rho, int depth) {
    using std::abs;
    require(rho > 0 && rho < 1, "continued_fraction_of needs 0 < rho < 1");
    std::vector<std::int64_t> ks;
    Real x = rho;
    Real tol = 8 * unit_roundoff<Real>();
    bool rational = false;
    Real growth = 1;
    for (int i = 0; i < depth; ++i) {
        Real r = 1 / x;
        std::int64_t k = floor_int(r);
        Real frac = r - Real(k);
        // 1/x can land a hair below an integer; the error in x grows like q_n^2
        if (1 - frac <= tol * r * growth) {
            ++k;
            frac = 0;
        }
        ks.push_back(k);
        auto cf = from_quotients(ks);
        Real approx = Real(cf.p.back()) / Real(cf.q.back());
        if (frac == 0 || abs(rho - approx) <= tol * rho) {
            rational = true;
            break;
        }
        growth = Real(cf.q.back()) * Real(cf.q.back());
        x = frac;
    }
    auto cf = from_quotients(ks);
    cf.rational_tail = rational;
    return cf;
}

template <class Real>
Real golden_mean() {
    using std::sqrt;
    return (sqrt(Real(5)) - 1) / 2;
}

template <class Real>
Real silver_mean() {
    using std::sqrt;
    return sqrt(Real(2)) - 1;
}

// ---------------------------------------------------------------------------

/// Lifted rotation number bracket [lower, upper]; `value` is reduced mod 1.
template <class Real>
struct RotationEstimate {
    Real value;
    Real error_bound;
    std::int64_t iterations_used = 0;
    Real lower, upper;  // bracket for the lifted rotation number
    std::int64_t lower_num = 0, lower_den = 1, upper_num = 1, upper_den = 1;
    bool periodic = false;  // the orbit returned exactly to x0
};

namespace detail {

inline bool frac_less(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
    return static_cast<__int128>(a) * d < static_cast<__int128>(c) * b;
}

} // namespace detail

/// Intersects [p/q, (p+1)/q], p = floor(F^q(x0) - x0), over q <= budget.
template <class Real>
RotationEstimate<Real> rotation_number(const CircleMap<Real>& map, std::int64_t budget, Real x0 = Real(0)) {
    require(budget >= 2, "rotation_number needs budget >= 2");
    x0 = reduce(x0);
    Real x = x0;
    std::int64_t wind = 0;
    std::int64_t ln = std::numeric_limits<std::int64_t>::min() / 4, ld = 1, un = std::numeric_limits<std::int64_t>::max() / 4, ud = 1;
    bool periodic = false;
    std::int64_t n = 1;
    for (; n <= budget; ++n) {
        Real y = map.lift(x);
        std::int64_t k = floor_int(y);
        wind += k;
        x = y - Real(k);
        if (x >= 1) {
            x -= 1;
            ++wind;
        }
        std::int64_t p = wind + (x >= x0 ? 0 : -1);
        if (x == x0) {
            ln = un = p;
            ld = ud = n;
            periodic = true;
            break;
        }
        if (detail::frac_less(ln, ld, p, n)) {
            ln = p;
            ld = n;
        }
        if (detail::frac_less(p + 1, n, un, ud)) {
            un = p + 1;
            ud = n;
        }
    }
    RotationEstimate<Real> est;
    est.lower = Real(ln) / Real(ld);
    est.upper = Real(un) / Real(ud);
    est.lower_num = ln;
    est.lower_den = ld;
    est.upper_num = un;
    est.upper_den = ud;
    est.iterations_used = std::min(n, budget);
    est.periodic = periodic;
    est.value = reduce(Real((est.lower + est.upper) / 2));
    est.error_bound = (est.upper - est.lower) / 2;
    return est;
}

// ---------------------------------------------------------------------------

/// Partial quotients from one-sided closest returns of the orbit of x0.
///
/// Each time x_t beats the best distance on one side it opens or extends a
/// run on that side; run lengths are the k_n and the time of the last update
/// in run n is q_n. x_1 counts as the first left update.
template <class Real>
ContinuedFractionData closest_return_quotients(const CircleMap<Real>& map, Real x0, int depth,
                                               std::int64_t budget = kDefaultOrbitBudget) {
    require(depth >= 1, "depth must be >= 1");
    x0 = reduce(x0);
    Real x = map(x0);
    if (x == x0) fail(ErrorKind::rational_rotation, "fixed point at x0");
    Real best_right = ccw_length(x0, x);
    Real best_left = 1 - best_right;
    std::vector<std::int64_t> ks;
    std::vector<std::int64_t> last_time;
    int side = 0;  // 0 left, 1 right
    std::int64_t run = 1, last = 1;
    bool limited = true;
    for (std::int64_t t = 2; t <= budget; ++t) {
        x = map(x);
        Real dr = ccw_length(x0, x);
        if (dr == 0)
            fail(ErrorKind::rational_rotation, "orbit of x0 returned exactly after " + std::to_string(t) + " steps");
        int event = -1;
        if (dr < best_right) {
            best_right = dr;
            event = 1;
        } else if (1 - dr < best_left) {
            best_left = 1 - dr;
            event = 0;
        }
        if (event < 0) continue;
        if (event == side) {
            ++run;
            last = t;
            continue;
        }
        ks.push_back(run);
        last_time.push_back(last);
        if (static_cast<int>(ks.size()) == depth) {
            limited = false;
            break;
        }
        side = event;
        run = 1;
        last = t;
    }
    auto cf = from_quotients(ks);
    cf.budget_limited = limited;
    for (std::size_t n = 0; n < last_time.size(); ++n)
        if (cf.q[n + 1] != last_time[n])
            fail(ErrorKind::precision_exhausted, "closest-return times break the q-recurrence at n = " +
                                                     std::to_string(n + 1) + "; raise precision_bits");
    return cf;
}

// ---------------------------------------------------------------------------

struct TuneOptions {
    std::int64_t initial_budget = 256;
    std::int64_t max_budget = std::int64_t(1) << 24;
    int max_steps = 400;
};

template <class Real>
struct TuneResult {
    Real shift;
    RotationEstimate<Real> estimate;
    std::int64_t budget_used = 0;
    int steps = 0;
};

/// Bisection on t for rho(F_0 + t) = target. The rotation budget only doubles
/// when the current bracket cannot decide the side or the tolerance.
template <class Real>
TuneResult<Real> tune_parameter(const CircleMap<Real>& family, const Real& target, const Real& tol,
                                const TuneOptions& opt = {}) {
    using std::abs;
    require(target > 0 && target < 1, "target rotation number must lie in (0, 1)");
    require(tol > 0, "tolerance must be positive");
    auto base = family.with_shift(Real(0));
    auto r0 = rotation_number(base, 64);
    Real lo = target - r0.upper - 1;
    Real hi = target - r0.lower + 1;
    std::int64_t budget = opt.initial_budget;
    TuneResult<Real> res;
    for (int step = 0; step < opt.max_steps; ++step) {
        Real mid = (lo + hi) / 2;
        auto est = rotation_number(family.with_shift(mid), budget);
        res.steps = step + 1;
        if (est.upper < target) {
            lo = mid;
        } else if (est.lower > target) {
            hi = mid;
        } else if (est.upper - est.lower <= tol) {
            res.shift = mid;
            res.estimate = est;
            res.budget_used = budget;
            return res;
        } else {
            if (budget >= opt.max_budget)
                fail(ErrorKind::budget_exceeded, "tuning needs more than " + std::to_string(budget) + " iterations");
            budget *= 2;
            continue;
        }
        if (hi - lo <= 4 * unit_roundoff<Real>() * (1 + abs(mid)))
            fail(ErrorKind::mode_locking, "bracket collapsed at shift " + format_real(mid) + " with rho in [" +
                                              format_real(est.lower) + ", " + format_real(est.upper) + "]");
    }
    fail(ErrorKind::mode_locking, "no convergence within the step limit");
}

} // namespace breaklab
