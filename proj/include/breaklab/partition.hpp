#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "random.hpp"
#include "rotation.hpp"
#include "stats.hpp"

namespace breaklab {

/// One element of eta_n: Delta_index^{(level)} = f^index(Delta_0^{(level)}).
template <class Real>
struct PartitionInterval {
    int level = 0;  // n - 1 for long intervals, n for short ones
    std::int64_t index = 0;
    std::int64_t start_orbit = 0, end_orbit = 0;  // arc = [x_start_orbit, x_end_orbit]
    Arc<Real> arc;
};

/// eta_n(x0): q_n long intervals Delta_i^{(n-1)} and q_{n-1} short ones Delta_j^{(n)}.
/// For n odd x_{q_n} lies left of x0, so Delta_0^{(n)} = [x_{q_n}, x0] and
/// Delta_0^{(n-1)} = [x0, x_{q_{n-1}}]; n even is the mirror image.
template <class Real>
struct DynamicalPartition {
    int level = 0;
    Real x0;
    std::int64_t q_prev = 0, q_n = 0;
    std::vector<Real> orbit;  // x_0 .. x_{q_n + q_{n-1} - 1}
    std::vector<PartitionInterval<Real>> long_intervals, short_intervals;

    bool odd() const { return level % 2 == 1; }
    std::size_t size() const { return long_intervals.size() + short_intervals.size(); }

    Real max_length() const {
        Real m = 0;
        for (const auto* set : {&long_intervals, &short_intervals})
            for (const auto& iv : *set) m = std::max(m, iv.arc.length());
        return m;
    }

    Real total_length() const {
        Real s = 0;
        for (const auto* set : {&long_intervals, &short_intervals})
            for (const auto& iv : *set) s += iv.arc.length();
        return s;
    }

    std::vector<PartitionInterval<Real>> all() const {
        auto out = long_intervals;
        out.insert(out.end(), short_intervals.begin(), short_intervals.end());
        return out;
    }
};

template <class Real>
std::vector<Real> forward_orbit(const CircleMap<Real>& map, Real x0, std::int64_t count,
                                std::int64_t budget = kDefaultOrbitBudget) {
    if (count > budget) fail(ErrorKind::budget_exceeded, "orbit of length " + std::to_string(count));
    std::vector<Real> orbit;
    orbit.reserve(count);
    Real x = reduce(x0);
    for (std::int64_t i = 0; i < count; ++i) {
        orbit.push_back(x);
        x = map(x);
    }
    return orbit;
}

/// Builds eta_n from a precomputed orbit of length >= q_n + q_{n-1}.
template <class Real>
DynamicalPartition<Real> partition_from_orbit(const std::vector<Real>& orbit, int n, std::int64_t q_prev,
                                              std::int64_t q_n) {
    require(n >= 1, "partition level must be >= 1");
    require(static_cast<std::int64_t>(orbit.size()) >= q_n + q_prev, "orbit too short for the partition");
    DynamicalPartition<Real> p;
    p.level = n;
    p.x0 = orbit[0];
    p.q_prev = q_prev;
    p.q_n = q_n;
    p.orbit.assign(orbit.begin(), orbit.begin() + (q_n + q_prev));
    bool odd = n % 2 == 1;
    for (std::int64_t i = 0; i < q_n; ++i) {
        PartitionInterval<Real> iv;
        iv.level = n - 1;
        iv.index = i;
        iv.start_orbit = odd ? i : i + q_prev;
        iv.end_orbit = odd ? i + q_prev : i;
        iv.arc = {orbit[iv.start_orbit], orbit[iv.end_orbit]};
        p.long_intervals.push_back(iv);
    }
    for (std::int64_t j = 0; j < q_prev; ++j) {
        PartitionInterval<Real> iv;
        iv.level = n;
        iv.index = j;
        iv.start_orbit = odd ? j + q_n : j;
        iv.end_orbit = odd ? j : j + q_n;
        iv.arc = {orbit[iv.start_orbit], orbit[iv.end_orbit]};
        p.short_intervals.push_back(iv);
    }
    return p;
}

template <class Real>
DynamicalPartition<Real> dynamical_partition(const CircleMap<Real>& map, Real x0, int n,
                                             std::int64_t budget = kDefaultOrbitBudget) {
    auto cf = closest_return_quotients(map, x0, n, budget);
    if (static_cast<int>(cf.depth()) < n)
        fail(ErrorKind::budget_exceeded, "q_" + std::to_string(n) + " exceeds the orbit budget");
    std::int64_t q_prev = cf.q[n - 1], q_n = cf.q[n];
    return partition_from_orbit(forward_orbit(map, x0, q_n + q_prev, budget), n, q_prev, q_n);
}

/// Empty when the intervals tile the circle: consecutive in circular order,
/// sharing endpoints exactly, lengths summing to 1 within `tol`.
template <class Real>
std::vector<std::string> partition_defects(const DynamicalPartition<Real>& p, const Real& tol) {
    using std::abs;
    std::vector<std::string> defects;
    auto ivs = p.all();
    if (static_cast<std::int64_t>(ivs.size()) != p.q_n + p.q_prev) defects.push_back("interval count");
    std::sort(ivs.begin(), ivs.end(), [](const auto& a, const auto& b) { return a.arc.start < b.arc.start; });
    for (std::size_t i = 0; i < ivs.size(); ++i) {
        const auto& a = ivs[i];
        const auto& b = ivs[(i + 1) % ivs.size()];
        if (!(a.arc.length() > 0)) defects.push_back("degenerate interval");
        if (a.end_orbit != b.start_orbit || a.arc.end != b.arc.start) defects.push_back("gap or overlap");
    }
    if (abs(p.total_length() - 1) > tol) defects.push_back("total length");
    return defects;
}

/// Delta_i^{(n-1)} = Delta_i^{(n+1)} u U_{s<k_{n+1}} Delta_{i+q_{n-1}+s q_n}^{(n)},
/// checked as an exact chain of shared endpoints for every i < q_n.
template <class Real>
bool refinement_holds(const DynamicalPartition<Real>& pn, const DynamicalPartition<Real>& pn1) {
    if (pn1.level != pn.level + 1 || pn1.q_prev != pn.q_n) return false;
    std::int64_t qn = pn.q_n, qp = pn.q_prev;
    if ((pn1.q_n - qp) % qn != 0) return false;
    std::int64_t k = (pn1.q_n - qp) / qn;
    for (std::int64_t i = 0; i < qn; ++i) {
        const auto& whole = pn.long_intervals[i].arc;
        std::vector<Arc<Real>> parts{pn1.short_intervals[i].arc};
        for (std::int64_t s = 0; s < k; ++s) parts.push_back(pn1.long_intervals[i + qp + s * qn].arc);
        std::sort(parts.begin(), parts.end(), [&](const auto& a, const auto& b) {
            return ccw_length(whole.start, a.start) < ccw_length(whole.start, b.start);
        });
        if (parts.front().start != whole.start || parts.back().end != whole.end) return false;
        for (std::size_t j = 1; j < parts.size(); ++j)
            if (parts[j - 1].end != parts[j].start) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------

/// f^i(arc), i < qn, have pairwise disjoint interiors.
template <class Real>
bool is_qn_small(const CircleMap<Real>& map, const Arc<Real>& arc, std::int64_t qn,
                 std::int64_t budget = kDefaultOrbitBudget) {
    if (qn > budget) fail(ErrorKind::budget_exceeded, "is_qn_small: q_n = " + std::to_string(qn));
    std::vector<Arc<Real>> arcs;
    arcs.reserve(qn);
    Arc<Real> cur{reduce(arc.start), reduce(arc.end)};
    Real total = 0;
    for (std::int64_t i = 0; i < qn; ++i) {
        arcs.push_back(cur);
        total += cur.length();
        cur = {map(cur.start), map(cur.end)};
    }
    if (total > 1) return false;
    std::sort(arcs.begin(), arcs.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    for (std::size_t i = 0; i < arcs.size() && arcs.size() > 1; ++i) {
        const auto& a = arcs[i];
        const auto& b = arcs[(i + 1) % arcs.size()];
        if (ccw_length(a.start, b.start) < a.length()) return false;
    }
    return true;
}

/// tau < t <= f^{q_{n-1}}(tau), or f^{q_{n-1}}(t) <= tau < t, whichever matches
/// the direction in which f^{q_{n-1}} moves points.
template <class Real>
bool is_qn_small_endpoint(const CircleMap<Real>& map, const Arc<Real>& arc, std::int64_t q_prev) {
    Real tau = reduce(arc.start), t = reduce(arc.end);
    if (tau == t) return false;
    Real ftau = iterate(map, tau, q_prev);
    if (ccw_length(tau, ftau) < Real(0.5)) return ccw_length(tau, t) <= ccw_length(tau, ftau);
    Real ft = iterate(map, t, q_prev);
    return ccw_length(ft, tau) < ccw_length(ft, t);
}

// ---------------------------------------------------------------------------

struct DenjoySample {
    double position = 0;
    double log_product = 0;      // sum_{s<q_n} log Df(y_s)
    double log_ratio_min = 0;    // min_k log Df^k(x)/Df^k(y), k <= q_n
    double log_ratio_max = 0;
    double pair_gap = 0;         // y - x along the small arc
};

struct DenjoyReport {
    int level = 0;
    std::int64_t q_n = 0, q_prev = 0;
    double v = 0;
    std::vector<DenjoySample> samples;
    std::int64_t product_violations = 0, ratio_violations = 0, violations = 0;
    std::int64_t collisions = 0;
    double max_abs_log_product = 0, max_abs_log_ratio = 0;
};

/// Samples the bounds e^{-v} <= prod_{s<q_n} Df(y_s) <= e^v and
/// e^{-v} <= Df^k(x)/Df^k(y) <= e^v for x, y in a q_n-small arc, k <= q_n.
/// `v_override` replaces the map's own variation (negative controls).
template <class Real>
DenjoyReport denjoy_report(const CircleMap<Real>& map, Real x0, int n, int samples, std::uint64_t seed,
                           std::optional<double> v_override = std::nullopt) {
    using std::log;
    auto cf = closest_return_quotients(map, x0, n);
    if (static_cast<int>(cf.depth()) < n) fail(ErrorKind::budget_exceeded, "q_n beyond the orbit budget");
    DenjoyReport rep;
    rep.level = n;
    rep.q_n = cf.q[n];
    rep.q_prev = cf.q[n - 1];
    rep.v = v_override ? *v_override : to_double(map.variation_log_df());
    const double tol = 1e-9;
    Rng rng(seed);
    Real guard = 1024 * unit_roundoff<Real>();

    auto hits_break = [&](const Real& y) {
        for (const auto& b : map.breaks())
            if (circular_distance(y, b.location) <= guard) return true;
        return false;
    };

    while (static_cast<int>(rep.samples.size()) < samples) {
        Real x = Real(rng.uniform());
        Real fq = iterate(map, x, rep.q_prev);
        bool ccw = ccw_length(x, fq) < Real(0.5);
        Real span = ccw ? ccw_length(x, fq) : ccw_length(fq, x);
        Real gap = span * Real(rng.uniform(1e-3, 1.0));
        Real y = ccw ? reduce(Real(x + gap)) : reduce(Real(x - gap));

        DenjoySample s;
        s.position = to_double(x);
        s.pair_gap = to_double(gap);
        Real lp = 0, lr = 0;
        Real lr_min = 0, lr_max = 0;
        Real a = x, b = y;
        bool collided = false;
        for (std::int64_t k = 0; k < rep.q_n; ++k) {
            if (hits_break(a) || hits_break(b)) {
                collided = true;
                break;
            }
            Real da = log(map.derivative(a)), db = log(map.derivative(b));
            lp += da;
            lr += da - db;
            lr_min = std::min(lr_min, lr);
            lr_max = std::max(lr_max, lr);
            a = map(a);
            b = map(b);
        }
        if (collided) {
            ++rep.collisions;
            continue;
        }
        s.log_product = to_double(lp);
        s.log_ratio_min = to_double(lr_min);
        s.log_ratio_max = to_double(lr_max);
        bool bad_product = std::abs(s.log_product) > rep.v + tol;
        bool bad_ratio = std::max(-s.log_ratio_min, s.log_ratio_max) > rep.v + tol;
        rep.product_violations += bad_product;
        rep.ratio_violations += bad_ratio;
        rep.violations += (bad_product || bad_ratio);
        rep.max_abs_log_product = std::max(rep.max_abs_log_product, std::abs(s.log_product));
        rep.max_abs_log_ratio = std::max(rep.max_abs_log_ratio, std::max(-s.log_ratio_min, s.log_ratio_max));
        rep.samples.push_back(s);
    }
    return rep;
}

// ---------------------------------------------------------------------------

struct DecayLevel {
    int n = 0;
    std::int64_t q_n = 0;
    double max_len = 0;
    double rate = 0;  // max_len(n) / max_len(n-1)
};

struct DecayReport {
    std::vector<DecayLevel> levels;
    double fitted_rate = 0;
    double lambda_bound = 0;
    double offset = 0;  // smallest n0 with max_len(n) <= lambda^(n - n0) for all listed n
    int fit_from = 0, fit_to = 0;
};

/// Max interval length of eta_n for n = 1..n_max and a geometric fit over
/// [fit_from, n_max] (default: the last half of the levels).
template <class Real>
DecayReport length_decay_fit(const CircleMap<Real>& map, Real x0, int n_max, int fit_from = -1,
                             std::int64_t budget = kDefaultOrbitBudget) {
    using std::exp;
    require(n_max >= 2, "n_max must be >= 2");
    auto cf = closest_return_quotients(map, x0, n_max, budget);
    if (static_cast<int>(cf.depth()) < n_max) fail(ErrorKind::budget_exceeded, "q_n_max beyond the orbit budget");
    auto orbit = forward_orbit(map, x0, cf.q[n_max] + cf.q[n_max - 1], budget);
    DecayReport rep;
    double v = to_double(map.variation_log_df());
    rep.lambda_bound = 1 / std::sqrt(1 + std::exp(-v));
    for (int n = 1; n <= n_max; ++n) {
        auto p = partition_from_orbit(orbit, n, cf.q[n - 1], cf.q[n]);
        DecayLevel lv;
        lv.n = n;
        lv.q_n = cf.q[n];
        lv.max_len = to_double(p.max_length());
        lv.rate = rep.levels.empty() ? 0 : lv.max_len / rep.levels.back().max_len;
        rep.levels.push_back(lv);
    }
    rep.fit_from = fit_from > 0 ? fit_from : std::max(1, n_max / 2);
    rep.fit_to = n_max;
    std::vector<double> xs, ys;
    for (const auto& lv : rep.levels)
        if (lv.n >= rep.fit_from) {
            xs.push_back(lv.n);
            ys.push_back(std::log(lv.max_len));
        }
    rep.fitted_rate = std::exp(least_squares(xs, ys).slope);
    double ll = std::log(rep.lambda_bound);
    rep.offset = -1e300;
    for (const auto& lv : rep.levels) rep.offset = std::max(rep.offset, lv.n - std::log(lv.max_len) / ll);
    return rep;
}

} // namespace breaklab
