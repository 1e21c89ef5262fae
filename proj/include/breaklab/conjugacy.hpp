#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "partition.hpp"
#include "random.hpp"
#include "rotation.hpp"
#include "stats.hpp"

namespace breaklab {

/// Orbit-matched table x_i = f1^i(x0) -> t_i = f2^i(t0), i < N, kept in
/// circular order of x starting at x0. Offsets u = x - x0, w = t - t0 (mod 1)
/// increase together along the table.
template <class Real>
struct ConjugacyApprox {
    Real x0, t0;
    std::int64_t count = 0;
    std::vector<Real> x, t;  // raw orbit points in table order
    std::vector<Real> u, w;  // offsets from the base points
    std::vector<std::int64_t> index;  // orbit index of each table row
    Real max_x_gap = 0, max_t_gap = 0;

    Real eval(const Real& query) const { return interpolate(u, w, x, t, x0, t0, query); }
    Real eval_inverse(const Real& query) const { return interpolate(w, u, t, x, t0, x0, query); }

private:
    static Real interpolate(const std::vector<Real>& from, const std::vector<Real>& to, const std::vector<Real>& from_raw,
                            const std::vector<Real>& to_raw, const Real& from_base, const Real& to_base,
                            const Real& query) {
        Real q = reduce(query);
        Real off = ccw_length(from_base, q);
        std::size_t k = std::upper_bound(from.begin(), from.end(), off) - from.begin() - 1;
        if (off == from[k] && q == from_raw[k]) return to_raw[k];
        Real f0 = from[k], t0v = to[k];
        Real f1 = k + 1 < from.size() ? from[k + 1] : Real(1);
        Real t1 = k + 1 < to.size() ? to[k + 1] : Real(1);
        Real frac = (off - f0) / (f1 - f0);
        return reduce(Real(to_base + t0v + frac * (t1 - t0v)));
    }
};

struct ConjugacyOptions {
    bool check_rotation = true;
    std::int64_t budget = kDefaultOrbitBudget;
};

/// Table from two orbit segments of equal length, xs[i] = f1^i(x0), ts[i] = f2^i(t0).
template <class Real>
ConjugacyApprox<Real> conjugacy_from_orbits(const std::vector<Real>& xs, const std::vector<Real>& ts) {
    require(xs.size() == ts.size() && xs.size() >= 2, "orbit segments must have equal length >= 2");
    const auto N = static_cast<std::int64_t>(xs.size());
    ConjugacyApprox<Real> h;
    h.x0 = reduce(xs[0]);
    h.t0 = reduce(ts[0]);
    h.count = N;
    std::vector<Real> us(N), ws(N);
    for (std::int64_t i = 0; i < N; ++i) {
        us[i] = ccw_length(h.x0, xs[i]);
        ws[i] = ccw_length(h.t0, ts[i]);
    }
    std::vector<std::int64_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return us[a] < us[b]; });
    h.x.reserve(N);
    for (std::int64_t k = 0; k < N; ++k) {
        auto i = order[k];
        if (k > 0) {
            auto j = order[k - 1];
            if (!(us[i] > us[j]))
                fail(ErrorKind::rational_rotation, "orbit of x0 repeats a point at index " + std::to_string(i));
            if (!(ws[i] > ws[j]))
                fail(ErrorKind::precision_exhausted, "orbit orders disagree between indices " + std::to_string(j) +
                                                         " and " + std::to_string(i) + "; raise precision_bits");
            h.max_x_gap = std::max(h.max_x_gap, Real(us[i] - us[j]));
            h.max_t_gap = std::max(h.max_t_gap, Real(ws[i] - ws[j]));
        }
        h.x.push_back(xs[i]);
        h.t.push_back(ts[i]);
        h.u.push_back(us[i]);
        h.w.push_back(ws[i]);
        h.index.push_back(i);
    }
    h.max_x_gap = std::max(h.max_x_gap, Real(1 - h.u.back()));
    h.max_t_gap = std::max(h.max_t_gap, Real(1 - h.w.back()));
    return h;
}

template <class Real>
void check_same_rotation(const CircleMap<Real>& map1, const CircleMap<Real>& map2, const Real& x0, const Real& t0,
                         std::int64_t budget) {
    auto r1 = rotation_number(map1, budget, x0);
    auto r2 = rotation_number(map2, budget, t0);
    if (r1.upper < r2.lower || r2.upper < r1.lower)
        fail(ErrorKind::rotation_mismatch, "rho1 in [" + format_real(r1.lower) + ", " + format_real(r1.upper) +
                                               "], rho2 in [" + format_real(r2.lower) + ", " + format_real(r2.upper) +
                                               "]");
}

template <class Real>
ConjugacyApprox<Real> build_conjugacy(const CircleMap<Real>& map1, const CircleMap<Real>& map2, Real x0, Real t0,
                                      std::int64_t N, const ConjugacyOptions& opt = {}) {
    require(N >= 2, "conjugacy table needs N >= 2");
    if (N > opt.budget) fail(ErrorKind::budget_exceeded, "table size beyond the orbit budget");
    if (opt.check_rotation) check_same_rotation(map1, map2, x0, t0, N);
    return conjugacy_from_orbits(forward_orbit(map1, reduce(x0), N, opt.budget),
                                 forward_orbit(map2, reduce(t0), N, opt.budget));
}

template <class Real>
Real eval_h(const ConjugacyApprox<Real>& h, const Real& x) {
    return h.eval(x);
}

/// max over random x of d(h(f1 x), f2(h x)).
template <class Real>
Real equivariance_residual(const ConjugacyApprox<Real>& h, const CircleMap<Real>& map1, const CircleMap<Real>& map2,
                           int samples, std::uint64_t seed) {
    Rng rng(seed);
    Real worst = 0;
    for (int s = 0; s < samples; ++s) {
        Real x = Real(rng.uniform());
        worst = std::max(worst, circular_distance(h.eval(map1(x)), map2(h.eval(x))));
    }
    return worst;
}

/// sup over table nodes of d(t_i, psi(x_i)).
template <class Real>
Real smooth_oracle_compare(const ConjugacyApprox<Real>& h, const CircleMap<Real>& psi) {
    Real worst = 0;
    for (std::size_t i = 0; i < h.x.size(); ++i) worst = std::max(worst, circular_distance(h.t[i], psi(h.x[i])));
    return worst;
}

// ---------------------------------------------------------------------------

struct SlopeHistogram {
    double lo = -8, hi = 4, width = 0.25;  // log10 slope bins; first and last bins also take overflow
    std::vector<std::int64_t> counts;

    std::size_t bins() const { return static_cast<std::size_t>(std::lround((hi - lo) / width)); }
    double edge(std::size_t i) const { return lo + width * i; }

    void add(double log10_slope) {
        if (counts.empty()) counts.assign(bins(), 0);
        auto i = static_cast<std::int64_t>(std::floor((log10_slope - lo) / width));
        i = std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(bins()) - 1);
        ++counts[i];
    }
};

struct SingularityLevel {
    int k = 0;
    std::int64_t cells = 0;
    double points_per_cell = 0;
    bool density_ok = false;
    double median_log10_slope = 0;
    double min_slope = 0, max_slope = 0;
    double mass_capture = 0;  // m(k, delta)
    SlopeHistogram histogram;
};

struct SingularityReport {
    double delta = 0.1;
    std::vector<SingularityLevel> levels;
    double equivariance_residual = -1;  // filled by callers that have both maps

    const SingularityLevel& at(int k) const {
        for (const auto& lv : levels)
            if (lv.k == k) return lv;
        fail(ErrorKind::invalid_argument, "no singularity level " + std::to_string(k));
    }
};

/// h-increments of dyadic cells 2^-k, their slope statistics, and the
/// Lebesgue measure m(k, delta) of the fewest cells holding 1 - delta of the mass.
template <class Real>
SingularityLevel singularity_level(const ConjugacyApprox<Real>& h, int k, double delta) {
    SingularityLevel lv;
    lv.k = k;
    lv.cells = std::int64_t(1) << k;
    lv.points_per_cell = double(h.count) / double(lv.cells);
    lv.density_ok = lv.points_per_cell >= 4;
    std::vector<Real> hv(lv.cells);
    for (std::int64_t j = 0; j < lv.cells; ++j) hv[j] = h.eval(Real(j) / Real(lv.cells));
    std::vector<double> inc(lv.cells), logs(lv.cells);
    double total = 0;
    for (std::int64_t j = 0; j < lv.cells; ++j) {
        inc[j] = to_double(ccw_length(hv[j], hv[(j + 1) % lv.cells]));
        total += inc[j];
    }
    lv.min_slope = 1e300;
    lv.max_slope = 0;
    for (std::int64_t j = 0; j < lv.cells; ++j) {
        double slope = inc[j] * double(lv.cells);
        lv.min_slope = std::min(lv.min_slope, slope);
        lv.max_slope = std::max(lv.max_slope, slope);
        logs[j] = std::log10(std::max(slope, 1e-300));
        lv.histogram.add(logs[j]);
    }
    lv.median_log10_slope = median(logs);
    std::sort(inc.begin(), inc.end(), std::greater<>());
    double acc = 0;
    std::int64_t used = 0;
    while (used < lv.cells && acc < (1 - delta) * total) acc += inc[used++];
    lv.mass_capture = double(used) / double(lv.cells);
    return lv;
}

template <class Real>
SingularityReport singularity_report(const ConjugacyApprox<Real>& h, int k_lo, int k_hi, double delta = 0.1) {
    require(k_lo >= 1 && k_hi >= k_lo && k_hi <= 26, "dyadic levels must satisfy 1 <= k_lo <= k_hi <= 26");
    require(delta > 0 && delta < 1, "delta must lie in (0, 1)");
    SingularityReport rep;
    rep.delta = delta;
    for (int k = k_lo; k <= k_hi; ++k) rep.levels.push_back(singularity_level(h, k, delta));
    return rep;
}

} // namespace breaklab
