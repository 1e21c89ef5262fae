#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "conjugacy.hpp"
#include "crossratio.hpp"
#include "partition.hpp"

namespace breaklab {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// The exact binary value of x.
template <class Real>
Rational exact_rational(const Real& x) {
    if constexpr (is_extended_v<Real>) {
        mpz_t m;
        mpz_init(m);
        mpfr_exp_t e = mpfr_get_z_2exp(m, x.backend().data());
        char* digits = mpz_get_str(nullptr, 10, m);
        BigInt mant(digits);
        void (*freefunc)(void*, size_t);
        mp_get_memory_functions(nullptr, nullptr, &freefunc);
        freefunc(digits, std::strlen(digits) + 1);
        mpz_clear(m);
        if (e >= 0) return Rational(mant << static_cast<unsigned>(e));
        return Rational(mant, BigInt(1) << static_cast<unsigned>(-e));
    } else {
        if (x == 0) return Rational(0);
        int e = 0;
        double m = std::frexp(x, &e);
        auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));
        e -= 53;
        if (e >= 0) return Rational(BigInt(mant) << e);
        return Rational(BigInt(mant), BigInt(1) << (-e));
    }
}

inline BigInt big_pow(int base, int exp) {
    BigInt r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

// ---------------------------------------------------------------------------

/// [x_{q_n}, x_{q_{n-1}}] with coordinate s = distance from x_{q_n} (0 .. d_n).
/// For n odd the arc runs counterclockwise; for n even it is mirrored.
template <class Real>
struct RenormalizationFrame {
    int n = 0;
    std::int64_t q_prev = 0, q_n = 0;
    Real x0, x_qn, x_qprev;
    Real d_n;

    bool odd() const { return n % 2 == 1; }
    Real coord(const Real& y) const { return odd() ? ccw_length(x_qn, y) : ccw_length(y, x_qn); }
    Real point(const Real& s) const { return reduce(odd() ? Real(x_qn + s) : Real(x_qn - s)); }
    bool contains(const Real& y) const { return coord(y) <= d_n; }
};

enum class PreimageSide { toward_qn, toward_qprev };

template <class Real>
struct BreakPreimage {
    Real point;
    BreakSpec<Real> source;
    std::size_t break_index = 0;
    std::int64_t return_time = 0;  // f^return_time(point) = source.location
    PreimageSide side = PreimageSide::toward_qprev;
};

template <class Real>
struct PreimageSet {
    RenormalizationFrame<Real> frame;
    ContinuedFractionData cf;
    std::vector<BreakPreimage<Real>> preimages;
    bool neighborhood_clear = true;  // no break of the map inside the frame itself
};

/// Locates each break b in eta_n(x0): b in Delta_l^{(n-1)} gives a preimage
/// f^{-l}(b) in [x0, x_{q_{n-1}}], b in Delta_l^{(n)} one in [x_{q_n}, x0].
template <class Real>
PreimageSet<Real> qn_preimages(const CircleMap<Real>& map, int n, Real x0, std::int64_t budget = kDefaultOrbitBudget) {
    PreimageSet<Real> ps;
    ps.cf = closest_return_quotients(map, x0, n, budget);
    if (static_cast<int>(ps.cf.depth()) < n) fail(ErrorKind::budget_exceeded, "q_n beyond the orbit budget");
    std::int64_t qp = ps.cf.q[n - 1], qn = ps.cf.q[n];
    auto orbit = forward_orbit(map, x0, qn + qp, budget);
    auto part = partition_from_orbit(orbit, n, qp, qn);
    auto& fr = ps.frame;
    fr.n = n;
    fr.q_prev = qp;
    fr.q_n = qn;
    fr.x0 = orbit[0];
    fr.x_qn = orbit[qn];
    fr.x_qprev = orbit[qp];
    fr.d_n = fr.coord(fr.x_qprev);

    auto ivs = part.all();
    std::sort(ivs.begin(), ivs.end(), [](const auto& a, const auto& b) { return a.arc.start < b.arc.start; });
    const auto& brk = map.breaks();
    for (std::size_t bi = 0; bi < brk.size(); ++bi) {
        const Real& b = brk[bi].location;
        // interval whose start is the last one at or before b, circularly
        auto it = std::upper_bound(ivs.begin(), ivs.end(), b, [](const Real& v, const auto& iv) { return v < iv.arc.start; });
        const auto& iv = it == ivs.begin() ? ivs.back() : *(it - 1);
        BreakPreimage<Real> bp;
        bp.source = brk[bi];
        bp.break_index = bi;
        bp.return_time = iv.index;
        bp.side = iv.level == n ? PreimageSide::toward_qn : PreimageSide::toward_qprev;
        if (bp.return_time == 0) ps.neighborhood_clear = false;
        bp.point = iterate(map, b, -bp.return_time, budget);
        ps.preimages.push_back(bp);
    }
    return ps;
}

// ---------------------------------------------------------------------------

/// The conjugacy as used by the covering construction: a table or a known diffeo.
template <class Real>
struct ConjugacyView {
    std::function<Real(const Real&)> forward, inverse;
    Real x0, t0;
    std::string source;
};

template <class Real>
ConjugacyView<Real> view_of(const ConjugacyApprox<Real>& h) {
    return {[&h](const Real& x) { return h.eval(x); }, [&h](const Real& t) { return h.eval_inverse(t); }, h.x0, h.t0,
            "table"};
}

template <class Real>
ConjugacyView<Real> view_of_diffeo(const CircleMap<Real>& psi, const Real& x0) {
    return {[psi](const Real& x) { return psi(x); }, [psi](const Real& t) { return psi.inverse(t); }, reduce(x0),
            psi(x0), "diffeo"};
}

enum class Provenance { anchor_qn, anchor_x0, anchor_qprev, f1_preimage, f2_pullback };

inline const char* to_string(Provenance p) {
    switch (p) {
    case Provenance::anchor_qn: return "anchor_qn";
    case Provenance::anchor_x0: return "anchor_x0";
    case Provenance::anchor_qprev: return "anchor_qprev";
    case Provenance::f1_preimage: return "f1_preimage";
    case Provenance::f2_pullback: return "f2_pullback";
    }
    return "?";
}

inline bool is_anchor(Provenance p) {
    return p == Provenance::anchor_qn || p == Provenance::anchor_x0 || p == Provenance::anchor_qprev;
}

/// A point of a break set in normalized frame coordinate u in [0, 1].
struct ClusterPoint {
    Rational u;
    Provenance kind = Provenance::f1_preimage;
    double jump = 1;
};

template <class Real>
struct BreakSetElement {
    Provenance kind;
    Real point;  // on circle 1
    Real coord;  // frame coordinate, 0 .. d_n
    Rational u;  // coord / d_n, exact value of the rounded quotient
    std::optional<std::size_t> break_index;
    BreakSpec<Real> source{Real(0), Real(1)};  // the break on its own circle
    std::int64_t return_time = 0;
    Real circle2_point = 0;  // the f2 preimage before pulling back
};

template <class Real>
struct BreakSet {
    RenormalizationFrame<Real> frame, frame2;
    std::vector<BreakSetElement<Real>> elements;  // sorted by u
    int m1 = 0, m2 = 0;
    bool neighborhood_clear = true;

    std::vector<ClusterPoint> cluster_points() const {
        std::vector<ClusterPoint> out;
        for (const auto& e : elements) out.push_back({e.u, e.kind, to_double(e.source.jump)});
        return out;
    }
};

template <class Real>
BreakSet<Real> build_break_set(const CircleMap<Real>& map1, const CircleMap<Real>& map2, const ConjugacyView<Real>& h,
                               int n, std::int64_t budget = kDefaultOrbitBudget) {
    auto p1 = qn_preimages(map1, n, h.x0, budget);
    auto p2 = qn_preimages(map2, n, h.t0, budget);
    if (p1.cf.q != p2.cf.q) fail(ErrorKind::rotation_mismatch, "closest-return times differ between the two maps");
    BreakSet<Real> bs;
    bs.frame = p1.frame;
    bs.frame2 = p2.frame;
    bs.m1 = static_cast<int>(map1.breaks().size());
    bs.m2 = static_cast<int>(map2.breaks().size());
    bs.neighborhood_clear = p1.neighborhood_clear && p2.neighborhood_clear;
    const auto& fr = bs.frame;

    auto add = [&](Provenance kind, const Real& point, Rational u) {
        BreakSetElement<Real> e{kind, point, fr.coord(point), std::move(u), std::nullopt};
        bs.elements.push_back(e);
        return &bs.elements.back();
    };
    add(Provenance::anchor_qn, fr.x_qn, Rational(0));
    add(Provenance::anchor_x0, fr.x0, exact_rational(Real(fr.coord(fr.x0) / fr.d_n)));
    add(Provenance::anchor_qprev, fr.x_qprev, Rational(1));
    auto clamp_u = [&](const Real& point) {
        Real c = fr.coord(point);
        // a pulled-back point can sit a rounding error outside the frame
        if (c > fr.d_n) c = Real(1) - c < fr.d_n / 2 ? Real(0) : fr.d_n;
        return exact_rational(Real(c / fr.d_n));
    };
    for (const auto& bp : p1.preimages) {
        auto* e = add(Provenance::f1_preimage, bp.point, clamp_u(bp.point));
        e->break_index = bp.break_index;
        e->source = bp.source;
        e->return_time = bp.return_time;
    }
    for (const auto& bp : p2.preimages) {
        Real back = h.inverse(bp.point);
        auto* e = add(Provenance::f2_pullback, back, clamp_u(back));
        e->break_index = bp.break_index;
        e->source = bp.source;
        e->return_time = bp.return_time;
        e->circle2_point = bp.point;
    }
    for (auto& e : bs.elements) e.coord = fr.coord(e.point);
    std::stable_sort(bs.elements.begin(), bs.elements.end(), [](const auto& a, const auto& b) { return a.u < b.u; });
    return bs;
}

// ---------------------------------------------------------------------------

struct Cluster {
    std::vector<std::size_t> members;  // indices into the point list
    BigInt first_cell, last_cell;
    bool has_qn = false, has_x0 = false, has_qprev = false;
    double product1 = 1, product2 = 1;  // jump products of f1 preimages and f2 pullbacks

    bool has_anchor() const { return has_qn || has_x0 || has_qprev; }
    bool has_break() const { return product_terms > 0; }
    bool coinciding() const { return std::abs(product1 - product2) <= 1e-12 * std::max(product1, product2); }
    int product_terms = 0;
};

struct Gap {
    BigInt first_cell, last_cell;  // empty cells between two clusters
};

/// Cells of D_l: [s m0^-(l+1), (s+1) m0^-(l+1)) in u, s < m0^(l+1); u = 1 goes to the last cell.
struct GridClusters {
    int level = 0;
    int m0 = 0;
    BigInt cells;
    Rational cell_length;
    std::vector<BigInt> occupied;   // sorted, unique
    std::vector<BigInt> point_cell; // per input point
    std::vector<Cluster> clusters;
    std::vector<Gap> gaps;
};

inline BigInt cell_of(const Rational& u, const BigInt& cells) {
    BigInt num = boost::multiprecision::numerator(u) * cells;
    BigInt den = boost::multiprecision::denominator(u);
    BigInt c = num / den;  // u >= 0, so truncation is floor
    if (c >= cells) c = cells - 1;
    return c;
}

inline GridClusters cluster_points(const std::vector<ClusterPoint>& pts, int m0, int l) {
    require(m0 >= 2 && l >= 0, "grid needs m0 >= 2 and l >= 0");
    GridClusters g;
    g.level = l;
    g.m0 = m0;
    g.cells = big_pow(m0, l + 1);
    g.cell_length = Rational(BigInt(1), g.cells);
    std::vector<std::size_t> order(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        require(pts[i].u >= 0 && pts[i].u <= 1, "cluster point outside [0, 1]");
        order[i] = i;
        g.point_cell.push_back(cell_of(pts[i].u, g.cells));
    }
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pts[a].u < pts[b].u; });
    for (auto i : order)
        if (g.occupied.empty() || g.occupied.back() != g.point_cell[i]) g.occupied.push_back(g.point_cell[i]);
    for (auto i : order) {
        const BigInt& c = g.point_cell[i];
        if (g.clusters.empty() || c > g.clusters.back().last_cell + 1) {
            if (!g.clusters.empty()) g.gaps.push_back({g.clusters.back().last_cell + 1, c - 1});
            Cluster cl;
            cl.first_cell = c;
            cl.last_cell = c;
            g.clusters.push_back(cl);
        }
        auto& cl = g.clusters.back();
        cl.last_cell = c;
        cl.members.push_back(i);
        switch (pts[i].kind) {
        case Provenance::anchor_qn: cl.has_qn = true; break;
        case Provenance::anchor_x0: cl.has_x0 = true; break;
        case Provenance::anchor_qprev: cl.has_qprev = true; break;
        case Provenance::f1_preimage: cl.product1 *= pts[i].jump; ++cl.product_terms; break;
        case Provenance::f2_pullback: cl.product2 *= pts[i].jump; ++cl.product_terms; break;
        }
    }
    return g;
}

template <class Real>
GridClusters grid_clusters(const BreakSet<Real>& bs, int m0, int l) {
    return cluster_points(bs.cluster_points(), m0, l);
}

/// m0 = max{m1 + m2 + 4, [M/zeta] + 1, [e^v1] + 1, [e^v2] + 1}.
inline int compute_m0(int m1, int m2, double M, double zeta, double v1, double v2) {
    int a = m1 + m2 + 4;
    int b = static_cast<int>(std::floor(M / zeta)) + 1;
    int c = static_cast<int>(std::floor(std::exp(v1))) + 1;
    int d = static_cast<int>(std::floor(std::exp(v2))) + 1;
    return std::max({a, b, c, d});
}

/// K = max{m0 e^{2(v1+v2)}, m0^{9(m1+m2)+16}}, as a double.
inline double compute_K(int m0, int m1, int m2, double v1, double v2) {
    return std::max(m0 * std::exp(2 * (v1 + v2)), std::pow(double(m0), 9.0 * (m1 + m2) + 16));
}

struct ClusterSearch {
    int s0 = -1;
    int r = 0;
    std::vector<int> scanned_levels;
    std::vector<std::size_t> cluster_counts;
    GridClusters at_s0, at_s0_plus_r;
    // every cluster has diameter <= 2 m0^-(s0+r)
    bool diameter_ok = false;
    Rational max_diameter;
    // consecutive clusters are at least one level-s0 cell apart, m0^-(s0+1)
    bool separation_ok = false;
    Rational min_gap;
    bool separation_literal = false;  // min_gap >= m0^-s0, one full cell
    std::optional<std::size_t> selected;  // cluster index at s0
    bool contradiction = false;           // every cluster has coinciding products
};

/// Scans l = 0, r, 2r, ... for the first |Gamma_l| = |Gamma_{l+r}| and checks cluster diameters and separation
/// exactly. Selection prefers the leftmost anchor-free cluster with differing
/// products, then the leftmost differing cluster with anchors.
inline ClusterSearch stable_cluster_search(const std::vector<ClusterPoint>& pts, int m0, int r, int m_total) {
    require(r >= 1, "r must be >= 1");
    require(static_cast<int>(pts.size()) + 1 <= m0, "m0 must exceed the break-set size");
    ClusterSearch res;
    res.r = r;
    int limit = r * (m_total + 1);
    for (int l = 0; l <= limit; l += r) {
        auto a = cluster_points(pts, m0, l);
        auto b = cluster_points(pts, m0, l + r);
        res.scanned_levels.push_back(l);
        res.cluster_counts.push_back(a.clusters.size());
        if (a.clusters.size() == b.clusters.size()) {
            res.s0 = l;
            res.at_s0 = std::move(a);
            res.at_s0_plus_r = std::move(b);
            break;
        }
    }
    if (res.s0 < 0) fail(ErrorKind::invalid_argument, "no s0 found within r(m1+m2+1); break set larger than m1+m2+3?");

    Rational bound1(BigInt(2), big_pow(m0, res.s0 + r));
    Rational bound2(BigInt(1), big_pow(m0, res.s0 + 1));
    Rational literal(BigInt(1), big_pow(m0, res.s0));
    res.diameter_ok = true;
    res.max_diameter = 0;
    const auto& cls = res.at_s0.clusters;
    for (const auto& c : cls) {
        Rational lo = pts[c.members.front()].u, hi = lo;
        for (auto i : c.members) {
            lo = std::min(lo, pts[i].u);
            hi = std::max(hi, pts[i].u);
        }
        res.max_diameter = std::max(res.max_diameter, Rational(hi - lo));
        if (hi - lo > bound1) res.diameter_ok = false;
    }
    res.min_gap = 1;
    for (std::size_t k = 1; k < cls.size(); ++k) {
        Rational prev_hi = 0, next_lo = 1;
        for (auto i : cls[k - 1].members) prev_hi = std::max(prev_hi, pts[i].u);
        for (auto i : cls[k].members) next_lo = std::min(next_lo, pts[i].u);
        res.min_gap = std::min(res.min_gap, Rational(next_lo - prev_hi));
    }
    res.separation_ok = res.min_gap >= bound2;
    res.separation_literal = res.min_gap >= literal;

    for (std::size_t k = 0; k < cls.size() && !res.selected; ++k)
        if (!cls[k].has_anchor() && cls[k].has_break() && !cls[k].coinciding()) res.selected = k;
    for (std::size_t k = 0; k < cls.size() && !res.selected; ++k)
        if (cls[k].has_break() && !cls[k].coinciding()) res.selected = k;
    res.contradiction = !res.selected.has_value();
    return res;
}

template <class Real>
ClusterSearch stable_cluster_search(const BreakSet<Real>& bs, int m0, int r) {
    return stable_cluster_search(bs.cluster_points(), m0, r, bs.m1 + bs.m2);
}

// ---------------------------------------------------------------------------

struct CoverConstants {
    double M = 2;
    double zeta = 0.5;
    double delta = 0.1;
    int r = 9;
    int m0_override = 0;  // used when larger than the formula value
};

enum class CoverCase { c1, c2, c3 };

inline const char* to_string(CoverCase c) {
    switch (c) {
    case CoverCase::c1: return "c1";
    case CoverCase::c2: return "c2";
    case CoverCase::c3: return "c3";
    }
    return "?";
}

/// The six regular-cover conditions on one circle, with the measured quantities behind each condition.
struct CoverSideCheck {
    bool applicable = false;
    bool cond[6] = {false, false, false, false, false, false};
    bool inside_delta = false;
    std::vector<std::int64_t> coverage_counts;  // per covered break, over j < r_n
    std::vector<std::int64_t> coverage_times;
    bool disjoint_iterates = false;
    double ratio_23_12 = 0, ratio_23_34 = 0;
    double image_spread = 0;  // max/min of the three image lengths
    double cond5_ratio = 0;   // max distance to the base over l([z1,z2])
    double cond6_max = 0;     // max l([b, z2]) / l([z1, z2])

    bool ok() const { return !applicable || (cond[0] && cond[1] && cond[2] && cond[3] && cond[4] && cond[5]); }
};

template <class Real>
struct CoverReport {
    int n = 0;
    CoverCase cover_case = CoverCase::c1;
    int s0 = 0, m0 = 0;
    double K = 0;
    std::int64_t r_n = 0;
    std::int64_t q_n = 0, q_prev = 0;
    Real d_n;
    std::array<Real, 4> z;   // circle 1
    std::array<Real, 4> hz;  // circle 2
    std::vector<BreakSpec<Real>> covered1, covered2;  // B-hat_1, B-hat_2
    double sigma1 = 1, sigma2 = 1;
    bool products_coincide = false;  // control pairs: cover built from a coinciding cluster
    bool m0_power_check = false;     // m0^(s0+9) - 1 > e^v1
    ClusterSearch search;
    std::size_t break_set_size = 0;
    CoverSideCheck side1, side2;

    bool ok() const { return side1.ok() && side2.ok(); }
};

namespace detail {

template <class Real>
Real arc_len(const Real& a, const Real& b) {
    return ccw_length(a, b);
}

/// z given in circle order; checks the cover conditions for `map` with base point `base`.
template <class Real>
CoverSideCheck check_cover_side(const CircleMap<Real>& map, const std::array<Real, 4>& z, const Real& base,
                                const std::vector<BreakSpec<Real>>& covered, std::int64_t r_n, double K, double M,
                                double delta, double zeta) {
    CoverSideCheck c;
    c.applicable = !covered.empty();
    Real l12 = ccw_length(z[0], z[1]), l23 = ccw_length(z[1], z[2]), l34 = ccw_length(z[2], z[3]);
    Real lo_edge = reduce(Real(base - Real(delta)));
    c.inside_delta = ccw_length(lo_edge, z[0]) < ccw_length(lo_edge, z[3]) && ccw_length(lo_edge, z[3]) < Real(2 * delta);

    // iterate the four points, recording which break each f^j([z1, z4]) covers
    std::array<Real, 4> cur = z;
    c.coverage_counts.assign(covered.size(), 0);
    c.coverage_times.assign(covered.size(), -1);
    std::vector<Arc<Real>> arcs;
    arcs.reserve(r_n);
    bool in12 = true;
    std::vector<double> cond6(covered.size(), 0);
    for (std::int64_t j = 0; j < r_n; ++j) {
        Arc<Real> whole{cur[0], cur[3]}, left{cur[0], cur[1]};
        arcs.push_back(whole);
        for (std::size_t b = 0; b < covered.size(); ++b) {
            if (whole.contains(covered[b].location)) {
                ++c.coverage_counts[b];
                c.coverage_times[b] = j;
                if (!left.contains(covered[b].location)) in12 = false;
            }
        }
        for (auto& p : cur) p = map(p);
    }
    // preimage positions inside [z1, z2]
    for (std::size_t b = 0; b < covered.size(); ++b) {
        if (c.coverage_times[b] < 0) continue;
        Real pre = iterate(map, covered[b].location, -c.coverage_times[b]);
        cond6[b] = to_double(Real(ccw_length(pre, z[1]) / l12));
        if (ccw_length(pre, z[1]) > l12) cond6[b] = 1e300;
    }
    std::sort(arcs.begin(), arcs.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    c.disjoint_iterates = true;
    for (std::size_t i = 0; i + 1 < arcs.size() || (arcs.size() > 1 && i + 1 == arcs.size()); ++i) {
        const auto& a = arcs[i];
        const auto& b = arcs[(i + 1) % arcs.size()];
        if (ccw_length(a.start, b.start) < a.length()) c.disjoint_iterates = false;
        if (i + 1 == arcs.size()) break;
    }

    bool once = std::all_of(c.coverage_counts.begin(), c.coverage_counts.end(), [](auto k) { return k == 1; });
    c.cond[0] = c.inside_delta && once;
    c.cond[1] = once && in12;

    c.ratio_23_12 = to_double(Real(l23 / l12));
    c.ratio_23_34 = to_double(Real(l23 / l34));
    c.cond[2] = M <= c.ratio_23_12 && c.ratio_23_12 <= K && 1 / K <= c.ratio_23_34 && c.ratio_23_34 <= K;

    double img[3] = {to_double(ccw_length(cur[0], cur[1])), to_double(ccw_length(cur[1], cur[2])),
                     to_double(ccw_length(cur[2], cur[3]))};
    c.image_spread = *std::max_element(img, img + 3) / *std::min_element(img, img + 3);
    c.cond[3] = c.image_spread <= K;

    Real far = 0;
    for (int i = 0; i < 4; ++i) far = std::max({far, circular_distance(cur[i], base), circular_distance(z[i], base)});
    c.cond5_ratio = to_double(Real(far / l12));
    c.cond[4] = c.cond5_ratio <= K;

    c.cond6_max = cond6.empty() ? 0 : *std::max_element(cond6.begin(), cond6.end());
    c.cond[5] = c.cond6_max < zeta;
    return c;
}

} // namespace detail

/// Builds the cover for odd n from the stable cluster and verifies it on both circles.
template <class Real>
CoverReport<Real> regular_cover(const CircleMap<Real>& map1, const CircleMap<Real>& map2, const ConjugacyView<Real>& h,
                                int n, const CoverConstants& k = {}, std::int64_t budget = kDefaultOrbitBudget) {
    using std::exp;
    require(n >= 1 && n % 2 == 1, "regular covers are built for odd n");
    auto bs = build_break_set(map1, map2, h, n, budget);
    const auto& fr = bs.frame;
    double v1 = to_double(map1.variation_log_df()), v2 = to_double(map2.variation_log_df());

    CoverReport<Real> rep;
    rep.n = n;
    rep.q_n = fr.q_n;
    rep.q_prev = fr.q_prev;
    rep.d_n = fr.d_n;
    rep.break_set_size = bs.elements.size();
    rep.m0 = std::max(compute_m0(bs.m1, bs.m2, k.M, k.zeta, v1, v2), k.m0_override);
    rep.K = compute_K(rep.m0, bs.m1, bs.m2, v1, v2);
    auto pts = bs.cluster_points();
    rep.search = stable_cluster_search(pts, rep.m0, k.r, bs.m1 + bs.m2);
    rep.s0 = rep.search.s0;
    rep.m0_power_check = std::pow(double(rep.m0), rep.s0 + 9) - 1 > std::exp(v1);
    if (!rep.m0_power_check) fail(ErrorKind::invalid_argument, "m0^(s0+9) - 1 <= e^v1");

    const auto& cls = rep.search.at_s0.clusters;
    std::size_t sel;
    if (rep.search.selected) {
        sel = *rep.search.selected;
    } else {
        // coinciding products everywhere: cover the leftmost cluster holding a break anyway
        auto it = std::find_if(cls.begin(), cls.end(), [](const Cluster& c) { return c.has_break(); });
        if (it == cls.end()) fail(ErrorKind::invalid_argument, "neither map has a break to cover");
        sel = it - cls.begin();
        rep.products_coincide = true;
    }
    auto cluster_of = [&](Provenance anchor) {
        for (std::size_t i = 0; i < cls.size(); ++i)
            for (auto m : cls[i].members)
                if (pts[m].kind == anchor) return i;
        return cls.size();
    };
    std::size_t c_qn = cluster_of(Provenance::anchor_qn), c_x0 = cluster_of(Provenance::anchor_x0),
                c_qp = cluster_of(Provenance::anchor_qprev);
    if (c_x0 == c_qp) fail(ErrorKind::invalid_argument, "x0 and x_{q_{n-1}} share a cluster");

    const Real d = fr.d_n;
    auto step = [&](int e) { return Real(d / pow(Real(rep.m0), e)); };
    std::vector<std::size_t> used;  // clusters whose breaks are covered
    // (point on circle 1, transformed by f1^shift) -> frame coordinate
    auto coord_after = [&](const BreakSetElement<Real>& e, std::int64_t shift) {
        return fr.coord(iterate(map1, e.point, shift, budget));
    };
    Real z2c;
    std::vector<std::pair<std::size_t, std::int64_t>> members;  // element index and applied shift

    if (!cls[sel].has_anchor()) {
        rep.cover_case = CoverCase::c1;
        used = {sel};
        for (auto m : cls[sel].members) members.push_back({m, 0});
        rep.r_n = fr.q_n;
    } else if (c_qn != c_x0) {
        rep.cover_case = CoverCase::c2;
        used = {c_qn, c_x0, c_qp};
        for (auto m : cls[c_qn].members) members.push_back({m, -fr.q_n});
        for (auto m : cls[c_x0].members) members.push_back({m, 0});
        for (auto m : cls[c_qp].members) members.push_back({m, -fr.q_prev});
        rep.r_n = fr.q_n + fr.q_prev;
    } else {
        rep.cover_case = CoverCase::c3;
        used = {c_x0, c_qp};
        std::int64_t window = fr.q_n - fr.q_prev;
        for (auto m : cls[c_x0].members) members.push_back({m, 0});
        for (auto m : cls[c_qp].members) {
            const auto& e = bs.elements[m];
            if (e.kind == Provenance::anchor_qprev) continue;
            members.push_back({m, e.return_time >= window ? window : -fr.q_prev});
        }
        rep.r_n = fr.q_n;
    }
    z2c = Real(0);
    bool first = true;
    for (auto [m, shift] : members) {
        Real c = shift == 0 ? bs.elements[m].coord : coord_after(bs.elements[m], shift);
        if (first || c > z2c) z2c = c;
        first = false;
    }
    std::array<Real, 4> zc;
    int s0 = rep.s0;
    switch (rep.cover_case) {
    case CoverCase::c1:
        zc = {z2c - step(s0 + 7), z2c, z2c + step(s0 + 6), z2c + step(s0 + 6) + step(s0 + 7)};
        break;
    case CoverCase::c2:
        zc = {z2c - step(s0 + 6), z2c, z2c + step(s0 + 3), z2c + step(s0 + 3) + step(s0 + 6)};
        break;
    case CoverCase::c3:
        zc = {z2c - 2 * step(s0 + 6), z2c, z2c + 2 * step(s0 + 4), z2c + 2 * step(s0 + 4) + 2 * step(s0 + 6)};
        break;
    }
    // frame coordinates run clockwise for even n; only odd n reaches here
    for (int i = 0; i < 4; ++i) {
        rep.z[i] = fr.point(zc[i]);
        rep.hz[i] = h.forward(rep.z[i]);
    }
    for (auto ci : used) {
        for (auto m : cls[ci].members) {
            const auto& e = bs.elements[m];
            if (e.kind == Provenance::f1_preimage) {
                rep.covered1.push_back(e.source);
                rep.sigma1 *= to_double(e.source.jump);
            } else if (e.kind == Provenance::f2_pullback) {
                rep.covered2.push_back(e.source);
                rep.sigma2 *= to_double(e.source.jump);
            }
        }
    }
    rep.side1 = detail::check_cover_side(map1, rep.z, h.x0, rep.covered1, rep.r_n, rep.K, k.M, k.delta, k.zeta);
    rep.side2 = detail::check_cover_side(map2, rep.hz, h.t0, rep.covered2, rep.r_n, rep.K, k.M, k.delta, k.zeta);
    return rep;
}

// ---------------------------------------------------------------------------

struct GapReport {
    double dist1 = 0, dist2 = 0;
    double gap = 0;  // |dist1 / dist2 - 1|
    double sigma1 = 1, sigma2 = 1;
    double lambda_hat = 0;
    double gap_bound = 0;
};

/// min{|4(s1 - s2) - 2L| / (4 s2 + L), |4(s1 - s2) + 2L| / (4 s2 - L)}.
inline double gap_bound(double sigma1, double sigma2) {
    double L = std::min({sigma1, sigma2, std::abs(sigma1 - sigma2)});
    if (L <= 0) return 0;
    double a = std::abs(4 * (sigma1 - sigma2) - 2 * L) / (4 * sigma2 + L);
    double b = std::abs(4 * (sigma1 - sigma2) + 2 * L) / (4 * sigma2 - L);
    return std::min(a, b);
}

template <class Real>
GapReport distortion_gap_experiment(const CircleMap<Real>& map1, const CircleMap<Real>& map2,
                                    const CoverReport<Real>& cover) {
    GapReport g;
    auto q1 = lift_quadruple(cover.z[0], cover.z[1], cover.z[2], cover.z[3]);
    auto q2 = lift_quadruple(cover.hz[0], cover.hz[1], cover.hz[2], cover.hz[3]);
    Real d1 = distortion(q1, map1, cover.r_n).dist;
    Real d2 = distortion(q2, map2, cover.r_n).dist;
    g.dist1 = to_double(d1);
    g.dist2 = to_double(d2);
    g.gap = std::abs(to_double(Real(d1 / d2 - 1)));
    g.sigma1 = cover.sigma1;
    g.sigma2 = cover.sigma2;
    g.lambda_hat = std::min({g.sigma1, g.sigma2, std::abs(g.sigma1 - g.sigma2)});
    g.gap_bound = gap_bound(g.sigma1, g.sigma2);
    return g;
}

} // namespace breaklab
