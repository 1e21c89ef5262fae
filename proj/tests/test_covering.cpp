#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "breaklab/covering.hpp"
#include "breaklab/random.hpp"

using namespace breaklab;

namespace {

/// Tuned in double; the shift is reused at higher precision.
template <class Real>
CircleMap<Real> golden_tuned(const std::vector<std::pair<double, double>>& breaks) {
    std::vector<BreakSpec<double>> bd;
    std::vector<BreakSpec<Real>> br;
    for (auto [loc, jump] : breaks) {
        bd.push_back({loc, jump});
        br.push_back({Real(loc), Real(jump)});
    }
    auto fam = make_piecewise_mobius<double>(bd, 0.0);
    double shift = tune_parameter(fam, golden_mean<double>(), 1e-13).shift;
    return make_piecewise_mobius<Real>(br, Real(shift));
}

const CircleMap<double>& one_break() {
    static const auto f = golden_tuned<double>({{0.5, 2.0}});
    return f;
}

const CircleMap<double>& two_break() {
    static const auto f = golden_tuned<double>({{0.2, 2.0}, {0.6, 0.5}});
    return f;
}

Rational rat(long a, long b) { return Rational(BigInt(a), BigInt(b)); }

ClusterPoint anchor(Provenance k, Rational u) { return {std::move(u), k, 1.0}; }

/// Anchors at 0, u_x0 and 1 plus m1 + m2 break points, with random near-coincidences.
std::vector<ClusterPoint> synthetic_set(Rng& rng, int m1, int m2, int m0) {
    std::vector<ClusterPoint> pts;
    const long den = 1L << 40;
    auto random_u = [&](const std::vector<ClusterPoint>& near) {
        if (!near.empty() && rng.uniform() < 0.5) {
            // put it close to an existing point at a random scale
            const auto& p = near[rng.below(near.size())];
            int e = 1 + static_cast<int>(rng.below(12));
            Rational off(BigInt(1 + rng.below(m0 - 1)), big_pow(m0, e));
            Rational u = rng.uniform() < 0.5 ? Rational(p.u + off) : Rational(p.u - off);
            return std::clamp(u, Rational(0), Rational(1));
        }
        return rat(static_cast<long>(rng.uniform() * den), den);
    };
    pts.push_back(anchor(Provenance::anchor_qn, 0));
    pts.push_back(anchor(Provenance::anchor_qprev, 1));
    pts.push_back(anchor(Provenance::anchor_x0, random_u(pts)));
    for (int i = 0; i < m1; ++i) pts.push_back({random_u(pts), Provenance::f1_preimage, rng.uniform(0.2, 5.0)});
    for (int i = 0; i < m2; ++i) pts.push_back({random_u(pts), Provenance::f2_pullback, rng.uniform(0.2, 5.0)});
    return pts;
}

} // namespace

TEST(ExactRational, DoubleValues) {
    EXPECT_EQ(exact_rational(0.375), rat(3, 8));
    EXPECT_EQ(exact_rational(0.0), Rational(0));
    Rational tenth = exact_rational(0.1);
    EXPECT_EQ(denominator(tenth), big_pow(2, 55));
    EXPECT_EQ(tenth.convert_to<double>(), 0.1);
}

TEST(ExactRational, ExtendedValues) {
    PrecisionScope ps(256);
    ExtendedReal third = ExtendedReal(1) / 3;
    Rational r = exact_rational(third);
    BigInt den = denominator(r);
    EXPECT_EQ(den & (den - 1), 0);  // a power of two
    Rational err = r - rat(1, 3);
    if (err < 0) err = -err;
    EXPECT_LT(err, Rational(BigInt(1), big_pow(2, 250)));
}

TEST(Grid, CellBoundariesGoRight) {
    BigInt cells = big_pow(7, 2);
    EXPECT_EQ(big_pow(7, 2), 49);
    EXPECT_EQ(cell_of(rat(1, 49), cells), 1);
    EXPECT_EQ(cell_of(rat(1, 7), cells), 7);
    EXPECT_EQ(cell_of(Rational(0), cells), 0);
    EXPECT_EQ(cell_of(Rational(1), cells), 48);
    EXPECT_EQ(cell_of(rat(48, 49), cells), 48);
    EXPECT_EQ(cell_of(Rational(rat(1, 7) - rat(1, 1L << 40)), cells), 6);
}

TEST(Grid, AnchorsOnly) {
    std::vector<ClusterPoint> pts = {anchor(Provenance::anchor_qn, 0), anchor(Provenance::anchor_x0, rat(3, 10)),
                                     anchor(Provenance::anchor_qprev, 1)};
    auto g = cluster_points(pts, 4, 0);  // cells of width 1/4
    EXPECT_EQ(g.occupied, (std::vector<BigInt>{0, 1, 3}));
    ASSERT_EQ(g.clusters.size(), 2u);
    EXPECT_TRUE(g.clusters[0].has_qn && g.clusters[0].has_x0);
    EXPECT_TRUE(g.clusters[1].has_qprev);
    EXPECT_FALSE(g.clusters[0].has_break());
    ASSERT_EQ(g.gaps.size(), 1u);
    EXPECT_EQ(g.gaps[0].first_cell, 2);
    EXPECT_EQ(g.gaps[0].last_cell, 2);
}

TEST(Grid, FinerLevelsNestAndNeverMerge) {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        int m1 = static_cast<int>(rng.below(4)), m2 = static_cast<int>(rng.below(3));
        int m0 = m1 + m2 + 4;
        auto pts = synthetic_set(rng, m1, m2, m0);
        std::size_t prev_count = 0;
        std::set<BigInt> prev_occupied;
        for (int l = 0; l <= 12; ++l) {
            auto g = cluster_points(pts, m0, l);
            EXPECT_GE(g.clusters.size(), prev_count);
            // an occupied cell lies inside an occupied parent
            for (const auto& c : g.occupied)
                if (l > 0) EXPECT_TRUE(prev_occupied.count(c / m0)) << "l = " << l;
            // clusters partition the points and are runs of adjacent occupied cells
            std::size_t members = 0;
            for (std::size_t k = 0; k < g.clusters.size(); ++k) {
                members += g.clusters[k].members.size();
                if (k) EXPECT_GE(g.clusters[k].first_cell, g.clusters[k - 1].last_cell + 2);
            }
            EXPECT_EQ(members, pts.size());
            EXPECT_EQ(g.gaps.size() + 1, g.clusters.size());
            prev_count = g.clusters.size();
            prev_occupied = std::set<BigInt>(g.occupied.begin(), g.occupied.end());
        }
    }
}

TEST(ClusterSearch, SyntheticSetsSatisfyBothBounds) {
    Rng rng(77);
    const int r = 9;
    for (int trial = 0; trial < 300; ++trial) {
        int m = 1 + static_cast<int>(rng.below(6));
        int m1 = static_cast<int>(rng.below(m + 1)), m2 = m - m1;
        int m0 = m + 4;
        auto pts = synthetic_set(rng, m1, m2, m0);
        auto res = stable_cluster_search(pts, m0, r, m);
        EXPECT_GE(res.s0, 0);
        EXPECT_LE(res.s0, r * (m + 1));
        EXPECT_EQ(res.s0 % r, 0);
        EXPECT_TRUE(res.diameter_ok) << "trial " << trial;
        EXPECT_TRUE(res.separation_ok) << "trial " << trial;
        EXPECT_EQ(res.at_s0.clusters.size(), res.at_s0_plus_r.clusters.size());
        for (std::size_t i = 0; i + 1 < res.cluster_counts.size(); ++i)
            EXPECT_LT(res.cluster_counts[i], res.cluster_counts[i + 1] + 1);
    }
}

TEST(ClusterSearch, OneCellSeparationIsNotAlwaysAFullLevel) {
    std::vector<ClusterPoint> pts = {anchor(Provenance::anchor_qn, 0), anchor(Provenance::anchor_x0, rat(2, 7)),
                                     anchor(Provenance::anchor_qprev, 1)};
    auto res = stable_cluster_search(pts, 7, 9, 0);
    EXPECT_EQ(res.s0, 0);
    EXPECT_EQ(res.at_s0.clusters.size(), 3u);
    EXPECT_TRUE(res.separation_ok);
    EXPECT_FALSE(res.separation_literal);
    EXPECT_EQ(res.min_gap, rat(2, 7));
}

TEST(ClusterSearch, NeedsRoomInTheGrid) {
    std::vector<ClusterPoint> pts = {anchor(Provenance::anchor_qn, 0), anchor(Provenance::anchor_x0, rat(1, 2)),
                                     anchor(Provenance::anchor_qprev, 1)};
    EXPECT_THROW(stable_cluster_search(pts, 3, 9, 0), Error);
}

TEST(ClusterSearch, SelectionPrefersAnchorFreeClusters) {
    std::vector<ClusterPoint> pts = {anchor(Provenance::anchor_qn, 0), anchor(Provenance::anchor_x0, rat(1, 2)),
                                     anchor(Provenance::anchor_qprev, 1),
                                     {rat(1, 2), Provenance::f1_preimage, 3.0},
                                     {rat(3, 4), Provenance::f1_preimage, 2.0}};
    auto res = stable_cluster_search(pts, 8, 9, 2);
    ASSERT_TRUE(res.selected.has_value());
    const auto& c = res.at_s0.clusters[*res.selected];
    EXPECT_FALSE(c.has_anchor());
    EXPECT_DOUBLE_EQ(c.product1, 2.0);
    EXPECT_FALSE(res.contradiction);
}

TEST(ClusterSearch, CoincidingProductsAreAContradiction) {
    std::vector<ClusterPoint> pts = {anchor(Provenance::anchor_qn, 0), anchor(Provenance::anchor_x0, rat(1, 2)),
                                     anchor(Provenance::anchor_qprev, 1),
                                     {rat(3, 4), Provenance::f1_preimage, 2.0},
                                     {rat(3, 4), Provenance::f2_pullback, 2.0}};
    auto res = stable_cluster_search(pts, 8, 9, 2);
    EXPECT_FALSE(res.selected.has_value());
    EXPECT_TRUE(res.contradiction);
}

TEST(Constants, M0AndK) {
    EXPECT_EQ(compute_m0(1, 0, 2, 0.5, 2 * std::log(2.0), 0), 5);
    EXPECT_EQ(compute_m0(3, 3, 2, 0.5, 0, 0), 10);
    EXPECT_EQ(compute_m0(0, 0, 2, 0.5, std::log(20.5), 0), 21);
    EXPECT_DOUBLE_EQ(compute_K(5, 1, 0, 0, 0), std::pow(5.0, 25));
}

TEST(GapBound, JumpTwoAgainstNone) {
    EXPECT_NEAR(gap_bound(2.0, 1.0), 0.4, 1e-15);
    EXPECT_EQ(gap_bound(1.0, 1.0), 0.0);
}

TEST(Preimages, RotationHasNone) {
    auto ps = qn_preimages(make_rotation<double>(golden_mean<double>()), 9, 0.0);
    EXPECT_TRUE(ps.preimages.empty());
    EXPECT_TRUE(ps.neighborhood_clear);
    EXPECT_EQ(ps.frame.q_n, 55);
    EXPECT_EQ(ps.frame.q_prev, 34);
}

TEST(Preimages, ReturnToTheBreakOnTheRightSide) {
    for (const auto* f : {&one_break(), &two_break()}) {
        for (int n : {5, 8, 9}) {
            auto ps = qn_preimages(*f, n, 0.0);
            const auto& fr = ps.frame;
            ASSERT_EQ(ps.preimages.size(), f->breaks().size());
            for (const auto& bp : ps.preimages) {
                double back = iterate(*f, bp.point, bp.return_time);
                EXPECT_LT(circular_distance(back, bp.source.location), 1e-9);
                double c = fr.coord(bp.point), cx0 = fr.coord(fr.x0);
                if (bp.side == PreimageSide::toward_qprev) {
                    EXPECT_LT(bp.return_time, fr.q_n);
                    EXPECT_GE(c, cx0 - 1e-12);
                    EXPECT_LE(c, fr.d_n + 1e-12);
                } else {
                    EXPECT_LT(bp.return_time, fr.q_prev);
                    EXPECT_LE(c, cx0 + 1e-12);
                }
            }
        }
    }
}

TEST(Preimages, FrameOrientationFollowsParity) {
    auto f = make_rotation<double>(golden_mean<double>());
    auto odd = qn_preimages(f, 9, 0.0).frame, even = qn_preimages(f, 8, 0.0).frame;
    // x_{q_n} sits clockwise of x0 for odd n
    EXPECT_LT(ccw_length(odd.x_qn, odd.x0), 0.5);
    EXPECT_LT(ccw_length(even.x0, even.x_qn), 0.5);
    EXPECT_NEAR(odd.coord(odd.point(0.01)), 0.01, 1e-15);
    EXPECT_NEAR(even.coord(even.point(0.01)), 0.01, 1e-15);
}

TEST(BreakSet, OneBreakAgainstRotation) {
    auto r = make_rotation<double>(golden_mean<double>());
    auto h = build_conjugacy(one_break(), r, 0.0, 0.0, 1 << 16);
    auto bs = build_break_set(one_break(), r, view_of(h), 9);
    EXPECT_EQ(bs.m1, 1);
    EXPECT_EQ(bs.m2, 0);
    ASSERT_EQ(bs.elements.size(), 4u);
    EXPECT_EQ(bs.elements.front().u, Rational(0));
    EXPECT_EQ(bs.elements.back().u, Rational(1));
    int preimages = 0;
    for (std::size_t i = 0; i < bs.elements.size(); ++i) {
        if (i) EXPECT_LE(bs.elements[i - 1].u, bs.elements[i].u);
        preimages += bs.elements[i].kind == Provenance::f1_preimage;
    }
    EXPECT_EQ(preimages, 1);
}

TEST(BreakSet, TwoBreaksAgainstOne) {
    auto h = build_conjugacy(two_break(), one_break(), 0.0, 0.0, 1 << 16);
    auto bs = build_break_set(two_break(), one_break(), view_of(h), 9);
    EXPECT_EQ(bs.m1, 2);
    EXPECT_EQ(bs.m2, 1);
    EXPECT_EQ(bs.elements.size(), 6u);
    for (const auto& e : bs.elements) {
        EXPECT_GE(e.u, Rational(0));
        EXPECT_LE(e.u, Rational(1));
    }
}

TEST(BreakSet, MismatchedRotationThrows) {
    auto r = make_rotation<double>(silver_mean<double>());
    auto h = view_of_diffeo(make_rotation<double>(0.0), 0.0);
    EXPECT_THROW(build_break_set(one_break(), r, h, 5), Error);
}

TEST(Cover, OneBreakAgainstRotation) {
    PrecisionScope ps(256);
    using E = ExtendedReal;
    auto f = golden_tuned<E>({{0.5, 2.0}});
    auto r = make_rotation<E>(golden_mean<E>());
    auto h = build_conjugacy(f, r, E(0), E(0), 1 << 16);
    for (int n : {9, 11}) {
        auto rep = regular_cover(f, r, view_of(h), n);
        EXPECT_TRUE(rep.ok()) << "n = " << n;
        EXPECT_FALSE(rep.products_coincide);
        EXPECT_EQ(rep.m0, 5);
        EXPECT_EQ(rep.covered1.size(), 1u);
        EXPECT_TRUE(rep.covered2.empty());
        EXPECT_FALSE(rep.side2.applicable);
        EXPECT_EQ(rep.side1.coverage_counts, std::vector<std::int64_t>{1});
        if (rep.cover_case == CoverCase::c1) EXPECT_NEAR(rep.side1.ratio_23_12, double(rep.m0), 1e-20);
        EXPECT_LE(rep.side1.cond6_max, 0.5);
        auto gap = distortion_gap_experiment(f, r, rep);
        EXPECT_NEAR(gap.gap_bound, 0.4, 1e-15);
        EXPECT_GE(gap.gap, gap.gap_bound - 0.05) << "n = " << n;
    }
}

TEST(Cover, EvenLevelsAreRejected) {
    auto r = make_rotation<double>(golden_mean<double>());
    auto h = view_of_diffeo(make_rotation<double>(0.0), 0.0);
    EXPECT_THROW(regular_cover(one_break(), r, h, 8), Error);
}

TEST(Cover, BreakNextToBasePointGivesThirdCase) {
    // f1 = g R g^-1 with a break of g one rotation step past t0: both breaks of f1
    // pull back onto the point just right of x0, and x_{q_n} shares its cluster
    PrecisionScope ps(256);
    using E = ExtendedReal;
    E rho = E(1) / (3 + E("1e-9"));
    E c("0.5");
    E t0 = c - rho - E("1e-12");
    auto g = make_piecewise_mobius<E>({{c, E(2)}}, E(0));
    auto rot = make_rotation<E>(rho);
    auto f1 = conjugate(g, rot);
    E x0 = g(t0);
    ConjugacyView<E> view{[g](const E& x) { return g.inverse(x); }, [g](const E& t) { return g(t); }, x0, t0, "exact"};
    auto rep = regular_cover(f1, rot, view, 1);
    EXPECT_EQ(rep.s0, 0);
    EXPECT_EQ(rep.q_n, 3);
    EXPECT_EQ(rep.q_prev, 1);
    EXPECT_EQ(rep.cover_case, CoverCase::c3);
    EXPECT_TRUE(rep.products_coincide);
    EXPECT_EQ(rep.r_n, 3);
    double m0 = rep.m0;
    EXPECT_NEAR(rep.side1.ratio_23_12, m0 * m0, 1e-20 * m0 * m0);
    EXPECT_NEAR(to_double(E(ccw_length(rep.z[2], rep.z[3]) / ccw_length(rep.z[0], rep.z[1]))), 1.0, 1e-20);
    ASSERT_EQ(rep.covered1.size(), 2u);
    EXPECT_EQ(rep.side1.coverage_counts, (std::vector<std::int64_t>{1, 1}));
    EXPECT_NEAR(rep.sigma1, 1.0, 1e-15);
    EXPECT_EQ(rep.sigma2, 1.0);
}
