#include <gtest/gtest.h>

#include <cmath>

#include "breaklab/map_io.hpp"
#include "breaklab/random.hpp"
#include "breaklab/rotation.hpp"

using namespace breaklab;

namespace {

CircleMap<double> one_break(double shift = 0.3) { return make_piecewise_mobius<double>({{0.5, 2.0}}, shift); }

CircleMap<double> three_breaks(double shift = 0.1) {
    return make_piecewise_mobius<double>({{0.1, 3.0}, {0.45, 0.4}, {0.8, 1.5}}, shift);
}

double central_difference(const CircleMap<double>& f, double x, double h = 1e-6) {
    return (f.lift(x + h) - f.lift(x - h)) / (2 * h);
}

bool near_break(const CircleMap<double>& f, double x, double eps) {
    for (const auto& b : f.breaks())
        if (circular_distance(x, b.location) < eps) return true;
    return false;
}

} // namespace

TEST(Mobius, DerivativeMatchesFiniteDifferences) {
    Rng rng(5);
    for (const auto& f : {one_break(), three_breaks()}) {
        for (int i = 0; i < 500; ++i) {
            double x = rng.uniform();
            if (near_break(f, x, 1e-4)) continue;
            EXPECT_NEAR(f.derivative(x), central_difference(f, x), 1e-7) << "x = " << x;
        }
    }
}

TEST(Mobius, OneSidedDerivativesGiveTheJumps) {
    auto f = three_breaks();
    for (const auto& b : f.breaks()) {
        double left = deriv_one_sided(f, b.location, Side::left);
        double right = deriv_one_sided(f, b.location, Side::right);
        EXPECT_NEAR(left / right, b.jump, 1e-10);
        double h = 1e-7;
        double fd_left = (f.lift(b.location) - f.lift(b.location - h)) / h;
        double fd_right = (f.lift(b.location + h) - f.lift(b.location)) / h;
        EXPECT_NEAR(fd_left / fd_right, b.jump, 1e-5);
    }
}

TEST(Mobius, TotalJumpIsTheProduct) {
    auto f = make_piecewise_mobius<double>({{0.2, 2.0}, {0.7, 0.5}}, 0.0);
    EXPECT_NEAR(total_jump(f), 1.0, 1e-15);
    EXPECT_NEAR(total_jump(three_breaks()), 3.0 * 0.4 * 1.5, 1e-14);
}

TEST(Mobius, LiftHasDegreeOne) {
    auto f = three_breaks();
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        double x = rng.uniform(-3, 3);
        EXPECT_NEAR(f.lift(x + 1), f.lift(x) + 1, 1e-13);
    }
}

TEST(Mobius, InverseRoundTrip) {
    auto f = three_breaks();
    Rng rng(10);
    for (int i = 0; i < 1000; ++i) {
        double x = rng.uniform();
        EXPECT_NEAR(circular_distance(f.inverse(f(x)), x), 0.0, 1e-14);
    }
}

TEST(Mobius, StrictlyIncreasing) {
    auto f = three_breaks();
    double prev = f.lift(0);
    for (int i = 1; i <= 10000; ++i) {
        double cur = f.lift(i / 10000.0);
        ASSERT_GT(cur, prev);
        prev = cur;
    }
}

TEST(Mobius, VariationMatchesGridSum) {
    for (const auto& f : {one_break(), three_breaks()}) {
        const int N = 1 << 16;
        double sum = 0;
        std::vector<double> cuts;
        for (const auto& b : f.breaks()) cuts.push_back(b.location);
        for (std::size_t i = 0; i < cuts.size(); ++i) {
            double a = cuts[i], e = i + 1 < cuts.size() ? cuts[i + 1] : cuts[0] + 1;
            double prev = std::log(deriv_one_sided(f, a, Side::right));
            int steps = std::max(16, int((e - a) * N));
            for (int s = 1; s <= steps; ++s) {
                double x = a + (e - a) * s / steps;
                double cur = std::log(deriv_one_sided(f, x, s == steps ? Side::left : Side::right));
                sum += std::abs(cur - prev);
                prev = cur;
            }
            sum += std::abs(std::log(f.breaks()[i].jump));
        }
        EXPECT_NEAR(variation_log_df(f), sum, 1e-9);
    }
}

TEST(Mobius, OneBreakVariationIsTwiceLogJump) {
    EXPECT_NEAR(variation_log_df(one_break()), 2 * std::log(2.0), 1e-14);
}

TEST(Mobius, RotationHasNoBreaksAndZeroVariation) {
    auto r = make_rotation<double>(0.25);
    EXPECT_TRUE(r.breaks().empty());
    EXPECT_EQ(variation_log_df(r), 0.0);
    EXPECT_NEAR(r(0.9), 0.15, 1e-15);
}

TEST(Mobius, RejectsBadBreaks) {
    EXPECT_THROW(make_piecewise_mobius<double>({{0.5, -1.0}}, 0.0), Error);
    EXPECT_THROW(make_piecewise_mobius<double>({{0.5, 2.0}, {0.5, 3.0}}, 0.0), Error);
}

TEST(Mobius, LocationsAreReducedModOne) {
    auto f = make_piecewise_mobius<double>({{1.5, 2.0}}, 0.0);
    ASSERT_EQ(f.breaks().size(), 1u);
    EXPECT_EQ(f.breaks()[0].location, 0.5);
}

TEST(Sine, DerivativeInverseAndVariation) {
    auto psi = make_sine_diffeo<double>(0.5);
    Rng rng(3);
    for (int i = 0; i < 300; ++i) {
        double x = rng.uniform();
        EXPECT_NEAR(psi.derivative(x), central_difference(psi, x), 1e-7);
        EXPECT_NEAR(circular_distance(psi.inverse(psi(x)), x), 0.0, 1e-14);
    }
    // max/min of 1 + a cos is (1+a)/(1-a), reached twice per period
    EXPECT_NEAR(variation_log_df(psi), 2 * std::log(3.0), 1e-14);
    EXPECT_THROW(make_sine_diffeo<double>(1.0), Error);
}

TEST(Conjugated, MatchesCompositionAndMovesBreaks) {
    auto psi = make_sine_diffeo<double>(0.4);
    auto f = one_break(0.37);
    auto g = conjugate(psi, f);
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        double x = rng.uniform();
        EXPECT_NEAR(circular_distance(g(x), psi(f(psi.inverse(x)))), 0.0, 1e-13);
    }
    ASSERT_EQ(g.breaks().size(), 1u);
    EXPECT_NEAR(g.breaks()[0].location, psi(0.5), 1e-14);
    EXPECT_NEAR(g.breaks()[0].jump, 2.0, 1e-12);
    EXPECT_NEAR(total_jump(g), total_jump(f), 1e-12);
    double b = g.breaks()[0].location;
    EXPECT_NEAR(deriv_one_sided(g, b, Side::left) / deriv_one_sided(g, b, Side::right), 2.0, 1e-9);
}

TEST(Conjugated, RotationByMobiusBreaksOnOneOrbit) {
    auto gmap = make_piecewise_mobius<double>({{0.3, 2.0}}, 0.0);
    auto f = conjugate(gmap, make_rotation<double>(0.2));
    ASSERT_EQ(f.breaks().size(), 2u);
    EXPECT_NEAR(total_jump(f), 1.0, 1e-12);
    // the two breaks are gmap(c) and gmap(c - rho), one iterate apart
    double a = f.breaks()[0].location, b = f.breaks()[1].location;
    EXPECT_TRUE(circular_distance(f(a), b) < 1e-12 || circular_distance(f(b), a) < 1e-12);
}

TEST(Iterate, InversionDrift) {
    // an untuned shift may sit on a locking plateau, where backward orbits blow up
    auto fam = three_breaks(0.0);
    double shift = tune_parameter(fam, golden_mean<double>(), 1e-12).shift;
    auto f = fam.with_shift(shift);
    for (std::int64_t n : {10, 1000, 100000}) {
        double x = 0.37;
        double back = iterate(f, iterate(f, x, n), -n);
        EXPECT_LT(circular_distance(back, x), 1e-14 * double(n) + 1e-15) << "n = " << n;
    }
    PrecisionScope ps(256);
    auto g = make_piecewise_mobius<ExtendedReal>({{ExtendedReal("0.1"), ExtendedReal(3)},
                                                  {ExtendedReal("0.45"), ExtendedReal("0.4")},
                                                  {ExtendedReal("0.8"), ExtendedReal("1.5")}},
                                                 ExtendedReal(shift));
    for (std::int64_t n : {10, 1000, 100000}) {
        ExtendedReal x("0.37");
        ExtendedReal back = iterate(g, iterate(g, x, n), -n);
        EXPECT_LT(to_double(circular_distance(back, x)), 1e-60) << "n = " << n;
    }
}

TEST(Iterate, ExtendedAgreesWithDouble) {
    auto f = three_breaks(0.123);
    PrecisionScope ps(128);
    auto g = make_piecewise_mobius<ExtendedReal>(
        {{ExtendedReal(0.1), ExtendedReal(3.0)}, {ExtendedReal(0.45), ExtendedReal(0.4)}, {ExtendedReal(0.8), ExtendedReal(1.5)}},
        ExtendedReal(0.123));
    double x = 0.37;
    ExtendedReal y = 0.37;
    for (int i = 0; i < 20; ++i) {
        x = f(x);
        y = g(y);
    }
    EXPECT_NEAR(x, to_double(y), 1e-12);
}

TEST(MapJson, DoubleRoundTripIsBitExact) {
    auto f = make_piecewise_mobius<double>({{0.1, 3.0}, {0.45, 0.4}, {0.8, 1.0 / 3.0}}, 0.1 + 0.2);
    auto j = map_to_json(f);
    auto g = map_from_json<double>(json::parse(j.dump()));
    ASSERT_EQ(g.breaks().size(), f.breaks().size());
    for (std::size_t i = 0; i < f.breaks().size(); ++i) {
        EXPECT_EQ(g.breaks()[i].location, f.breaks()[i].location);
        EXPECT_EQ(g.breaks()[i].jump, f.breaks()[i].jump);
    }
    EXPECT_EQ(g.shift(), f.shift());
    EXPECT_EQ(j.at("precision_bits"), 53);
}

TEST(MapJson, ExtendedRoundTripIsBitExact) {
    PrecisionScope ps(256);
    using E = ExtendedReal;
    auto f = make_piecewise_mobius<E>({{E(1) / 7, E(2) / 3}, {E(5) / 9, E(3) / 2}}, sqrt(E(2)) - 1);
    auto j = map_to_json(f);
    auto g = map_from_json<E>(json::parse(j.dump()));
    ASSERT_EQ(g.breaks().size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(g.breaks()[i].location, f.breaks()[i].location);
        EXPECT_EQ(g.breaks()[i].jump, f.breaks()[i].jump);
    }
    EXPECT_EQ(g.shift(), f.shift());
    EXPECT_GE(j.at("precision_bits").get<int>(), 256);
}

TEST(MapJson, RejectsUnknownFamily) {
    EXPECT_THROW(map_from_json<double>(json{{"family", "tent"}}), Error);
}

TEST(Scalar, PrecisionScopeSetsBits) {
    {
        PrecisionScope ps(200);
        EXPECT_GE(mantissa_bits<ExtendedReal>(), 200);
    }
    EXPECT_EQ(mantissa_bits<double>(), 53);
}
