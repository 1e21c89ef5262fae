#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "circle_map.hpp"
#include "random.hpp"
#include "stats.hpp"

namespace breaklab {

/// Strictly increasing lifted representative of a circularly ordered quadruple.
template <class Real>
struct LiftedQuadruple {
    std::array<Real, 4> z;

    Real diameter() const { return z[3] - z[0]; }
    const Real& operator[](std::size_t i) const { return z[i]; }
};

template <class Real>
LiftedQuadruple<Real> lift_quadruple(const Real& z1, const Real& z2, const Real& z3, const Real& z4) {
    std::array<Real, 4> r{reduce(z1), reduce(z2), reduce(z3), reduce(z4)};
    Real d2 = ccw_length(r[0], r[1]), d3 = ccw_length(r[0], r[2]), d4 = ccw_length(r[0], r[3]);
    if (!(d2 > 0 && d2 < d3 && d3 < d4)) fail(ErrorKind::invalid_argument, "quadruple is not in circular order");
    LiftedQuadruple<Real> q;
    q.z[0] = r[0];
    for (int i = 1; i < 4; ++i) q.z[i] = r[i] < r[0] ? Real(r[i] + 1) : r[i];
    return q;
}

template <class Real>
Real cross_ratio(const Real& z1, const Real& z2, const Real& z3, const Real& z4) {
    return (z2 - z1) * (z4 - z3) / ((z3 - z1) * (z4 - z2));
}

template <class Real>
Real cross_ratio(const LiftedQuadruple<Real>& q) {
    return cross_ratio(q[0], q[1], q[2], q[3]);
}

template <class Real>
struct DistortionSample {
    LiftedQuadruple<Real> quadruple;
    LiftedQuadruple<Real> image;
    Real cr_before, cr_after;
    Real dist;        // cr_after / cr_before
    Real telescoped;  // product of single-step distortions
    Real diameter;
};

/// Dist(z; f^iterates), tracking lifted images and the per-step product.
template <class Real>
DistortionSample<Real> distortion(const LiftedQuadruple<Real>& q, const CircleMap<Real>& map, std::int64_t iterates,
                                  std::int64_t budget = kDefaultOrbitBudget) {
    if (iterates > budget) fail(ErrorKind::budget_exceeded, "distortion: iterates beyond budget");
    DistortionSample<Real> s;
    s.quadruple = q;
    s.diameter = q.diameter();
    s.cr_before = cross_ratio(q);
    s.telescoped = 1;
    LiftedQuadruple<Real> cur = q;
    Real cr_cur = s.cr_before;
    for (std::int64_t i = 0; i < iterates; ++i) {
        LiftedQuadruple<Real> img;
        for (int j = 0; j < 4; ++j) img.z[j] = map.lift(cur[j]);
        Real k = Real(floor_int(img[0]));
        for (int j = 0; j < 4; ++j) img.z[j] -= k;
        Real cr_img = cross_ratio(img);
        s.telescoped *= cr_img / cr_cur;
        cr_cur = cr_img;
        cur = img;
    }
    s.image = cur;
    s.cr_after = cr_cur;
    s.dist = s.cr_after / s.cr_before;
    return s;
}

// ---------------------------------------------------------------------------

template <class Real>
struct GParams {
    Real sigma;
    Real x;  // xi > 0
    Real y;  // z in [0, 1]
};

/// G(x, y) = [sigma + (1 - sigma) y](1 + x) / (sigma + (1 - sigma) y + x).
template <class Real>
Real g_function(const Real& sigma, const Real& x, const Real& y) {
    Real a = sigma + (1 - sigma) * y;
    return a * (1 + x) / (a + x);
}

template <class Real>
Real g_function(const GParams<Real>& p) {
    return g_function(p.sigma, p.x, p.y);
}

/// Limit of G as x -> infinity.
template <class Real>
Real g_limit(const Real& sigma, const Real& y) {
    return sigma + (1 - sigma) * y;
}

// ---------------------------------------------------------------------------

struct ProductCertificate {
    double omega0 = 1;
    double theta0 = 1;
    double lambda_hat = 0;
    double sigma1 = 1, sigma2 = 1;
    double worst1 = 0, worst2 = 0;  // max |prod G - sigma| over the certified box, per family
};

namespace detail {

/// Extremes of prod_s G_s over x in [omega, inf], y_s in [0, theta].
/// Each factor is monotone in x and in y, so corners suffice.
inline std::pair<double, double> g_product_range(const std::vector<double>& jumps, double omega, double theta) {
    double lo = 1, hi = 1;
    for (double s : jumps) {
        double c[4] = {g_function(s, omega, 0.0), g_function(s, omega, theta), g_limit(s, 0.0), g_limit(s, theta)};
        lo *= *std::min_element(c, c + 4);
        hi *= *std::max_element(c, c + 4);
    }
    return {lo, hi};
}

/// Extremes of Phi^(1) = prod [sigma_s + (1 - sigma_s) y_s] over y_s in [0, theta].
inline std::pair<double, double> phi1_range(const std::vector<double>& jumps, double theta) {
    double lo = 1, hi = 1;
    for (double s : jumps) {
        double a = s, b = g_limit(s, theta);
        lo *= std::min(a, b);
        hi *= std::max(a, b);
    }
    return {lo, hi};
}

inline double deviation(std::pair<double, double> range, double sigma) {
    return std::max(std::abs(range.first - sigma), std::abs(range.second - sigma));
}

} // namespace detail

inline double product_of(const std::vector<double>& v) {
    double p = 1;
    for (double x : v) p *= x;
    return p;
}

/// Omega0 > 1, theta0 in (0, 1) with |prod G - sigma(B)| <= Lambda/8 for x >= Omega0,
/// y <= theta0, on both families. theta0 first keeps Phi^(1) within Lambda/16,
/// then Omega0 is the smallest value closing the full product.
inline ProductCertificate product_certificate(const std::vector<double>& jumps1, const std::vector<double>& jumps2) {
    ProductCertificate c;
    c.sigma1 = product_of(jumps1);
    c.sigma2 = product_of(jumps2);
    c.lambda_hat = std::min({c.sigma1, c.sigma2, std::abs(c.sigma1 - c.sigma2)});
    if (!(c.lambda_hat > 1e-12 * std::max(c.sigma1, c.sigma2)))
        fail(ErrorKind::coinciding_jumps, "jump products coincide; no certified region exists");
    const double target = c.lambda_hat / 8;

    c.theta0 = std::nextafter(1.0, 0.0);
    for (const auto* js : {&jumps1, &jumps2}) {
        double sigma = product_of(*js);
        if (detail::deviation(detail::phi1_range(*js, c.theta0), sigma) <= target / 2) continue;
        double lo = 0, hi = c.theta0;
        for (int it = 0; it < 200; ++it) {
            double mid = (lo + hi) / 2;
            if (detail::deviation(detail::phi1_range(*js, mid), sigma) <= target / 2) lo = mid; else hi = mid;
        }
        c.theta0 = lo;
    }
    require(c.theta0 > 0, "theta0 collapsed to zero");

    c.omega0 = 1;
    for (const auto* js : {&jumps1, &jumps2}) {
        double sigma = product_of(*js);
        auto ok = [&](double omega) {
            return detail::deviation(detail::g_product_range(*js, omega, c.theta0), sigma) <= target;
        };
        if (ok(c.omega0)) continue;
        double lo = std::log(c.omega0), hi = std::log(1e15);
        if (!ok(std::exp(hi))) fail(ErrorKind::precision_exhausted, "no Omega0 below 1e15");
        for (int it = 0; it < 200; ++it) {
            double mid = (lo + hi) / 2;
            if (ok(std::exp(mid))) hi = mid; else lo = mid;
        }
        c.omega0 = std::exp(hi);
    }
    c.omega0 = std::max(c.omega0, std::nextafter(1.0, 2.0));
    c.worst1 = detail::deviation(detail::g_product_range(jumps1, c.omega0, c.theta0), c.sigma1);
    c.worst2 = detail::deviation(detail::g_product_range(jumps2, c.omega0, c.theta0), c.sigma2);
    return c;
}

// ---------------------------------------------------------------------------

enum class ResidualMode { smooth, breaks };

struct ResidualReport {
    ResidualMode mode = ResidualMode::smooth;
    double slope = 0;       // median of per-trial slopes
    double intercept = 0;   // median of per-trial intercepts
    double r2 = 0;          // pooled fit
    std::size_t n_samples = 0;
    bool exact_family = false;
    double max_residual = 0;
    std::vector<double> diameters;
    std::vector<double> median_residuals;  // per diameter
};

inline std::vector<double> geometric_diameters(double hi = 1e-2, double lo = 1e-5, int count = 7) {
    std::vector<double> d;
    for (int i = 0; i < count; ++i) d.push_back(hi * std::pow(lo / hi, double(i) / (count - 1)));
    return d;
}

/// Smooth mode: |Dist - 1| on quadruples inside one continuity interval.
/// Break mode: |Dist - G(sigma, xi, z)| with the break in [z1, z2].
template <class Real>
ResidualReport distortion_residuals(const CircleMap<Real>& map, ResidualMode mode, int trials, std::uint64_t seed,
                                    std::vector<double> diameters = geometric_diameters()) {
    ResidualReport rep;
    rep.mode = mode;
    rep.diameters = diameters;
    Rng rng(seed);
    const auto& brk = map.breaks();
    require(mode == ResidualMode::smooth || !brk.empty(), "break mode needs a map with breaks");
    double dmax = *std::max_element(diameters.begin(), diameters.end());

    std::vector<double> slopes, intercepts, all_x, all_y;
    std::vector<std::vector<double>> per_diameter(diameters.size());
    for (int t = 0; t < trials; ++t) {
        double w[3] = {rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0)};
        double ws = w[0] + w[1] + w[2];
        for (double& x : w) x /= ws;
        double frac = rng.uniform();
        Real anchor, sigma = 1;
        if (mode == ResidualMode::breaks) {
            const auto& b = brk[rng.below(brk.size())];
            anchor = b.location;
            sigma = b.jump;
        } else {
            // a point at least dmax away from every break
            for (;;) {
                anchor = Real(rng.uniform());
                bool clear = true;
                for (const auto& b : brk)
                    if (circular_distance(anchor, b.location) < Real(2 * dmax)) clear = false;
                if (clear) break;
            }
        }
        std::vector<double> lx, ly;
        for (std::size_t di = 0; di < diameters.size(); ++di) {
            Real d = Real(diameters[di]);
            Real alpha = d * Real(w[0]), beta = d * Real(w[1]), gamma = d * Real(w[2]);
            Real z2 = mode == ResidualMode::breaks ? Real(anchor + Real(frac) * alpha) : anchor;
            Real z1 = z2 - alpha, z3 = z2 + beta, z4 = z3 + gamma;
            LiftedQuadruple<Real> q{{z1, z2, z3, z4}};
            auto s = distortion(q, map, 1);
            Real expect = mode == ResidualMode::breaks ? g_function(sigma, Real(beta / alpha), Real((z2 - anchor) / alpha))
                                                       : Real(1);
            double res = std::abs(to_double(Real(s.dist - expect)));
            rep.max_residual = std::max(rep.max_residual, res);
            per_diameter[di].push_back(res);
            double lr = std::log(std::max(res, 1e-300));
            lx.push_back(std::log(diameters[di]));
            ly.push_back(lr);
            all_x.push_back(lx.back());
            all_y.push_back(lr);
            ++rep.n_samples;
        }
        auto f = least_squares(lx, ly);
        slopes.push_back(f.slope);
        intercepts.push_back(f.intercept);
    }
    rep.slope = median(slopes);
    rep.intercept = median(intercepts);
    rep.r2 = least_squares(all_x, all_y).r2;
    for (const auto& v : per_diameter) rep.median_residuals.push_back(median(v));
    // roundoff in Dist grows like eps / diameter
    double dmin = *std::min_element(diameters.begin(), diameters.end());
    rep.exact_family = rep.max_residual <= 100 * to_double(unit_roundoff<Real>()) / dmin;
    return rep;
}

} // namespace breaklab
