// One line per acceptance criterion; exits non-zero when any criterion fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "breaklab/lab/run.hpp"

using namespace breaklab;
using namespace breaklab::lab;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

template <class Real>
lab::detail::MapPair<Real> preset_pair(const std::string& name) {
    auto c = load_config(name);
    return lab::detail::build_pair<Real>(c, lab::detail::resolve_shift(c.map1, c), lab::detail::resolve_shift(c.map2, c));
}

CircleMap<double> golden_map(std::vector<BreakSpec<double>> breaks) {
    auto fam = make_piecewise_mobius<double>(std::move(breaks), 0.0);
    return fam.with_shift(tune_parameter(fam, golden_mean<double>(), 1e-12).shift);
}

// 1 -------------------------------------------------------------------------

Outcome cross_ratio_invariance() {
    auto f = preset_pair<double>("dms-main").f1;
    const double b = f.breaks()[0].location;
    Rng rng(1);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        // a quadruple inside the single piece (b, b + 1)
        double d = rng.uniform(0.01, 1.0) * (1 - 1e-9);
        double a = b + rng.uniform(1e-9, 1 - d);
        double w[3] = {rng.uniform(0.1, 1), rng.uniform(0.1, 1), rng.uniform(0.1, 1)};
        double s = w[0] + w[1] + w[2];
        double z2 = a + d * w[0] / s, z3 = z2 + d * w[1] / s;
        LiftedQuadruple<double> q{{a, z2, z3, a + d}};
        worst = std::max(worst, std::abs(distortion(q, f, 1).dist - 1));
    }
    return {worst <= 1e-12, "max |Dist - 1| = " + fmt("%.3g", worst) + " over 1000 quadruples"};
}

// 2 -------------------------------------------------------------------------

Outcome rotation_machinery() {
    const double rho = golden_mean<double>();
    auto r = make_rotation<double>(rho);
    auto est = rotation_number(r, 100000);
    double err = std::abs(est.value - rho);
    auto cf = closest_return_quotients(r, 0.0, 15);
    bool ones = cf.depth() == 15 && std::all_of(cf.quotients.begin(), cf.quotients.end(), [](auto k) { return k == 1; });
    std::vector<std::int64_t> fib = {1, 1};
    while (fib.size() < 16) fib.push_back(fib[fib.size() - 1] + fib[fib.size() - 2]);
    bool fibonacci = cf.q == fib;
    return {err <= 1e-9 && ones && fibonacci,
            "|drho| = " + fmt("%.3g", err) + ", quotients all 1: " + (ones ? "yes" : "no") +
                ", q Fibonacci: " + (fibonacci ? "yes" : "no")};
}

// 3 -------------------------------------------------------------------------

Outcome denjoy_suite() {
    std::vector<CircleMap<double>> maps = {golden_map({{0.5, 2.0}}), golden_map({{0.2, 2.0}, {0.6, 0.5}})};
    std::int64_t violations = 0, control = 0;
    for (const auto& f : maps) {
        double v = to_double(variation_log_df(f));
        for (int n = 1; n <= 14; ++n) {
            violations += denjoy_report(f, 0.0, n, 1000, 100 + n).violations;
            control += denjoy_report(f, 0.0, n, 1000, 100 + n, v / 2).violations;
        }
    }
    return {violations == 0 && control >= 1,
            std::to_string(violations) + " violations; halved-v control: " + std::to_string(control) + " violations"};
}

// 4 -------------------------------------------------------------------------

Outcome length_decay() {
    bool ok = true;
    std::string detail;
    for (const char* name : {"dms-main", "oracle-psi", "two-break", "identity-smoke"}) {
        auto p = preset_pair<double>(name);
        int idx = 1;
        for (const auto* f : {&p.f1, &p.f2}) {
            auto rep = length_decay_fit(*f, idx == 1 ? p.x0 : p.t0, 16, 8);
            bool pass = rep.fitted_rate <= rep.lambda_bound + 0.02;
            ok = ok && pass;
            detail += std::string(detail.empty() ? "" : ", ") + name + "/f" + std::to_string(idx) + " " +
                      fmt("%.4f", rep.fitted_rate) + fmt("<=%.4f", rep.lambda_bound + 0.02);
            ++idx;
        }
    }
    return {ok, detail};
}

// 5 -------------------------------------------------------------------------

Outcome residual_slope() {
    auto f = preset_pair<double>("dms-main").f1;
    auto rep = distortion_residuals(f, ResidualMode::breaks, 50, 5);
    return {rep.slope >= 0.9, "slope = " + fmt("%.4f", rep.slope) + " over diameters 1e-2..1e-5"};
}

// 6 -------------------------------------------------------------------------

Outcome conjugacy_oracle() {
    auto p = preset_pair<double>("oracle-psi");
    auto h = build_conjugacy(p.f1, p.f2, p.x0, p.t0, 10000);
    double sup = smooth_oracle_compare(h, *p.psi);
    double eq = equivariance_residual(h, p.f1, p.f2, 10000, 6);
    double gap = std::max(h.max_x_gap, h.max_t_gap);
    return {sup <= 1e-9 && eq <= 10 * gap,
            "sup at nodes = " + fmt("%.3g", sup) + ", equivariance = " + fmt("%.3g", eq) +
                fmt(" <= %.3g", 10 * gap)};
}

// 7 -------------------------------------------------------------------------

Outcome singularity_contrast() {
    auto dms = preset_pair<double>("dms-main");
    auto h = build_conjugacy(dms.f1, dms.f2, dms.x0, dms.t0, 1 << 16);
    auto rep = singularity_report(h, 8, 14, 0.1);
    double m8 = rep.levels.front().mass_capture, m14 = rep.levels.back().mass_capture;
    double drop = rep.levels.front().median_log10_slope - rep.levels.back().median_log10_slope;

    auto orc = preset_pair<double>("oracle-psi");
    auto ho = build_conjugacy(orc.f1, orc.f2, orc.x0, orc.t0, 1 << 16);
    auto ro = singularity_report(ho, 8, 14, 0.1);
    double oracle_min = 1;
    for (const auto& lv : ro.levels) oracle_min = std::min(oracle_min, lv.mass_capture);

    bool pass = m14 < 0.5 * m8 && drop >= 0.5 && oracle_min >= 0.2;
    return {pass, "m(8) = " + fmt("%.4f", m8) + ", m(14) = " + fmt("%.4f", m14) +
                      fmt(" (ratio %.4f, needs < 0.5)", m14 / m8) + ", slope drop = " + fmt("%.4f", drop) +
                      " (needs >= 0.5), oracle min m = " + fmt("%.4f", oracle_min)};
}

// 8 -------------------------------------------------------------------------

std::vector<ClusterPoint> synthetic_set(Rng& rng, int m1, int m2, int m0) {
    std::vector<ClusterPoint> pts;
    const long den = 1L << 40;
    auto random_u = [&]() {
        if (rng.uniform() < 0.5) {
            const auto& p = pts[rng.below(pts.size())];
            int e = 1 + static_cast<int>(rng.below(3 * (m1 + m2 + 2)));
            Rational off(BigInt(1 + rng.below(m0 - 1)), big_pow(m0, e));
            Rational u = rng.uniform() < 0.5 ? Rational(p.u + off) : Rational(p.u - off);
            return std::clamp(u, Rational(0), Rational(1));
        }
        return Rational(BigInt(static_cast<long>(rng.uniform() * den)), BigInt(den));
    };
    pts.push_back({Rational(0), Provenance::anchor_qn, 1});
    pts.push_back({Rational(1), Provenance::anchor_qprev, 1});
    pts.push_back({random_u(), Provenance::anchor_x0, 1});
    for (int i = 0; i < m1; ++i) pts.push_back({random_u(), Provenance::f1_preimage, rng.uniform(0.2, 5.0)});
    for (int i = 0; i < m2; ++i) pts.push_back({random_u(), Provenance::f2_pullback, rng.uniform(0.2, 5.0)});
    return pts;
}

Outcome cluster_combinatorics() {
    Rng rng(8);
    const int r = 9;
    int failures = 0, max_s0 = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        int m = static_cast<int>(rng.below(7));
        int m1 = static_cast<int>(rng.below(m + 1)), m2 = m - m1;
        int m0 = m + 4;
        auto pts = synthetic_set(rng, m1, m2, m0);
        auto res = stable_cluster_search(pts, m0, r, m);
        bool ok = res.s0 >= 0 && res.s0 <= r * (m + 1);
        // every pair of points, against its cluster membership at s0
        std::vector<std::size_t> cluster_of(pts.size());
        for (std::size_t k = 0; k < res.at_s0.clusters.size(); ++k)
            for (auto i : res.at_s0.clusters[k].members) cluster_of[i] = k;
        Rational diam(BigInt(2), big_pow(m0, res.s0 + r)), sep(BigInt(1), big_pow(m0, res.s0 + 1));
        for (std::size_t i = 0; i < pts.size() && ok; ++i) {
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                Rational d = pts[i].u > pts[j].u ? Rational(pts[i].u - pts[j].u) : Rational(pts[j].u - pts[i].u);
                if (cluster_of[i] == cluster_of[j] ? d > diam : d < sep) ok = false;
            }
        }
        ok = ok && res.diameter_ok && res.separation_ok;
        failures += !ok;
        max_s0 = std::max(max_s0, res.s0);
    }
    return {failures == 0, std::to_string(failures) + " failures over 1000 sets, largest s0 = " + std::to_string(max_s0)};
}

// 9 -------------------------------------------------------------------------

Outcome product_certification() {
    auto c = product_certificate({2.0}, {});
    const double sigma = 2.0, bound = c.lambda_hat / 8;
    const int N = 1000;
    int violations = 0;
    for (int i = 0; i < N; ++i) {
        // x from omega0 out to infinity: geometric steps, the last one the limit
        double x = c.omega0 * std::exp(30.0 * i / (N - 2));
        for (int j = 0; j < N; ++j) {
            double y = c.theta0 * j / (N - 1);
            double g = i == N - 1 ? g_limit(sigma, y) : g_function(sigma, x, y);
            if (std::abs(g - sigma) > bound) ++violations;
        }
    }
    return {violations == 0 && c.lambda_hat == 1.0,
            "Omega0 = " + fmt("%.6g", c.omega0) + ", theta0 = " + fmt("%.6g", c.theta0) + ", " +
                std::to_string(violations) + " grid violations"};
}

// 10 ------------------------------------------------------------------------

Outcome distortion_gap() {
    PrecisionScope ps(256);
    using E = ExtendedReal;
    auto c = load_config("dms-main");
    CoverConstants k{c.M, c.zeta, c.delta_cover, c.r, c.m0_override};
    auto p = preset_pair<E>("dms-main");
    auto h = build_conjugacy(p.f1, p.f2, p.x0, p.t0, c.orbit_budget);
    bool ok = true;
    std::string detail;
    for (int n : {9, 11, 13}) {
        auto rep = regular_cover(p.f1, p.f2, view_of(h), n, k);
        auto g = distortion_gap_experiment(p.f1, p.f2, rep);
        bool pass = g.gap >= g.gap_bound - 0.05;
        ok = ok && pass;
        detail += "n=" + std::to_string(n) + " gap " + fmt("%.4f", g.gap) + (rep.ok() ? "" : " (cover conditions fail)") + ", ";
    }
    auto cc = load_config("control-coinciding");
    auto q = preset_pair<E>("control-coinciding");
    auto rep = regular_cover(q.f1, q.f2, view_of_diffeo(*q.psi, q.x0), 13, k);
    auto g = distortion_gap_experiment(q.f1, q.f2, rep);
    ok = ok && g.gap < 0.1;
    detail += "bound " + fmt("%.4f", gap_bound(2.0, 1.0) - 0.05) + "; control n=13 gap " + fmt("%.3g", g.gap);
    return {ok, detail};
}

struct Criterion {
    int id;
    const char* title;
    double seconds;
    std::function<Outcome()> run;
};

} // namespace

int main() {
    std::vector<Criterion> all = {
        {1, "cross-ratio invariance", 1, cross_ratio_invariance},
        {2, "rotation machinery", 5, rotation_machinery},
        {3, "Denjoy suite", 30, denjoy_suite},
        {4, "length decay", 30, length_decay},
        {5, "distortion residual", 10, residual_slope},
        {6, "conjugacy oracle", 10, conjugacy_oracle},
        {7, "singularity contrast", 120, singularity_contrast},
        {8, "cluster combinatorics", 30, cluster_combinatorics},
        {9, "product certification", 5, product_certification},
        {10, "distortion gap", 120, distortion_gap},
    };
    int failed = 0;
    for (const auto& c : all) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool in_time = secs < c.seconds;
        bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("[%s] criterion %d: %s: %s (%.2f s, limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.title,
                    o.detail.c_str(), secs, c.seconds, in_time ? "" : ", too slow");
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", int(all.size()) - failed, all.size());
    return failed == 0 ? 0 : 1;
}
