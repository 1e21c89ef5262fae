#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "report.hpp"

namespace breaklab::lab {

enum ExitCode : int { exit_ok = 0, exit_invalid_config = 2, exit_precision = 3, exit_criterion = 4 };

struct Check {
    std::string stage;
    std::string name;
    bool pass = false;
    double value = 0;
    double bound = 0;
    std::string relation;  // "<=", ">=", "==", "<"
};

struct StageFailure {
    std::string stage;
    ErrorKind kind = ErrorKind::invalid_argument;
    std::string message;
};

struct RunResult {
    json report;
    std::vector<Check> checks;
    std::optional<StageFailure> failure;
    std::map<std::string, std::string> files;  // name -> contents
    bool cache_hit = false;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
    }

    int exit_code() const {
        if (failure) return failure->kind == ErrorKind::invalid_argument ? exit_invalid_config : exit_precision;
        return passed() ? exit_ok : exit_criterion;
    }
};

struct RunOptions {
    std::optional<std::filesystem::path> cache_dir;
    std::ostream* log = nullptr;
};

inline std::optional<std::filesystem::path> cache_dir_from_env() {
    if (const char* env = std::getenv("BREAKLAB_CACHE_DIR"); env && *env) return std::filesystem::path(env);
    return std::nullopt;
}

// ---------------------------------------------------------------------------

/// Orbit tables and tuned shifts, stored as JSON under the orbit key.
class OrbitCache {
public:
    OrbitCache(std::optional<std::filesystem::path> dir, std::string key) : dir_(std::move(dir)), key_(std::move(key)) {
        if (!dir_) return;
        auto p = path();
        if (std::filesystem::exists(p)) {
            std::ifstream in(p);
            try {
                data_ = json::parse(in);
                hit_ = data_.value("key", "") == key_;
            } catch (const json::exception&) {
                data_ = json::object();
            }
            if (!hit_) data_ = json::object();
        }
    }

    bool enabled() const { return dir_.has_value(); }
    bool hit() const { return hit_; }
    bool has(const std::string& k) const { return data_.contains(k); }
    const json& get(const std::string& k) const { return data_.at(k); }

    void put(const std::string& k, json v) {
        data_[k] = std::move(v);
        dirty_ = true;
    }

    void flush() {
        if (!dir_ || !dirty_) return;
        std::filesystem::create_directories(*dir_);
        data_["key"] = key_;
        auto tmp = path();
        tmp += ".tmp";
        {
            std::ofstream out(tmp);
            out << data_.dump();
        }
        std::filesystem::rename(tmp, path());
        dirty_ = false;
    }

private:
    std::filesystem::path path() const { return *dir_ / ("orbits-" + key_ + ".json"); }

    std::optional<std::filesystem::path> dir_;
    std::string key_;
    json data_ = json::object();
    bool hit_ = false, dirty_ = false;
};

// ---------------------------------------------------------------------------

namespace detail {

template <class Real>
Real real_value(const json& v) {
    return real_from_json<Real>(v);
}

template <class Real>
Real target_value(const json& t) {
    if (t.is_string()) {
        auto s = t.get<std::string>();
        if (s == "golden") return golden_mean<Real>();
        if (s == "silver") return silver_mean<Real>();
        return parse_real<Real>(s);
    }
    return Real(t.get<double>());
}

/// The shift-free family member; conjugate_sine is built from map1 separately.
template <class Real>
CircleMap<Real> base_map(const MapConfig& m) {
    if (m.family == "rotation") return make_rotation<Real>(Real(0));
    if (m.family == "sine") return make_sine_diffeo<Real>(real_value<Real>(m.amplitude));
    std::vector<BreakSpec<Real>> breaks;
    for (const auto& b : m.breaks) breaks.push_back({real_value<Real>(b.at("location")), real_value<Real>(b.at("jump"))});
    return make_piecewise_mobius<Real>(breaks, Real(0));
}

/// Shift as JSON: explicit, the target itself for rotations, or tuned in double precision.
inline json resolve_shift(const MapConfig& m, const ExperimentConfig& c) {
    if (!m.shift.is_null()) return m.shift;
    if (m.family == "rotation") return c.target;
    auto fam = base_map<double>(m);
    auto tr = tune_parameter(fam, target_value<double>(c.target), c.tolerance);
    return tr.shift;
}

template <class Real>
struct MapPair {
    CircleMap<Real> f1, f2;
    std::optional<CircleMap<Real>> psi;
    Real x0 = 0, t0 = 0;
};

template <class Real>
MapPair<Real> build_pair(const ExperimentConfig& c, const json& shift1, const json& shift2) {
    MapPair<Real> p;
    auto shift_of = [&](const MapConfig& m, const json& s) {
        return m.family == "rotation" && m.shift.is_null() ? target_value<Real>(c.target) : real_value<Real>(s);
    };
    p.f1 = base_map<Real>(c.map1).with_shift(shift_of(c.map1, shift1));
    if (c.map2.family == "conjugate_sine") {
        p.psi = make_sine_diffeo<Real>(real_value<Real>(c.map2.amplitude));
        p.f2 = conjugate(*p.psi, p.f1);
        p.t0 = (*p.psi)(p.x0);
    } else {
        p.f2 = base_map<Real>(c.map2).with_shift(shift_of(c.map2, shift2));
    }
    return p;
}

template <class Real>
json orbit_to_json(const std::vector<Real>& v) {
    json a = json::array();
    for (const auto& x : v) a.push_back(real_to_json(x));
    return a;
}

template <class Real>
std::vector<Real> orbit_from_json(const json& a) {
    std::vector<Real> v;
    v.reserve(a.size());
    for (const auto& x : a) v.push_back(real_from_json<Real>(x));
    return v;
}

inline Check make_check(std::string stage, std::string name, double value, const std::string& rel, double bound) {
    bool pass = rel == "<=" ? value <= bound : rel == "<" ? value < bound : rel == ">=" ? value >= bound : value == bound;
    return {std::move(stage), std::move(name), pass, value, bound, rel};
}

inline json checks_to_json(const std::vector<Check>& cs) {
    json a = json::array();
    for (const auto& c : cs)
        a.push_back({{"stage", c.stage},
                     {"name", c.name},
                     {"pass", c.pass},
                     {"value", c.value},
                     {"relation", c.relation},
                     {"bound", c.bound}});
    return a;
}

/// Runs all stages at one precision; `cover` stages rebuild their maps at the cover precision.
template <class Real>
class Pipeline {
public:
    Pipeline(const ExperimentConfig& c, RunResult& out, OrbitCache& cache, std::ostream* log)
        : c_(c), out_(out), cache_(cache), log_(log) {}

    void run() {
        stage("maps", [&] { maps(); });
        if (c_.wants("rotation")) stage("rotation", [&] { rotation(); });
        if (c_.wants("partition")) stage("partition", [&] { partition(); });
        if (c_.wants("denjoy")) stage("denjoy", [&] { denjoy(); });
        if (c_.wants("partition")) emit_decay_table();
        if (c_.wants("distortion")) stage("distortion", [&] { distortion(); });
        if (c_.wants("conjugacy") || c_.wants("singularity")) stage("conjugacy", [&] { conjugacy(); });
        if (c_.wants("singularity")) stage("singularity", [&] { singularity(); });
        if (c_.wants("cover")) stage("cover", [&] { cover(); });
    }

private:
    template <class Fn>
    void stage(const std::string& name, Fn&& fn) {
        if (out_.failure) return;
        if (log_) *log_ << "[" << name << "] start\n";
        try {
            fn();
        } catch (const Error& e) {
            out_.failure = StageFailure{name, e.kind(), e.what()};
        } catch (const json::exception& e) {
            out_.failure = StageFailure{name, ErrorKind::invalid_argument, e.what()};
        }
        if (log_) *log_ << "[" << name << "] " << (out_.failure ? "failed" : "done") << "\n";
    }

    void check(const std::string& stage, const std::string& name, double value, const std::string& rel, double bound) {
        out_.checks.push_back(make_check(stage, name, value, rel, bound));
    }

    std::vector<std::pair<std::string, const CircleMap<Real>*>> both() const {
        return {{"map1", &pair_.f1}, {"map2", &pair_.f2}};
    }

    void maps() {
        if (!cache_.has("shift1")) cache_.put("shift1", resolve_shift(c_.map1, c_));
        if (!cache_.has("shift2"))
            cache_.put("shift2", c_.map2.family == "conjugate_sine" ? json(nullptr) : resolve_shift(c_.map2, c_));
        shift1_ = cache_.get("shift1");
        shift2_ = cache_.get("shift2");
        pair_ = build_pair<Real>(c_, shift1_, shift2_);
        json j = {{"map1", map_summary(pair_.f1)}, {"map2", map_summary(pair_.f2)}};
        j["x0"] = real_to_json(pair_.x0);
        j["t0"] = real_to_json(pair_.t0);
        out_.report["maps"] = j;
    }

    void rotation() {
        json j;
        Real target = target_value<Real>(c_.target);
        for (auto [name, f] : both()) {
            auto est = rotation_number(*f, c_.orbit_budget, name == "map1" ? pair_.x0 : pair_.t0);
            auto cf = closest_return_quotients(*f, name == "map1" ? pair_.x0 : pair_.t0, 60, c_.orbit_budget);
            j[name] = {{"estimate", rotation_to_json(est)}, {"closest_returns", cf_to_json(cf)}};
            double miss = std::max(to_double(Real(est.lower - target)), to_double(Real(target - est.upper)));
            check("rotation", name + ".target_in_bracket", std::max(miss, 0.0), "<=", c_.tolerance);
        }
        j["target"] = real_to_json(target);
        j["target_cf"] = cf_to_json(continued_fraction_of(target, 20));
        out_.report["rotation"] = j;
    }

    void partition() {
        json j;
        for (auto [name, f] : both()) {
            auto dec = length_decay_fit(*f, Real(0), c_.n_max, c_.fit_from, c_.orbit_budget);
            auto p = dynamical_partition(*f, Real(0), c_.n_max, c_.orbit_budget);
            Real tol = Real(double(p.q_n)) * ldexp(Real(1), 4 - mantissa_bits<Real>());
            auto defects = partition_defects(p, tol);
            j[name] = decay_to_json(dec);
            j[name]["defects"] = defects;
            j[name]["intervals"] = p.size();
            decay_[name] = dec;
            check("partition", name + ".decay_rate", dec.fitted_rate, "<=", dec.lambda_bound + 0.02);
            check("partition", name + ".defects", double(defects.size()), "==", 0);
        }
        out_.report["partition"] = j;
    }

    void denjoy() {
        json j;
        for (auto [name, f] : both()) {
            json levels = json::array();
            std::int64_t total = 0, control = 0;
            for (int n : c_.denjoy_levels) {
                auto rep = denjoy_report(*f, name == "map1" ? pair_.x0 : pair_.t0, n, c_.denjoy_samples,
                                         c_.seed + 1000 * n + (name == "map2"));
                auto neg = denjoy_report(*f, name == "map1" ? pair_.x0 : pair_.t0, n, c_.denjoy_samples,
                                         c_.seed + 1000 * n + (name == "map2"), rep.v / 2);
                auto lj = denjoy_to_json(rep);
                lj["halved_v_violations"] = neg.violations;
                levels.push_back(lj);
                violations_[name][n] = rep.violations;
                total += rep.violations;
                control += neg.violations;
            }
            j[name] = {{"levels", levels}, {"violations", total}, {"halved_v_violations", control}};
            check("denjoy", name + ".violations", double(total), "==", 0);
        }
        out_.report["denjoy"] = j;
    }

    void emit_decay_table() {
        if (decay_.empty()) return;
        CsvTable t({"map", "level", "q_n", "max_len", "rate", "lambda_bound", "violations"});
        for (const auto& [name, dec] : decay_) {
            for (const auto& lv : dec.levels) {
                std::string viol = "NA";
                auto it = violations_.find(name);
                if (it != violations_.end() && it->second.count(lv.n)) viol = std::to_string(it->second.at(lv.n));
                t.row({name, std::to_string(lv.n), std::to_string(lv.q_n), num(lv.max_len), num(lv.rate),
                       num(dec.lambda_bound), viol});
            }
        }
        out_.files["decay.csv"] = t.str();
    }

    void distortion() {
        json j;
        auto diam = geometric_diameters(1e-2, 1e-5, 7);
        for (auto [name, f] : both()) {
            auto smooth = distortion_residuals(*f, ResidualMode::smooth, c_.distortion_trials, c_.seed + 7, diam);
            j[name]["smooth"] = residual_to_json(smooth);
            // projective pieces leave only roundoff, so the slope says nothing there
            if (!smooth.exact_family) check("distortion", name + ".smooth_slope", smooth.slope, ">=", 1.8);
            if (!f->breaks().empty()) {
                auto br = distortion_residuals(*f, ResidualMode::breaks, c_.distortion_trials, c_.seed + 11, diam);
                j[name]["breaks"] = residual_to_json(br);
                if (!br.exact_family) check("distortion", name + ".break_slope", br.slope, ">=", 0.9);
            }
        }
        out_.report["distortion"] = j;
    }

    void conjugacy() {
        std::vector<Real> xs, ts;
        if (cache_.has("orbit1") && cache_.has("orbit2")) {
            xs = orbit_from_json<Real>(cache_.get("orbit1"));
            ts = orbit_from_json<Real>(cache_.get("orbit2"));
        } else {
            check_same_rotation(pair_.f1, pair_.f2, pair_.x0, pair_.t0, c_.orbit_budget);
            xs = forward_orbit(pair_.f1, pair_.x0, c_.orbit_budget, c_.orbit_budget);
            ts = forward_orbit(pair_.f2, pair_.t0, c_.orbit_budget, c_.orbit_budget);
            cache_.put("orbit1", orbit_to_json(xs));
            cache_.put("orbit2", orbit_to_json(ts));
        }
        h_ = conjugacy_from_orbits(xs, ts);
        const auto& h = *h_;
        json j;
        j["table_size"] = h.count;
        j["max_x_gap"] = to_double(h.max_x_gap);
        j["max_t_gap"] = to_double(h.max_t_gap);
        double res = to_double(equivariance_residual(h, pair_.f1, pair_.f2, 1000, c_.seed + 13));
        j["equivariance_residual"] = res;
        check("conjugacy", "equivariance", res, "<=", 10 * to_double(Real(h.max_x_gap + h.max_t_gap)));
        if (pair_.psi) {
            double sup = to_double(smooth_oracle_compare(h, *pair_.psi));
            j["oracle_sup"] = sup;
            check("conjugacy", "oracle_sup", sup, "<=", 1e-9);
        }
        out_.report["conjugacy"] = j;

        CsvTable g({"x", "h"});
        const int points = 1 << 12;
        for (int i = 0; i < points; ++i) {
            Real x = Real(i) / Real(points);
            g.row({num(to_double(x)), num(to_double(h.eval(x)))});
        }
        out_.files["conjugacy_graph.csv"] = g.str();
    }

    /// Expected behaviour of h: singular when total jumps differ, smooth for conjugated pairs.
    std::string expectation() const {
        double j1 = to_double(pair_.f1.total_jump()), j2 = to_double(pair_.f2.total_jump());
        if (std::abs(j1 - j2) > 1e-9 * std::max(j1, j2)) return "singular";
        if (pair_.psi) return "smooth";
        if (pair_.f1.breaks().empty() && pair_.f2.breaks().empty()) return "smooth";
        return "undetermined";
    }

    void singularity() {
        auto rep = singularity_report(*h_, c_.k_lo, c_.k_hi, c_.delta);
        rep.equivariance_residual = out_.report["conjugacy"].value("equivariance_residual", -1.0);
        json j = singularity_to_json(rep);
        std::string expect = expectation();
        j["expectation"] = expect;
        const auto& lo = rep.at(c_.k_lo);
        const auto& hi = rep.at(c_.k_hi);
        if (expect == "singular") {
            check("singularity", "mass_capture_ratio", hi.mass_capture / lo.mass_capture, "<", 0.5);
            check("singularity", "median_slope_drop", lo.median_log10_slope - hi.median_log10_slope, ">=", 0.5);
        } else if (expect == "smooth") {
            double worst = 1;
            for (const auto& lv : rep.levels) worst = std::min(worst, lv.mass_capture);
            check("singularity", "min_mass_capture", worst, ">=", 0.2);
        }
        out_.report["singularity"] = j;

        CsvTable hist({"k", "bin_lo", "bin_hi", "count"});
        CsvTable mass({"k", "cells", "points_per_cell", "density_ok", "mass_capture", "median_log10_slope",
                       "min_slope", "max_slope"});
        for (const auto& lv : rep.levels) {
            for (std::size_t b = 0; b < lv.histogram.counts.size(); ++b)
                hist.row({std::to_string(lv.k), num(lv.histogram.edge(b)), num(lv.histogram.edge(b + 1)),
                          std::to_string(lv.histogram.counts[b])});
            mass.row({std::to_string(lv.k), std::to_string(lv.cells), num(lv.points_per_cell),
                      lv.density_ok ? "1" : "0", num(lv.mass_capture), num(lv.median_log10_slope), num(lv.min_slope),
                      num(lv.max_slope)});
        }
        out_.files["slope_histogram.csv"] = hist.str();
        out_.files["mass_capture.csv"] = mass.str();
    }

    void cover() {
        if (pair_.f1.breaks().empty() && pair_.f2.breaks().empty()) {
            out_.report["cover"] = {{"skipped", "neither map has a break"}};
            return;
        }
        with_precision(c_.cover_precision_bits, [&](auto zero) { cover_at(zero); });
    }

    template <class R>
    void cover_at(R) {
        auto p = build_pair<R>(c_, shift1_, shift2_);
        std::optional<ConjugacyApprox<R>> table;
        ConjugacyView<R> view;
        if (c_.cover_conjugacy == "oracle") {
            view = view_of_diffeo(*p.psi, p.x0);
        } else {
            table = build_conjugacy(p.f1, p.f2, p.x0, p.t0, c_.orbit_budget, {true, c_.orbit_budget});
            view = view_of(*table);
        }
        CoverConstants k{c_.M, c_.zeta, c_.delta_cover, c_.r, c_.m0_override};
        json levels = json::array();
        CsvTable t({"n", "n_used", "case", "s0", "m0", "r_n", "ok", "products_coincide", "gap", "gap_bound"});
        const int last = c_.cover_levels.empty() ? 0 : c_.cover_levels.back();
        for (int n : c_.cover_levels) {
            int used = n;
            auto rep = regular_cover(p.f1, p.f2, view, used, k, c_.orbit_budget);
            while (!(rep.side1.inside_delta && rep.side2.inside_delta) && used < n + 20) {
                used += 2;
                rep = regular_cover(p.f1, p.f2, view, used, k, c_.orbit_budget);
            }
            auto gap = distortion_gap_experiment(p.f1, p.f2, rep);
            json lj = cover_to_json(rep);
            lj["requested_n"] = n;
            lj["gap"] = gap_to_json(gap);
            levels.push_back(lj);
            std::string tag = "n" + std::to_string(n);
            check("cover", tag + ".conditions", rep.ok() ? 1 : 0, "==", 1);
            if (!rep.products_coincide)
                check("cover", tag + ".gap", gap.gap, ">=", gap.gap_bound - 0.05);
            else if (n == last)
                check("cover", tag + ".control_gap", gap.gap, "<", 0.1);
            t.row({std::to_string(n), std::to_string(used), to_string(rep.cover_case), std::to_string(rep.s0),
                   std::to_string(rep.m0), std::to_string(rep.r_n), rep.ok() ? "1" : "0",
                   rep.products_coincide ? "1" : "0", num(gap.gap), num(gap.gap_bound)});
        }
        out_.report["cover"] = {{"precision_bits", c_.cover_precision_bits},
                                {"conjugacy", view.source},
                                {"levels", levels}};
        out_.files["covers.csv"] = t.str();
    }

    const ExperimentConfig& c_;
    RunResult& out_;
    OrbitCache& cache_;
    std::ostream* log_;
    json shift1_, shift2_;
    MapPair<Real> pair_;
    std::optional<ConjugacyApprox<Real>> h_;
    std::map<std::string, DecayReport> decay_;
    std::map<std::string, std::map<int, std::int64_t>> violations_;
};

} // namespace detail

/// Deterministic given the config: no clocks or cache state reach the report.
inline RunResult run_experiment(const ExperimentConfig& c, const RunOptions& opt = {}) {
    RunResult out;
    out.report = json::object();
    out.report["name"] = c.name;
    out.report["config_hash"] = config_hash(c);
    out.report["config"] = config_to_json(c);
    out.report["config"].erase("output_dir");
    OrbitCache cache(opt.cache_dir, orbit_key(c));
    out.cache_hit = cache.hit();
    if (opt.log && cache.enabled()) *opt.log << "[cache] " << (cache.hit() ? "hit" : "miss") << "\n";
    try {
        with_precision(c.precision_bits, [&](auto zero) {
            using Real = decltype(zero);
            detail::Pipeline<Real>(c, out, cache, opt.log).run();
        });
    } catch (const Error& e) {
        out.failure = StageFailure{"setup", e.kind(), e.what()};
    }
    try {
        cache.flush();
    } catch (const std::exception& e) {
        if (opt.log) *opt.log << "[cache] not written: " << e.what() << "\n";
    }
    out.report["checks"] = detail::checks_to_json(out.checks);
    if (out.failure)
        out.report["error"] = {{"stage", out.failure->stage},
                               {"kind", to_string(out.failure->kind)},
                               {"message", out.failure->message}};
    else
        out.report["error"] = nullptr;
    out.report["status"] = out.failure ? "error" : out.passed() ? "ok" : "criterion_failure";
    out.report["exit_code"] = out.exit_code();
    out.files["report.json"] = out.report.dump(2) + "\n";
    return out;
}

/// Writes report.json and the plot-data CSV files into `dir`.
inline void write_outputs(const RunResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, text] : r.files) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) fail(ErrorKind::invalid_argument, "cannot write " + (dir / name).string());
        out << text;
    }
}

} // namespace breaklab::lab
