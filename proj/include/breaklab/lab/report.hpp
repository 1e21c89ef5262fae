#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "../covering.hpp"
#include "../map_io.hpp"

namespace breaklab::lab {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double rational_to_double(const Rational& r) { return r.convert_to<double>(); }

/// Rows of comma-separated cells under a header line.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    CsvTable& row(const std::vector<std::string>& cells) {
        require(cells.size() == columns_.size(), "csv row width differs from the header");
        rows_.push_back(cells);
        return *this;
    }

    std::string str() const {
        std::ostringstream os;
        write_line(os, columns_);
        for (const auto& r : rows_) write_line(os, r);
        return os.str();
    }

    std::size_t size() const { return rows_.size(); }

private:
    static void write_line(std::ostringstream& os, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
        os << '\n';
    }

    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

template <class Real>
json map_summary(const CircleMap<Real>& map) {
    json breaks = json::array();
    for (const auto& b : map.breaks())
        breaks.push_back({{"location", real_to_json(b.location)}, {"jump", real_to_json(b.jump)}});
    return {{"family", map.family()},
            {"shift", real_to_json(map.shift())},
            {"breaks", breaks},
            {"total_jump", to_double(map.total_jump())},
            {"variation", to_double(map.variation_log_df())}};
}

inline json cf_to_json(const ContinuedFractionData& cf) {
    return {{"quotients", cf.quotients},
            {"p", cf.p},
            {"q", cf.q},
            {"rational_tail", cf.rational_tail},
            {"budget_limited", cf.budget_limited}};
}

template <class Real>
json rotation_to_json(const RotationEstimate<Real>& r) {
    return {{"value", real_to_json(r.value)},
            {"error_bound", to_double(r.error_bound)},
            {"lower", real_to_json(r.lower)},
            {"upper", real_to_json(r.upper)},
            {"lower_fraction", {r.lower_num, r.lower_den}},
            {"upper_fraction", {r.upper_num, r.upper_den}},
            {"iterations", r.iterations_used},
            {"periodic", r.periodic}};
}

inline json decay_to_json(const DecayReport& d) {
    json levels = json::array();
    for (const auto& lv : d.levels)
        levels.push_back({{"n", lv.n}, {"q_n", lv.q_n}, {"max_len", lv.max_len}, {"rate", lv.rate}});
    return {{"levels", levels},
            {"fitted_rate", d.fitted_rate},
            {"lambda_bound", d.lambda_bound},
            {"offset", d.offset},
            {"fit_from", d.fit_from},
            {"fit_to", d.fit_to}};
}

inline json denjoy_to_json(const DenjoyReport& d) {
    return {{"level", d.level},
            {"q_n", d.q_n},
            {"q_prev", d.q_prev},
            {"v", d.v},
            {"samples", d.samples.size()},
            {"violations", d.violations},
            {"product_violations", d.product_violations},
            {"ratio_violations", d.ratio_violations},
            {"collisions", d.collisions},
            {"max_abs_log_product", d.max_abs_log_product},
            {"max_abs_log_ratio", d.max_abs_log_ratio}};
}

inline json residual_to_json(const ResidualReport& r) {
    return {{"mode", r.mode == ResidualMode::smooth ? "smooth" : "breaks"},
            {"slope", r.slope},
            {"intercept", r.intercept},
            {"r2", r.r2},
            {"samples", r.n_samples},
            {"exact_family", r.exact_family},
            {"max_residual", r.max_residual},
            {"diameters", r.diameters},
            {"median_residuals", r.median_residuals}};
}

inline json singularity_to_json(const SingularityReport& s) {
    json levels = json::array();
    for (const auto& lv : s.levels)
        levels.push_back({{"k", lv.k},
                          {"cells", lv.cells},
                          {"points_per_cell", lv.points_per_cell},
                          {"density_ok", lv.density_ok},
                          {"median_log10_slope", lv.median_log10_slope},
                          {"min_slope", lv.min_slope},
                          {"max_slope", lv.max_slope},
                          {"mass_capture", lv.mass_capture}});
    return {{"delta", s.delta}, {"levels", levels}};
}

inline json search_to_json(const ClusterSearch& s) {
    json sel = s.selected ? json(*s.selected) : json(nullptr);
    return {{"s0", s.s0},
            {"r", s.r},
            {"scanned_levels", s.scanned_levels},
            {"cluster_counts", s.cluster_counts},
            {"clusters", s.at_s0.clusters.size()},
            {"diameter_ok", s.diameter_ok},
            {"max_diameter", rational_to_double(s.max_diameter)},
            {"separation_ok", s.separation_ok},
            {"separation_literal", s.separation_literal},
            {"min_gap", rational_to_double(s.min_gap)},
            {"selected", sel},
            {"contradiction", s.contradiction}};
}

inline json side_to_json(const CoverSideCheck& c) {
    return {{"applicable", c.applicable},
            {"conditions", std::vector<bool>(c.cond, c.cond + 6)},
            {"ok", c.ok()},
            {"inside_delta", c.inside_delta},
            {"coverage_counts", c.coverage_counts},
            {"coverage_times", c.coverage_times},
            {"disjoint_iterates", c.disjoint_iterates},
            {"ratio_23_12", c.ratio_23_12},
            {"ratio_23_34", c.ratio_23_34},
            {"image_spread", c.image_spread},
            {"cond5_ratio", c.cond5_ratio},
            {"cond6_max", c.cond6_max}};
}

template <class Real>
json cover_to_json(const CoverReport<Real>& c) {
    json z = json::array(), hz = json::array();
    for (int i = 0; i < 4; ++i) {
        z.push_back(format_real(c.z[i]));
        hz.push_back(format_real(c.hz[i]));
    }
    return {{"n", c.n},
            {"case", to_string(c.cover_case)},
            {"s0", c.s0},
            {"m0", c.m0},
            {"K", c.K},
            {"r_n", c.r_n},
            {"q_n", c.q_n},
            {"q_prev", c.q_prev},
            {"d_n", to_double(c.d_n)},
            {"z", z},
            {"hz", hz},
            {"covered1", c.covered1.size()},
            {"covered2", c.covered2.size()},
            {"sigma1", c.sigma1},
            {"sigma2", c.sigma2},
            {"products_coincide", c.products_coincide},
            {"m0_power_check", c.m0_power_check},
            {"break_set_size", c.break_set_size},
            {"search", search_to_json(c.search)},
            {"side1", side_to_json(c.side1)},
            {"side2", side_to_json(c.side2)},
            {"ok", c.ok()}};
}

inline json gap_to_json(const GapReport& g) {
    return {{"dist1", g.dist1},
            {"dist2", g.dist2},
            {"gap", g.gap},
            {"sigma1", g.sigma1},
            {"sigma2", g.sigma2},
            {"lambda_hat", g.lambda_hat},
            {"gap_bound", g.gap_bound}};
}

} // namespace breaklab::lab
