#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "breaklab/lab/run.hpp"

using namespace breaklab;
using namespace breaklab::lab;

namespace {

struct MapFlags {
    std::optional<std::string> family, breaks, amplitude, shift;
};

struct Flags {
    std::optional<std::string> config, out, cache, target;
    std::optional<double> tol;
    std::optional<int> precision;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> budget;
    MapFlags m1, m2;
    std::optional<int> n_max, fit_from, samples, trials, k_lo, k_hi, r, cover_precision, m0;
    std::optional<std::string> levels, cover_levels, conjugacy;
    std::optional<double> delta, M, zeta, delta_cover;
    bool quiet = false;
    // cf only
    std::optional<std::string> value;
    int depth = 20;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

json parse_breaks(const std::string& text) {
    json a = json::array();
    for (const auto& item : split(text, ',')) {
        auto parts = split(item, ':');
        require(parts.size() == 2, "breaks are written location:jump[,location:jump...]");
        a.push_back({{"location", parts[0]}, {"jump", parts[1]}});
    }
    return a;
}

std::vector<int> parse_ints(const std::string& text) {
    std::vector<int> v;
    for (const auto& s : split(text, ',')) v.push_back(std::stoi(s));
    return v;
}

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "base config file or preset name");
    cmd->add_option("--out", f.out, "directory for report.json and CSV files");
    cmd->add_option("--cache", f.cache, "orbit cache directory (default: $BREAKLAB_CACHE_DIR)");
    cmd->add_option("--target", f.target, "rotation number: golden, silver or a decimal");
    cmd->add_option("--tol", f.tol, "tuning tolerance");
    cmd->add_option("--precision", f.precision, "mantissa bits (53 = double)");
    cmd->add_option("--seed", f.seed, "sampling seed");
    cmd->add_option("--budget", f.budget, "orbit budget N");
    cmd->add_option("--family1", f.m1.family, "mobius | rotation | sine");
    cmd->add_option("--breaks1", f.m1.breaks, "breaks of map1 as location:jump,...");
    cmd->add_option("--amplitude1", f.m1.amplitude, "sine amplitude of map1");
    cmd->add_option("--shift1", f.m1.shift, "fixed lift shift of map1 (tuned otherwise)");
    cmd->add_option("--family2", f.m2.family, "mobius | rotation | sine | conjugate_sine");
    cmd->add_option("--breaks2", f.m2.breaks, "breaks of map2 as location:jump,...");
    cmd->add_option("--amplitude2", f.m2.amplitude, "sine amplitude of map2");
    cmd->add_option("--shift2", f.m2.shift, "fixed lift shift of map2");
    cmd->add_flag("--quiet", f.quiet, "no progress lines on stderr");
}

json map_patch(const MapFlags& m) {
    json j = json::object();
    if (m.family) j["family"] = *m.family;
    if (m.breaks) j["breaks"] = parse_breaks(*m.breaks);
    if (m.amplitude) j["amplitude"] = *m.amplitude;
    if (m.shift) j["shift"] = *m.shift;
    return j;
}

json build_patch(const Flags& f, const std::vector<std::string>& diagnostics) {
    json p = json::object();
    if (!diagnostics.empty()) p["diagnostics"] = diagnostics;
    if (f.target) p["rotation"]["target"] = *f.target;
    if (f.tol) p["rotation"]["tolerance"] = *f.tol;
    if (f.precision) p["precision_bits"] = *f.precision;
    if (f.seed) p["seed"] = *f.seed;
    if (f.budget) p["orbit_budget"] = *f.budget;
    if (auto m = map_patch(f.m1); !m.empty()) p["map1"] = m;
    if (auto m = map_patch(f.m2); !m.empty()) p["map2"] = m;
    if (f.n_max) p["partition"]["n_max"] = *f.n_max;
    if (f.fit_from) p["partition"]["fit_from"] = *f.fit_from;
    if (f.levels) p["denjoy"]["levels"] = parse_ints(*f.levels);
    if (f.samples) p["denjoy"]["samples"] = *f.samples;
    if (f.trials) p["distortion"]["trials"] = *f.trials;
    if (f.k_lo || f.k_hi) p["singularity"]["k_range"] = {f.k_lo.value_or(8), f.k_hi.value_or(14)};
    if (f.delta) p["singularity"]["delta"] = *f.delta;
    if (f.cover_levels) p["cover"]["levels"] = parse_ints(*f.cover_levels);
    if (f.r) p["cover"]["r"] = *f.r;
    if (f.M) p["cover"]["M"] = *f.M;
    if (f.zeta) p["cover"]["zeta"] = *f.zeta;
    if (f.delta_cover) p["cover"]["delta"] = *f.delta_cover;
    if (f.cover_precision) p["cover"]["precision_bits"] = *f.cover_precision;
    if (f.conjugacy) p["cover"]["conjugacy"] = *f.conjugacy;
    if (f.m0) p["cover"]["m0_override"] = *f.m0;
    if (f.out) p["output_dir"] = *f.out;
    return p;
}

int execute(const Flags& f, const std::vector<std::string>& diagnostics, const std::vector<std::string>& sections) {
    ExperimentConfig cfg;
    try {
        json base = f.config ? expand_presets(read_json_file(resolve_config_path(*f.config))) : json::object();
        base.merge_patch(build_patch(f, diagnostics));
        cfg = config_from_json(base);
    } catch (const Error& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return exit_invalid_config;
    } catch (const std::exception& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return exit_invalid_config;
    }
    RunOptions opt;
    opt.cache_dir = f.cache ? std::optional<std::filesystem::path>(*f.cache) : cache_dir_from_env();
    opt.log = f.quiet ? nullptr : &std::cerr;
    auto res = run_experiment(cfg, opt);
    if (!cfg.output_dir.empty()) {
        try {
            write_outputs(res, cfg.output_dir);
        } catch (const Error& e) {
            std::cerr << e.what() << "\n";
            return exit_invalid_config;
        }
    }
    json shown = json::object();
    if (sections.empty()) {
        shown = res.report;
        shown.erase("config");
    } else {
        for (const auto& s : sections)
            if (res.report.contains(s)) shown[s] = res.report[s];
        shown["checks"] = res.report["checks"];
        shown["status"] = res.report["status"];
        shown["error"] = res.report["error"];
    }
    std::cout << shown.dump(2) << "\n";
    if (res.failure) std::cerr << "stage " << res.failure->stage << " failed: " << res.failure->message << "\n";
    for (const auto& c : res.checks)
        if (!c.pass)
            std::cerr << "check failed: " << c.stage << "/" << c.name << " = " << num(c.value) << " (needs "
                      << c.relation << " " << num(c.bound) << ")\n";
    return res.exit_code();
}

int continued_fraction(const Flags& f) {
    try {
        return with_precision(f.precision.value_or(53), [&](auto zero) {
            using Real = decltype(zero);
            std::string v = *f.value;
            Real x = v == "golden" ? golden_mean<Real>() : v == "silver" ? silver_mean<Real>() : parse_real<Real>(v);
            require(x > 0 && x < 1, "--value must lie in (0, 1)");
            auto cf = continued_fraction_of(x, f.depth);
            std::cout << json{{"value", format_real(x)}, {"continued_fraction", lab::cf_to_json(cf)}}.dump(2) << "\n";
            return int(exit_ok);
        });
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return e.kind() == ErrorKind::invalid_argument ? exit_invalid_config : exit_precision;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return exit_invalid_config;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Circle maps with breaks: rotation, partitions, distortion, conjugacy and covers"};
    app.require_subcommand(1);
    Flags f;

    std::string run_config;
    auto* run = app.add_subcommand("run", "run every diagnostic listed in a config file or preset");
    run->add_option("config", run_config, "config file or preset name")->required();
    run->add_option("--out", f.out, "override output_dir");
    run->add_option("--cache", f.cache, "orbit cache directory (default: $BREAKLAB_CACHE_DIR)");
    run->add_flag("--quiet", f.quiet, "no progress lines on stderr");

    auto* rho = app.add_subcommand("rho", "rotation numbers and closest-return times");
    add_common(rho, f);

    auto* cf = app.add_subcommand("cf", "continued fraction of a number, or of the maps' rotation numbers");
    add_common(cf, f);
    cf->add_option("--value", f.value, "golden, silver or a decimal in (0, 1)");
    cf->add_option("--depth", f.depth, "number of partial quotients");

    auto* part = app.add_subcommand("partition", "dynamical partitions and their validity");
    auto* decay = app.add_subcommand("decay", "decay of the longest partition interval");
    for (auto* c : {part, decay}) {
        add_common(c, f);
        c->add_option("--n-max", f.n_max, "deepest level");
        c->add_option("--fit-from", f.fit_from, "first level of the geometric fit");
    }

    auto* denjoy = app.add_subcommand("denjoy", "sampled Denjoy product and ratio bounds");
    add_common(denjoy, f);
    denjoy->add_option("--levels", f.levels, "levels as n,n,...");
    denjoy->add_option("--samples", f.samples, "samples per level");

    auto* dist = app.add_subcommand("distortion", "cross-ratio distortion residuals");
    add_common(dist, f);
    dist->add_option("--trials", f.trials, "random quadruple families");

    auto* conj = app.add_subcommand("conjugacy", "orbit-matched conjugacy table");
    add_common(conj, f);

    auto* sing = app.add_subcommand("singularity", "dyadic slope statistics of the conjugacy");
    add_common(sing, f);
    sing->add_option("--k-lo", f.k_lo, "coarsest dyadic level");
    sing->add_option("--k-hi", f.k_hi, "finest dyadic level");
    sing->add_option("--delta", f.delta, "mass fraction left out of m(k, delta)");

    auto* cover = app.add_subcommand("cover", "regular covers and the distortion gap");
    add_common(cover, f);
    cover->add_option("--levels", f.cover_levels, "odd levels as n,n,...");
    cover->add_option("--r", f.r, "level stride of the s0 search");
    cover->add_option("--M", f.M, "comparability constant M");
    cover->add_option("--zeta", f.zeta, "position bound zeta");
    cover->add_option("--delta-cover", f.delta_cover, "neighbourhood radius delta");
    cover->add_option("--cover-precision", f.cover_precision, "mantissa bits for covers");
    cover->add_option("--conjugacy", f.conjugacy, "table | oracle");
    cover->add_option("--m0", f.m0, "raise m0 to at least this");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : exit_invalid_config;
    }

    if (*run) {
        f.config = run_config;
        return execute(f, {}, {});
    }
    if (*rho) return execute(f, {"rotation"}, {"maps", "rotation"});
    if (*cf) {
        if (f.value) return continued_fraction(f);
        return execute(f, {"rotation"}, {"rotation"});
    }
    if (*part) return execute(f, {"partition"}, {"partition"});
    if (*decay) return execute(f, {"partition"}, {"partition"});
    if (*denjoy) return execute(f, {"denjoy"}, {"denjoy"});
    if (*dist) return execute(f, {"distortion"}, {"distortion"});
    if (*conj) return execute(f, {"conjugacy"}, {"conjugacy"});
    if (*sing) return execute(f, {"singularity"}, {"conjugacy", "singularity"});
    if (*cover) return execute(f, {"cover"}, {"cover"});
    return exit_invalid_config;
}
