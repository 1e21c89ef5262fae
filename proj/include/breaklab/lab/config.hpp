#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../error.hpp"

namespace breaklab::lab {

using json = nlohmann::json;

inline constexpr std::int64_t kMaxOrbitBudget = std::int64_t(1) << 24;
inline constexpr int kMaxPrecisionBits = 4096;
inline constexpr int kMaxLevel = 30;

inline const std::vector<std::string>& all_diagnostics() {
    static const std::vector<std::string> d = {"rotation", "partition", "denjoy", "distortion",
                                               "conjugacy", "singularity", "cover"};
    return d;
}

/// Numbers stay as JSON so each precision parses them itself ("0.1" strings stay exact).
struct MapConfig {
    std::string family = "mobius";  // mobius | rotation | sine | conjugate_sine
    json breaks = json::array();    // [{"location", "jump"}]
    json amplitude = 0.5;           // sine, conjugate_sine
    json shift;                     // fixed lift shift; tuned when null
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t seed = 1;
    int precision_bits = 53;
    MapConfig map1, map2;
    json target = "golden";  // golden | silver | number
    double tolerance = 1e-12;
    std::int64_t orbit_budget = std::int64_t(1) << 16;
    std::vector<std::string> diagnostics = all_diagnostics();

    int n_max = 16;
    int fit_from = 8;

    std::vector<int> denjoy_levels = {4, 6, 8, 10, 12, 14};
    int denjoy_samples = 1000;

    int distortion_trials = 50;

    int k_lo = 8, k_hi = 14;
    double delta = 0.1;

    std::vector<int> cover_levels = {9, 11, 13};
    int r = 9;
    double M = 2, zeta = 0.5, delta_cover = 0.1;
    int cover_precision_bits = 256;
    std::string cover_conjugacy = "table";  // table | oracle
    int m0_override = 0;

    std::string output_dir;

    bool wants(const std::string& d) const {
        return std::find(diagnostics.begin(), diagnostics.end(), d) != diagnostics.end();
    }
};

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    require(j.is_object(), where + " must be an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) fail(ErrorKind::invalid_argument, "unknown key '" + k + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(ErrorKind::invalid_argument, std::string("bad value for '") + key + "': " + e.what());
    }
}

inline void check_real(const json& v, const std::string& what) {
    require(v.is_number() || v.is_string(), what + " must be a number or a decimal string");
}

inline MapConfig map_from(const json& j, const std::string& where) {
    check_keys(j, {"family", "breaks", "amplitude", "shift"}, where);
    MapConfig m;
    read(j, "family", m.family);
    if (j.contains("breaks")) m.breaks = j.at("breaks");
    if (j.contains("amplitude")) m.amplitude = j.at("amplitude");
    if (j.contains("shift")) m.shift = j.at("shift");
    static const std::set<std::string> fams = {"mobius", "rotation", "sine", "conjugate_sine"};
    require(fams.count(m.family), where + ": unknown family '" + m.family + "'");
    require(m.breaks.is_array(), where + ".breaks must be an array");
    for (const auto& b : m.breaks) {
        check_keys(b, {"location", "jump"}, where + ".breaks[]");
        require(b.contains("location") && b.contains("jump"), where + ": a break needs location and jump");
        check_real(b.at("location"), "break location");
        check_real(b.at("jump"), "break jump");
    }
    require(m.family == "mobius" || m.breaks.empty(), where + ": only mobius maps take breaks");
    check_real(m.amplitude, where + ".amplitude");
    if (!m.shift.is_null()) check_real(m.shift, where + ".shift");
    return m;
}

inline json map_to(const MapConfig& m) {
    return {{"family", m.family}, {"breaks", m.breaks}, {"amplitude", m.amplitude}, {"shift", m.shift}};
}

} // namespace detail

/// Strict parse: unknown keys and out-of-range values are rejected.
inline ExperimentConfig config_from_json(const json& j) {
    using detail::check_keys;
    using detail::read;
    check_keys(j, {"name", "seed", "precision_bits", "map1", "map2", "rotation", "orbit_budget", "diagnostics",
                   "partition", "denjoy", "distortion", "singularity", "cover", "output_dir"},
               "config");
    ExperimentConfig c;
    read(j, "name", c.name);
    read(j, "seed", c.seed);
    read(j, "precision_bits", c.precision_bits);
    if (j.contains("map1")) c.map1 = detail::map_from(j.at("map1"), "map1");
    if (j.contains("map2")) c.map2 = detail::map_from(j.at("map2"), "map2");
    if (j.contains("rotation")) {
        const auto& r = j.at("rotation");
        check_keys(r, {"target", "tolerance"}, "rotation");
        if (r.contains("target")) c.target = r.at("target");
        read(r, "tolerance", c.tolerance);
    }
    read(j, "orbit_budget", c.orbit_budget);
    read(j, "diagnostics", c.diagnostics);
    if (j.contains("partition")) {
        const auto& p = j.at("partition");
        check_keys(p, {"n_max", "fit_from"}, "partition");
        read(p, "n_max", c.n_max);
        read(p, "fit_from", c.fit_from);
    }
    if (j.contains("denjoy")) {
        const auto& d = j.at("denjoy");
        check_keys(d, {"levels", "samples"}, "denjoy");
        read(d, "levels", c.denjoy_levels);
        read(d, "samples", c.denjoy_samples);
    }
    if (j.contains("distortion")) {
        const auto& d = j.at("distortion");
        check_keys(d, {"trials"}, "distortion");
        read(d, "trials", c.distortion_trials);
    }
    if (j.contains("singularity")) {
        const auto& s = j.at("singularity");
        check_keys(s, {"k_range", "delta"}, "singularity");
        if (s.contains("k_range")) {
            std::vector<int> k;
            read(s, "k_range", k);
            require(k.size() == 2, "singularity.k_range must be [k_lo, k_hi]");
            c.k_lo = k[0];
            c.k_hi = k[1];
        }
        read(s, "delta", c.delta);
    }
    if (j.contains("cover")) {
        const auto& v = j.at("cover");
        check_keys(v, {"levels", "r", "M", "zeta", "delta", "precision_bits", "conjugacy", "m0_override"}, "cover");
        read(v, "levels", c.cover_levels);
        read(v, "r", c.r);
        read(v, "M", c.M);
        read(v, "zeta", c.zeta);
        read(v, "delta", c.delta_cover);
        read(v, "precision_bits", c.cover_precision_bits);
        read(v, "conjugacy", c.cover_conjugacy);
        read(v, "m0_override", c.m0_override);
    }
    read(j, "output_dir", c.output_dir);

    // ranges
    auto bits_ok = [](int b) { return b == 53 || (b > 53 && b <= kMaxPrecisionBits); };
    require(bits_ok(c.precision_bits), "precision_bits must be 53 or in (53, 4096]");
    require(bits_ok(c.cover_precision_bits), "cover.precision_bits must be 53 or in (53, 4096]");
    require(c.target.is_string() || c.target.is_number(), "rotation.target must be a name or a number");
    if (c.target.is_string()) {
        auto t = c.target.get<std::string>();
        if (t != "golden" && t != "silver") {
            char* end = nullptr;
            double v = std::strtod(t.c_str(), &end);
            require(end && *end == '\0' && v > 0 && v < 1, "rotation.target must be golden, silver or in (0, 1)");
        }
    } else {
        double v = c.target.get<double>();
        require(v > 0 && v < 1, "rotation.target must lie in (0, 1)");
    }
    require(c.tolerance > 0 && c.tolerance < 1e-3, "rotation.tolerance must lie in (0, 1e-3)");
    require(c.orbit_budget >= 16 && c.orbit_budget <= kMaxOrbitBudget, "orbit_budget must lie in [16, 2^24]");
    for (const auto& d : c.diagnostics)
        require(std::find(all_diagnostics().begin(), all_diagnostics().end(), d) != all_diagnostics().end(),
                "unknown diagnostic '" + d + "'");
    require(c.n_max >= 2 && c.n_max <= kMaxLevel, "partition.n_max must lie in [2, 30]");
    require(c.fit_from >= 1 && c.fit_from < c.n_max, "partition.fit_from must lie in [1, n_max)");
    for (int n : c.denjoy_levels) require(n >= 1 && n <= kMaxLevel, "denjoy levels must lie in [1, 30]");
    require(c.denjoy_samples >= 1 && c.denjoy_samples <= 1000000, "denjoy.samples must lie in [1, 10^6]");
    require(c.distortion_trials >= 1 && c.distortion_trials <= 100000, "distortion.trials must lie in [1, 10^5]");
    require(c.k_lo >= 1 && c.k_lo <= c.k_hi && c.k_hi <= 22, "singularity.k_range must satisfy 1 <= k_lo <= k_hi <= 22");
    require(c.delta > 0 && c.delta < 1, "singularity.delta must lie in (0, 1)");
    for (int n : c.cover_levels) require(n >= 1 && n <= kMaxLevel && n % 2 == 1, "cover levels must be odd, <= 30");
    require(c.r >= 1 && c.r <= 64, "cover.r must lie in [1, 64]");
    require(c.M > 0 && c.zeta > 0 && c.zeta < 1 && c.delta_cover > 0 && c.delta_cover < 0.5,
            "cover constants need M > 0, 0 < zeta < 1, 0 < delta < 0.5");
    require(c.cover_conjugacy == "table" || c.cover_conjugacy == "oracle", "cover.conjugacy must be table or oracle");
    require(c.cover_conjugacy == "table" || c.map2.family == "conjugate_sine",
            "cover.conjugacy = oracle needs map2.family = conjugate_sine");
    require(c.map1.family != "conjugate_sine", "map1 cannot be conjugate_sine");
    return c;
}

/// Every field written out, so equal experiments have equal documents.
inline json config_to_json(const ExperimentConfig& c) {
    return {{"name", c.name},
            {"seed", c.seed},
            {"precision_bits", c.precision_bits},
            {"map1", detail::map_to(c.map1)},
            {"map2", detail::map_to(c.map2)},
            {"rotation", {{"target", c.target}, {"tolerance", c.tolerance}}},
            {"orbit_budget", c.orbit_budget},
            {"diagnostics", c.diagnostics},
            {"partition", {{"n_max", c.n_max}, {"fit_from", c.fit_from}}},
            {"denjoy", {{"levels", c.denjoy_levels}, {"samples", c.denjoy_samples}}},
            {"distortion", {{"trials", c.distortion_trials}}},
            {"singularity", {{"k_range", {c.k_lo, c.k_hi}}, {"delta", c.delta}}},
            {"cover",
             {{"levels", c.cover_levels},
              {"r", c.r},
              {"M", c.M},
              {"zeta", c.zeta},
              {"delta", c.delta_cover},
              {"precision_bits", c.cover_precision_bits},
              {"conjugacy", c.cover_conjugacy},
              {"m0_override", c.m0_override}}},
            {"output_dir", c.output_dir}};
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

/// Hash of the fields that determine the maps and orbit tables.
inline std::string orbit_key(const ExperimentConfig& c) {
    json j = {{"precision_bits", c.precision_bits},
              {"map1", detail::map_to(c.map1)},
              {"map2", detail::map_to(c.map2)},
              {"target", c.target},
              {"tolerance", c.tolerance},
              {"orbit_budget", c.orbit_budget}};
    return hex64(fnv1a(j.dump()));
}

inline std::string config_hash(const ExperimentConfig& c) {
    json j = config_to_json(c);
    j.erase("output_dir");
    return hex64(fnv1a(j.dump()));
}

// ---------------------------------------------------------------------------

inline std::filesystem::path preset_dir() {
    if (const char* env = std::getenv("BREAKLAB_PRESET_DIR")) return env;
#ifdef BREAKLAB_PRESETS
    return BREAKLAB_PRESETS;
#else
    return "presets";
#endif
}

inline json read_json_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) fail(ErrorKind::invalid_argument, "cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::invalid_argument, p.string() + ": " + e.what());
    }
}

/// A file path, or the name of a preset in the preset directory.
inline std::filesystem::path resolve_config_path(const std::string& name) {
    std::filesystem::path p(name);
    if (std::filesystem::exists(p)) return p;
    auto q = preset_dir() / (name + ".json");
    if (std::filesystem::exists(q)) return q;
    fail(ErrorKind::invalid_argument, "no config file or preset named '" + name + "'");
}

/// Applies "extends": <preset> chains as JSON merge patches.
inline json expand_presets(json j, int depth = 0) {
    require(depth < 8, "preset chain too deep");
    if (!j.is_object() || !j.contains("extends")) return j;
    std::string base_name = j.at("extends").get<std::string>();
    j.erase("extends");
    json base = expand_presets(read_json_file(resolve_config_path(base_name)), depth + 1);
    base.merge_patch(j);
    return base;
}

inline ExperimentConfig load_config(const std::string& name_or_path) {
    return config_from_json(expand_presets(read_json_file(resolve_config_path(name_or_path))));
}

} // namespace breaklab::lab
