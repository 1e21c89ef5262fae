#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "circle_map.hpp"

namespace breaklab {

using json = nlohmann::json;

/// Numbers at 53 bits (shortest round-trip form), decimal strings above.
template <class Real>
json real_to_json(const Real& x) {
    if constexpr (is_extended_v<Real>)
        return format_real(x);
    else
        return x;
}

template <class Real>
Real real_from_json(const json& j) {
    if (j.is_string()) return parse_real<Real>(j.get<std::string>());
    require(j.is_number(), "expected a number");
    return Real(j.get<double>());
}

/// {"breaks": [{"location", "jump"}...], "lift_shift", "family": "mobius", "precision_bits"}
template <class Real>
json map_to_json(const CircleMap<Real>& map) {
    require(map.family() == "mobius", "only mobius maps serialize to a map document");
    json breaks = json::array();
    for (const auto& b : map.breaks())
        breaks.push_back({{"location", real_to_json(b.location)}, {"jump", real_to_json(b.jump)}});
    return {{"breaks", breaks},
            {"lift_shift", real_to_json(map.shift())},
            {"family", "mobius"},
            {"precision_bits", mantissa_bits<Real>()}};
}

template <class Real>
std::vector<BreakSpec<Real>> breaks_from_json(const json& j) {
    std::vector<BreakSpec<Real>> out;
    if (!j.contains("breaks")) return out;
    require(j.at("breaks").is_array(), "breaks must be an array");
    for (const auto& b : j.at("breaks"))
        out.push_back({real_from_json<Real>(b.at("location")), real_from_json<Real>(b.at("jump"))});
    return out;
}

template <class Real>
CircleMap<Real> map_from_json(const json& j) {
    std::string family = j.value("family", "mobius");
    require(family == "mobius", "unknown map family: " + family);
    Real shift = j.contains("lift_shift") ? real_from_json<Real>(j.at("lift_shift")) : Real(0);
    return make_piecewise_mobius<Real>(breaks_from_json<Real>(j), shift);
}

} // namespace breaklab
