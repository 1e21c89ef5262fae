#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace breaklab {

struct LinearFit {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
    std::size_t n = 0;
};

inline LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    LinearFit f;
    f.n = x.size();
    if (x.size() < 2) return f;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    f.slope = sxx > 0 ? sxy / sxx : 0;
    f.intercept = my - f.slope * mx;
    f.r2 = (sxx > 0 && syy > 0) ? (sxy * sxy) / (sxx * syy) : 1;
    return f;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2) return hi;
    double lo = *std::max_element(v.begin(), v.begin() + mid);
    return (lo + hi) / 2;
}

} // namespace breaklab
