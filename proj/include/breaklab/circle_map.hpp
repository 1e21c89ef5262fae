#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "circle.hpp"

namespace breaklab {

enum class Side { left, right };

/// A break point b with jump ratio DF(b-)/DF(b+).
template <class Real>
struct BreakSpec {
    Real location;
    Real jump;
};

inline constexpr std::int64_t kDefaultOrbitBudget = std::int64_t(1) << 28;

/// Lift F of a circle homeomorphism with F(x+1) = F(x) + 1.
template <class Real>
class LiftModel {
public:
    virtual ~LiftModel() = default;

    virtual Real value(const Real& x) const = 0;
    virtual Real derivative(const Real& x, Side side) const = 0;
    virtual Real second_derivative(const Real& x, Side side) const = 0;
    virtual Real inverse(const Real& y) const = 0;
    /// Sorted by location in [0, 1).
    virtual const std::vector<BreakSpec<Real>>& breaks() const = 0;
    virtual Real variation_log_df() const = 0;
    virtual std::string family() const = 0;
    /// Every continuity piece is fractional-linear.
    virtual bool projective() const { return false; }
};

// ---------------------------------------------------------------------------

/// Piecewise fractional-linear lift, one piece per continuity interval.
///
/// Piece i covers [b_i, b_{i+1}] with length L_i and image length M_i = s_i L_i:
///   F(b_i + L_i v) = F(b_i) + M_i phi_i(v),  phi_i(v) = v / (c_i + (1 - c_i) v).
/// phi_i'(0) = 1/c_i and phi_i'(1) = c_i. With kappa_i = c_i^2 chosen as
/// log kappa_i = L_i log(total jump) the slopes s_i close up around the circle
/// automatically; the remaining scale is fixed by sum M_i = 1 and F(b_0) = b_0.
template <class Real>
class MobiusLift final : public LiftModel<Real> {
public:
    explicit MobiusLift(std::vector<BreakSpec<Real>> breaks) : breaks_(std::move(breaks)) {
        using std::exp;
        using std::log;
        using std::sqrt;
        using std::abs;
        for (auto& b : breaks_) {
            require(b.jump > 0, "break jump must be positive");
            b.location = reduce(b.location);
        }
        std::sort(breaks_.begin(), breaks_.end(),
                  [](const auto& a, const auto& b) { return a.location < b.location; });
        for (std::size_t i = 1; i < breaks_.size(); ++i)
            require(breaks_[i].location != breaks_[i - 1].location, "coincident break locations");
        const std::size_t m = breaks_.size();
        if (m == 0) return;

        origin_ = breaks_[0].location;
        Real log_total = 0;
        for (const auto& b : breaks_) log_total += log(b.jump);

        offsets_.resize(m + 1);
        lengths_.resize(m);
        for (std::size_t i = 0; i < m; ++i) offsets_[i] = breaks_[i].location - origin_;
        offsets_[m] = 1;
        for (std::size_t i = 0; i < m; ++i) lengths_[i] = offsets_[i + 1] - offsets_[i];

        c_.resize(m);
        std::vector<Real> log_kappa(m);
        for (std::size_t i = 0; i < m; ++i) {
            log_kappa[i] = lengths_[i] * log_total;
            c_[i] = exp(log_kappa[i] / 2);
        }
        // jump at b_i = DF(b_i-)/DF(b_i+) = s_{i-1} c_{i-1} / (s_i / c_i)
        std::vector<Real> log_s(m);
        log_s[0] = 0;
        for (std::size_t i = 1; i < m; ++i)
            log_s[i] = log_s[i - 1] + (log_kappa[i - 1] + log_kappa[i]) / 2 - log(breaks_[i].jump);
        Real closure = log_s[m - 1] + (log_kappa[m - 1] + log_kappa[0]) / 2 - log(breaks_[0].jump);
        if (abs(closure) > Real(1e-10))
            fail(ErrorKind::invalid_argument, "piece chain does not close up");

        Real mass = 0;
        for (std::size_t i = 0; i < m; ++i) mass += exp(log_s[i]) * lengths_[i];
        slopes_.resize(m);
        image_offsets_.resize(m + 1);
        image_lengths_.resize(m);
        image_offsets_[0] = 0;
        for (std::size_t i = 0; i < m; ++i) {
            slopes_[i] = exp(log_s[i]) / mass;
            image_lengths_[i] = i + 1 == m ? Real(1 - image_offsets_[i]) : Real(slopes_[i] * lengths_[i]);
            image_offsets_[i + 1] = image_offsets_[i] + image_lengths_[i];
            require(image_lengths_[i] > 0, "piece chain is not monotone");
        }
        image_offsets_[m] = 1;

        variation_ = 0;
        for (std::size_t i = 0; i < m; ++i) variation_ += abs(log_kappa[i]) + abs(log(breaks_[i].jump));
    }

    Real value(const Real& x) const override {
        if (breaks_.empty()) return x;
        auto [k, u] = split(x);
        std::size_t i = piece_right(u);
        Real v = (u - offsets_[i]) / lengths_[i];
        return origin_ + Real(k) + image_offsets_[i] + image_lengths_[i] * phi(i, v);
    }

    Real derivative(const Real& x, Side side) const override {
        if (breaks_.empty()) return 1;
        auto [i, v] = locate(x, side);
        Real den = c_[i] + (1 - c_[i]) * v;
        return slopes_[i] * c_[i] / (den * den);
    }

    Real second_derivative(const Real& x, Side side) const override {
        if (breaks_.empty()) return 0;
        auto [i, v] = locate(x, side);
        Real den = c_[i] + (1 - c_[i]) * v;
        return -2 * slopes_[i] * c_[i] * (1 - c_[i]) / (den * den * den * lengths_[i]);
    }

    Real inverse(const Real& y) const override {
        if (breaks_.empty()) return y;
        auto [k, w] = split(y);
        std::size_t i = std::upper_bound(image_offsets_.begin(), image_offsets_.end() - 1, w) - image_offsets_.begin() - 1;
        Real t = (w - image_offsets_[i]) / image_lengths_[i];
        Real v = t * c_[i] / ((1 - t) + c_[i] * t);
        return origin_ + Real(k) + offsets_[i] + lengths_[i] * v;
    }

    const std::vector<BreakSpec<Real>>& breaks() const override { return breaks_; }
    Real variation_log_df() const override { return variation_; }
    std::string family() const override { return "mobius"; }
    bool projective() const override { return true; }

private:
    std::pair<std::int64_t, Real> split(const Real& x) const {
        Real rel = x - origin_;
        std::int64_t k = floor_int(rel);
        Real u = rel - Real(k);
        if (u >= 1) {
            u -= 1;
            ++k;
        }
        return {k, u};
    }

    std::size_t piece_right(const Real& u) const {
        return std::upper_bound(offsets_.begin(), offsets_.end() - 1, u) - offsets_.begin() - 1;
    }

    /// Piece index and local coordinate, with the left side at a piece start
    /// taken from the previous piece at v = 1.
    std::pair<std::size_t, Real> locate(const Real& x, Side side) const {
        auto [k, u] = split(x);
        std::size_t i = piece_right(u);
        if (side == Side::left && u == offsets_[i]) {
            i = (i == 0 ? breaks_.size() : i) - 1;
            return {i, Real(1)};
        }
        return {i, Real((u - offsets_[i]) / lengths_[i])};
    }

    Real phi(std::size_t i, const Real& v) const { return v / (c_[i] + (1 - c_[i]) * v); }

    std::vector<BreakSpec<Real>> breaks_;
    Real origin_ = 0;
    std::vector<Real> offsets_, lengths_, c_, slopes_, image_offsets_, image_lengths_;
    Real variation_ = 0;
};

// ---------------------------------------------------------------------------

/// psi(x) = x + a sin(2 pi x) / (2 pi), a smooth diffeomorphism for |a| < 1.
template <class Real>
class SineLift final : public LiftModel<Real> {
public:
    explicit SineLift(Real amplitude) : a_(std::move(amplitude)), two_pi_(2 * pi<Real>()) {
        using std::abs;
        require(abs(a_) < 1, "sine amplitude must satisfy |a| < 1");
    }

    Real value(const Real& x) const override {
        using std::sin;
        return x + a_ * sin(two_pi_ * x) / two_pi_;
    }
    Real derivative(const Real& x, Side) const override {
        using std::cos;
        return 1 + a_ * cos(two_pi_ * x);
    }
    Real second_derivative(const Real& x, Side) const override {
        using std::sin;
        return -a_ * two_pi_ * sin(two_pi_ * x);
    }

    /// Newton from y, safeguarded by the bracket [y - a/2pi, y + a/2pi].
    Real inverse(const Real& y) const override {
        using std::abs;
        Real r = abs(a_) / two_pi_;
        Real lo = y - r, hi = y + r, x = y;
        Real tol = 4 * unit_roundoff<Real>() * (1 + abs(y));
        for (int it = 0; it < 200; ++it) {
            Real g = value(x) - y;
            if (g == 0) return x;
            if (g > 0) hi = x; else lo = x;
            Real step = g / derivative(x, Side::right);
            Real next = x - step;
            if (!(next > lo && next < hi)) next = (lo + hi) / 2;
            if (abs(next - x) <= tol) return next;
            x = next;
        }
        return x;
    }

    const std::vector<BreakSpec<Real>>& breaks() const override { return none_; }

    Real variation_log_df() const override {
        using std::abs;
        using std::log;
        return 2 * abs(log((1 + a_) / (1 - a_)));
    }
    std::string family() const override { return "sine"; }

    const Real& amplitude() const { return a_; }

private:
    Real a_;
    Real two_pi_;
    std::vector<BreakSpec<Real>> none_;
};

// ---------------------------------------------------------------------------

template <class Real>
class CircleMap {
public:
    CircleMap() : CircleMap(std::make_shared<MobiusLift<Real>>(std::vector<BreakSpec<Real>>{}), Real(0)) {}

    CircleMap(std::shared_ptr<const LiftModel<Real>> model, Real shift)
        : model_(std::move(model)), shift_(std::move(shift)) {}

    Real lift(const Real& x) const { return model_->value(x) + shift_; }
    Real operator()(const Real& x) const { return reduce(lift(x)); }
    Real inverse_lift(const Real& y) const { return model_->inverse(y - shift_); }
    Real inverse(const Real& x) const { return reduce(inverse_lift(x)); }

    Real derivative(const Real& x, Side side = Side::right) const { return model_->derivative(x, side); }
    Real second_derivative(const Real& x, Side side = Side::right) const {
        return model_->second_derivative(x, side);
    }

    const std::vector<BreakSpec<Real>>& breaks() const { return model_->breaks(); }

    Real total_jump() const {
        Real p = 1;
        for (const auto& b : breaks()) p *= b.jump;
        return p;
    }

    Real variation_log_df() const { return model_->variation_log_df(); }
    const Real& shift() const { return shift_; }
    CircleMap with_shift(Real t) const { return CircleMap(model_, std::move(t)); }
    const LiftModel<Real>& model() const { return *model_; }
    const std::shared_ptr<const LiftModel<Real>>& model_ptr() const { return model_; }
    std::string family() const { return model_->family(); }
    bool projective() const { return model_->projective(); }

private:
    std::shared_ptr<const LiftModel<Real>> model_;
    Real shift_;
};

// ---------------------------------------------------------------------------

/// Lift of g o F o g^{-1}. Breaks come from F's breaks and from both sides of g's.
template <class Real>
class ConjugatedLift final : public LiftModel<Real> {
public:
    ConjugatedLift(CircleMap<Real> outer, CircleMap<Real> inner)
        : g_(std::move(outer)), f_(std::move(inner)) {
        using std::abs;
        using std::log;
        struct Raw {
            Real y, u, w, jump;
        };
        std::vector<Raw> raw;
        for (const auto& b : f_.breaks()) {
            Real w = f_.lift(b.location);
            raw.push_back({reduce(g_.lift(b.location)), b.location, w, b.jump});
        }
        for (const auto& c : g_.breaks()) {
            // g^{-1} breaks at g(c); g breaks where F(u) = c
            raw.push_back({reduce(g_.lift(c.location)), c.location, f_.lift(c.location), 1 / c.jump});
            Real u = f_.inverse_lift(c.location);
            raw.push_back({reduce(g_.lift(u)), u, c.location, c.jump});
        }
        std::sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) { return a.y < b.y; });
        Real tol = 64 * unit_roundoff<Real>();
        for (const auto& r : raw) {
            if (!anchors_.empty() && circular_distance(anchors_.back().y, r.y) <= tol) {
                breaks_.back().jump *= r.jump;
                continue;
            }
            anchors_.push_back({r.y, r.u, r.w});
            breaks_.push_back({r.y, r.jump});
        }
        for (std::size_t i = breaks_.size(); i-- > 0;) {
            if (abs(log(breaks_[i].jump)) <= 1e3 * tol) {
                breaks_.erase(breaks_.begin() + i);
                anchors_.erase(anchors_.begin() + i);
            }
        }
        variation_ = measure_variation();
    }

    Real value(const Real& x) const override { return g_.lift(f_.lift(g_.inverse_lift(x))); }

    Real derivative(const Real& x, Side side) const override {
        auto [u, w] = inner_points(x);
        return g_.derivative(w, side) * f_.derivative(u, side) / g_.derivative(u, side);
    }

    Real second_derivative(const Real& x, Side side) const override {
        auto [u, w] = inner_points(x);
        Real gu = g_.derivative(u, side), guu = g_.second_derivative(u, side);
        Real fu = f_.derivative(u, side), fuu = f_.second_derivative(u, side);
        Real h1 = fu / gu;
        Real h2 = fuu / (gu * gu) - fu * guu / (gu * gu * gu);
        return g_.second_derivative(w, side) * h1 * h1 + g_.derivative(w, side) * h2;
    }

    Real inverse(const Real& y) const override { return g_.lift(f_.inverse_lift(g_.inverse_lift(y))); }

    const std::vector<BreakSpec<Real>>& breaks() const override { return breaks_; }
    Real variation_log_df() const override { return variation_; }
    std::string family() const override { return "conjugate(" + g_.family() + "," + f_.family() + ")"; }

    const CircleMap<Real>& outer() const { return g_; }
    const CircleMap<Real>& inner() const { return f_; }

private:
    struct Anchor {
        Real y, u, w;
    };

    /// u = g^{-1}(x), w = F(u); exact stored values at declared breaks.
    std::pair<Real, Real> inner_points(const Real& x) const {
        Real rx = reduce(x);
        for (const auto& a : anchors_) {
            if (a.y == rx) {
                Real shift = x - rx;
                return {a.u + shift, a.w + shift};
            }
        }
        Real u = g_.inverse_lift(x);
        return {u, f_.lift(u)};
    }

    /// Grid sum of |d log DF| per continuity interval plus the break jumps.
    Real measure_variation() const {
        using std::abs;
        using std::log;
        const int per_period = 1 << 14;
        std::vector<Real> cuts;
        for (const auto& b : breaks_) cuts.push_back(b.location);
        if (cuts.empty()) cuts.push_back(Real(0));
        Real total = 0;
        for (std::size_t i = 0; i < cuts.size(); ++i) {
            Real a = cuts[i];
            Real len = i + 1 < cuts.size() ? Real(cuts[i + 1] - a) : Real(cuts[0] + 1 - a);
            int steps = std::max(64, static_cast<int>(to_double(len) * per_period));
            Real prev = log(derivative(a, Side::right));
            for (int s = 1; s <= steps; ++s) {
                Real x = a + len * Real(s) / Real(steps);
                Real cur = log(derivative(x, s == steps ? Side::left : Side::right));
                total += abs(cur - prev);
                prev = cur;
            }
        }
        for (const auto& b : breaks_) total += abs(log(b.jump));
        return total;
    }

    CircleMap<Real> g_, f_;
    std::vector<BreakSpec<Real>> breaks_;
    std::vector<Anchor> anchors_;
    Real variation_ = 0;
};

// ---------------------------------------------------------------------------

template <class Real>
CircleMap<Real> make_piecewise_mobius(std::vector<BreakSpec<Real>> breaks, Real lift_shift) {
    using std::abs;
    for (const auto& b : breaks) require(b.jump > 0, "break jump must be positive");
    auto model = std::make_shared<MobiusLift<Real>>(std::move(breaks));
    CircleMap<Real> map(model, std::move(lift_shift));
    Real tol = std::max(Real(1e-10), Real(1e3 * unit_roundoff<Real>()));
    for (const auto& b : map.breaks()) {
        Real ratio = map.derivative(b.location, Side::left) / map.derivative(b.location, Side::right);
        if (abs(ratio / b.jump - 1) > tol) fail(ErrorKind::invalid_argument, "constructed jump does not match");
    }
    return map;
}

template <class Real>
CircleMap<Real> make_rotation(Real rho) {
    return make_piecewise_mobius<Real>({}, std::move(rho));
}

template <class Real>
CircleMap<Real> make_sine_diffeo(Real amplitude) {
    return CircleMap<Real>(std::make_shared<SineLift<Real>>(std::move(amplitude)), Real(0));
}

/// g o f o g^{-1}.
template <class Real>
CircleMap<Real> conjugate(const CircleMap<Real>& g, const CircleMap<Real>& f) {
    return CircleMap<Real>(std::make_shared<ConjugatedLift<Real>>(g, f), Real(0));
}

template <class Real>
Real eval_lift(const CircleMap<Real>& map, const Real& x) {
    return map.lift(x);
}

template <class Real>
Real deriv_one_sided(const CircleMap<Real>& map, const Real& x, Side side) {
    return map.derivative(x, side);
}

template <class Real>
Real total_jump(const CircleMap<Real>& map) {
    return map.total_jump();
}

template <class Real>
Real variation_log_df(const CircleMap<Real>& map) {
    return map.variation_log_df();
}

/// f^n(x) reduced mod 1; negative n runs the inverse.
template <class Real>
Real iterate(const CircleMap<Real>& map, Real x, std::int64_t n, std::int64_t budget = kDefaultOrbitBudget) {
    std::int64_t steps = n < 0 ? -n : n;
    if (steps > budget) fail(ErrorKind::budget_exceeded, "iterate: |n| = " + std::to_string(steps));
    x = reduce(x);
    if (n >= 0)
        for (std::int64_t i = 0; i < steps; ++i) x = map(x);
    else
        for (std::int64_t i = 0; i < steps; ++i) x = map.inverse(x);
    return x;
}

/// Sampled min and max of DF over the circle.
template <class Real>
std::pair<Real, Real> derivative_range(const CircleMap<Real>& map, int samples = 4096) {
    Real lo = map.derivative(Real(0), Side::right), hi = lo;
    auto take = [&](const Real& d) {
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    };
    for (int i = 0; i < samples; ++i) take(map.derivative(Real(i) / Real(samples), Side::right));
    for (const auto& b : map.breaks()) {
        take(map.derivative(b.location, Side::left));
        take(map.derivative(b.location, Side::right));
    }
    return {lo, hi};
}

} // namespace breaklab
