#pragma once

#include <tzone/error.hpp>
#include <tzone/numerics.hpp>

#include <boost/math/interpolators/cubic_hermite.hpp>
#include <boost/math/interpolators/quintic_hermite.hpp>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

namespace tzone {

using RealFn = std::function<double(double)>;

// base: the diffusion X killed at rate r.
// hat: drift mu + sigma sigma', killed at rate r - mu'. Governs the derivative of the value.
enum class Kind { base, hat };

inline const char* to_string(Kind k) { return k == Kind::base ? "base" : "hat"; }

struct DiffusionModel {
    RealFn mu;
    RealFn mu_prime;
    RealFn sigma;
    RealFn sigma_prime;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    double r = 0.0;
    double anchor = 0.0;

    bool contains(double x) const { return x > lower && x < upper; }

    double drift(Kind k, double x) const {
        return k == Kind::base ? mu(x) : mu(x) + sigma(x) * sigma_prime(x);
    }
    double killing(Kind k, double x) const { return k == Kind::base ? r : r - mu_prime(x); }

    // Typical distance over which the fundamental solutions change by O(1).
    double length_scale() const { return sigma(anchor) / std::sqrt(r); }

    // Points spread over anchor +- 12 length scales, clipped to the state space. At 8 the
    // truncated resolvent tail of a quadratic cost was still visible at 1e-7.
    std::vector<double> sample_grid(int n = 201) const {
        double span = 12.0 * length_scale();
        double lo = std::isfinite(lower) ? std::max(anchor - span, 0.5 * (lower + anchor)) : anchor - span;
        double hi = std::isfinite(upper) ? std::min(anchor + span, 0.5 * (upper + anchor)) : anchor + span;
        std::vector<double> g(n);
        for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
        return g;
    }

    void validate(const std::vector<double>& grid) const {
        if (!mu || !mu_prime || !sigma || !sigma_prime)
            throw ConstructionError("DiffusionModel: all coefficient callables are required");
        if (!(r > 0.0)) throw ConstructionError("DiffusionModel: discount rate must be positive");
        if (!(lower < anchor && anchor < upper))
            throw ConstructionError("DiffusionModel: anchor must lie inside the state space");
        for (double x : grid) {
            if (!contains(x)) continue;
            if (!(sigma(x) > 0.0)) {
                std::ostringstream os;
                os << "DiffusionModel: sigma not positive at x = " << x;
                throw ConstructionError(os.str());
            }
            if (!(r - mu_prime(x) > 0.0)) {
                std::ostringstream os;
                os << "DiffusionModel: r - mu'(x) not positive at x = " << x;
                throw ConstructionError(os.str());
            }
        }
    }
    void validate() const { validate(sample_grid()); }
};

inline void require_interior(const DiffusionModel& m, double x, const char* who) {
    if (!m.contains(x)) {
        std::ostringstream os;
        os << who << ": x = " << x << " outside (" << m.lower << ", " << m.upper << ")";
        throw DomainError(os.str());
    }
}

// S'(x) (base) or S-hat'(x) (hat), normalised to 1 at the anchor.
inline double scale_density(const DiffusionModel& m, double x, Kind k) {
    require_interior(m, x, "scale_density");
    auto integrand = [&](double z) {
        double s = m.sigma(z);
        return 2.0 * m.drift(k, z) / (s * s);
    };
    QuadOptions opt;
    opt.abs_tol = 1e-13;
    opt.rel_tol = 1e-13;
    return std::exp(-integrate(integrand, m.anchor, x, opt).value);
}

inline double speed_density(const DiffusionModel& m, double x, Kind k = Kind::hat) {
    double s = m.sigma(x);
    return 2.0 / (s * s * scale_density(m, x, k));
}

// Increasing (psi) and decreasing (phi) positive solutions of
//   (1/2) sigma^2 u'' + drift u' - killing u = 0
// together with the matching scale and speed densities.
struct FundamentalPair {
    Kind kind = Kind::base;
    RealFn psi, dpsi, phi, dphi;
    RealFn scale;  // S' in the same normalisation as psi, phi
    RealFn speed;  // m' = 2 / (sigma^2 S')
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    double anchor = 0.0;
    double length_scale = 1.0;

    double wronskian_at(double x) const { return (dpsi(x) * phi(x) - dphi(x) * psi(x)) / scale(x); }
    double wronskian() const { return wronskian_at(anchor); }

    // Same pair with psi and phi multiplied by positive constants.
    FundamentalPair rescaled(double kpsi, double kphi) const {
        if (!(kpsi > 0.0 && kphi > 0.0)) throw DomainError("rescaled: factors must be positive");
        FundamentalPair p = *this;
        p.psi = [f = psi, kpsi](double x) { return kpsi * f(x); };
        p.dpsi = [f = dpsi, kpsi](double x) { return kpsi * f(x); };
        p.phi = [f = phi, kphi](double x) { return kphi * f(x); };
        p.dphi = [f = dphi, kphi](double x) { return kphi * f(x); };
        return p;
    }
};

inline double green(const DiffusionModel& m, const FundamentalPair& p, double x, double y) {
    require_interior(m, x, "green");
    require_interior(m, y, "green");
    double w = p.wronskian();
    if (!(std::abs(w) > 1e-300)) throw NumericalError("green: degenerate Wronskian", w);
    return x <= y ? p.psi(x) * p.phi(y) / w : p.phi(x) * p.psi(y) / w;
}

// Expected discounted integral of f along the pair's diffusion started at x,
// by the Green kernel representation.
template <class F>
QuadResult resolvent(const DiffusionModel& m, const FundamentalPair& p, F&& f, double x,
                     const QuadOptions& opt = {}) {
    require_interior(m, x, "resolvent");
    double w = p.wronskian();
    if (!(std::abs(w) > 1e-300)) throw NumericalError("resolvent: degenerate Wronskian", w);
    auto left = [&](double y) {
        double v = f(y);
        return v == 0.0 ? 0.0 : v * p.psi(y) * p.speed(y);
    };
    auto right = [&](double y) {
        double v = f(y);
        return v == 0.0 ? 0.0 : v * p.phi(y) * p.speed(y);
    };
    QuadOptions o = opt;
    o.abs_tol = opt.abs_tol * 1e-2;
    double lower = std::max(m.lower, p.lo);
    double upper = std::min(m.upper, p.hi);
    auto l = integrate_tail(left, x, -1, p.length_scale, lower, o);
    auto r = integrate_tail(right, x, +1, p.length_scale, upper, o);
    double phix = p.phi(x), psix = p.psi(x);
    QuadResult out;
    out.value = (phix * l.value + psix * r.value) / w;
    out.error = (std::abs(phix) * l.error + std::abs(psix) * r.error) / std::abs(w);
    out.panels = l.panels + r.panels;
    return out;
}

namespace detail {

struct RiccatiSample {
    std::vector<double> x, w, dw, d2w, ls, dls;
};

// Integrates p = u'/u and w = log u (plus log S') along xs, which must be monotone in the
// direction of integration. p' = (2/sigma^2)(killing - drift p) - p^2.
inline RiccatiSample riccati_run(const DiffusionModel& m, Kind k, const std::vector<double>& xs,
                                 double p0) {
    using State = std::array<double, 3>;
    auto rhs = [&](const State& s, State& ds, double x) {
        double sg = m.sigma(x);
        double two_over = 2.0 / (sg * sg);
        double dr = m.drift(k, x);
        ds[0] = two_over * (m.killing(k, x) - dr * s[0]) - s[0] * s[0];
        ds[1] = s[0];
        ds[2] = -two_over * dr;
    };
    // state layout: [p, w, log S']
    State st{p0, 0.0, 0.0};
    RiccatiSample out;
    auto record = [&](const State& s, double x) {
        State d;
        rhs(s, d, x);
        out.x.push_back(x);
        out.w.push_back(s[1]);
        out.dw.push_back(s[0]);
        out.d2w.push_back(d[0]);
        out.ls.push_back(s[2]);
        out.dls.push_back(d[2]);
    };
    namespace ode = boost::numeric::odeint;
    auto stepper = ode::make_dense_output(1e-13, 1e-13, ode::runge_kutta_dopri5<State>());
    double dx0 = (xs.back() - xs.front()) * 1e-4;
    ode::integrate_times(stepper, rhs, st, xs.begin(), xs.end(), dx0, record);
    return out;
}

// Local constant-coefficient root of (1/2) sigma^2 g^2 + drift g - killing = 0.
inline double local_root(const DiffusionModel& m, Kind k, double x, bool increasing) {
    double s2 = m.sigma(x) * m.sigma(x);
    double b = m.drift(k, x);
    double disc = std::sqrt(b * b + 2.0 * s2 * m.killing(k, x));
    return increasing ? (-b + disc) / s2 : (-b - disc) / s2;
}

// Starting point far enough outside [x_from, ...] that the unwanted mode has decayed by
// about e^-36 before the grid is reached.
inline double padded_start(const DiffusionModel& m, Kind k, double x_from, double direction) {
    double acc = 0.0;
    double x = x_from;
    double h = 0.05 * m.length_scale();
    double limit = direction < 0 ? m.lower : m.upper;
    for (int i = 0; i < 100000 && acc < 36.0; ++i) {
        double next = x + direction * h;
        if (std::isfinite(limit) && (direction < 0 ? next <= limit : next >= limit)) {
            next = x + 0.5 * (limit - x);
            if (std::abs(next - x) < 1e-12 * (1.0 + std::abs(x))) break;
        }
        double gap = local_root(m, k, next, true) - local_root(m, k, next, false);
        acc += gap * std::abs(next - x);
        x = next;
        h *= 1.1;
    }
    return x;
}

}  // namespace detail

// Fundamental solutions by numerical integration of the Riccati form of the ODE: psi is
// integrated left to right and phi right to left, each in the direction in which it
// dominates, starting from padded points with the local constant-coefficient slope.
// The result is interpolated (quintic Hermite in log u) on the grid and normalised to 1
// at the anchor.
inline FundamentalPair fundamental_numeric(const DiffusionModel& m, Kind k, std::vector<double> grid) {
    if (grid.size() < 4) throw DomainError("fundamental_numeric: need at least 4 grid points");
    for (size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw DomainError("fundamental_numeric: grid must be increasing");
    if (!m.contains(grid.front()) || !m.contains(grid.back()))
        throw DomainError("fundamental_numeric: grid must lie inside the state space");
    m.validate(grid);
    if (!(m.anchor >= grid.front() && m.anchor <= grid.back()))
        throw DomainError("fundamental_numeric: anchor must lie within the grid");
    if (std::find(grid.begin(), grid.end(), m.anchor) == grid.end()) {
        grid.insert(std::upper_bound(grid.begin(), grid.end(), m.anchor), m.anchor);
    }

    auto build = [&](bool increasing) {
        std::vector<double> xs;
        double start = detail::padded_start(m, k, increasing ? grid.front() : grid.back(), increasing ? -1.0 : 1.0);
        xs.push_back(start);
        if (increasing) {
            xs.insert(xs.end(), grid.begin(), grid.end());
        } else {
            xs.insert(xs.end(), grid.rbegin(), grid.rend());
        }
        auto s = detail::riccati_run(m, k, xs, detail::local_root(m, k, start, increasing));
        // drop padding, restore ascending order
        for (auto* v : {&s.x, &s.w, &s.dw, &s.d2w, &s.ls, &s.dls}) {
            v->erase(v->begin());
            if (!increasing) std::reverse(v->begin(), v->end());
        }
        size_t ia = std::lower_bound(s.x.begin(), s.x.end(), m.anchor) - s.x.begin();
        double w0 = s.w[ia], l0 = s.ls[ia];
        for (size_t i = 0; i < s.x.size(); ++i) {
            s.w[i] -= w0;
            s.ls[i] -= l0;
            if (!std::isfinite(s.w[i]) || (increasing ? s.dw[i] <= 0.0 : s.dw[i] >= 0.0)) {
                std::ostringstream os;
                os << "fundamental_numeric: " << (increasing ? "psi" : "phi")
                   << " lost monotonicity or positivity at x = " << s.x[i];
                throw ConstructionError(os.str());
            }
        }
        return s;
    };

    auto up = build(true);
    auto down = build(false);

    using boost::math::interpolators::cubic_hermite;
    using boost::math::interpolators::quintic_hermite;
    auto lpsi = std::make_shared<quintic_hermite<std::vector<double>>>(
        std::vector<double>(up.x), std::vector<double>(up.w), std::vector<double>(up.dw),
        std::vector<double>(up.d2w));
    auto lphi = std::make_shared<quintic_hermite<std::vector<double>>>(
        std::vector<double>(down.x), std::vector<double>(down.w), std::vector<double>(down.dw),
        std::vector<double>(down.d2w));
    auto lscale = std::make_shared<cubic_hermite<std::vector<double>>>(
        std::vector<double>(up.x), std::vector<double>(up.ls), std::vector<double>(up.dls));

    const double lo = grid.front(), hi = grid.back();
    auto check = [lo, hi](double x) {
        if (!(x >= lo && x <= hi)) {
            std::ostringstream os;
            os << "numeric fundamental pair evaluated at " << x << " outside [" << lo << ", " << hi << "]";
            throw DomainError(os.str());
        }
    };

    FundamentalPair p;
    p.kind = k;
    p.lo = lo;
    p.hi = hi;
    p.anchor = m.anchor;
    p.length_scale = m.length_scale();
    p.psi = [lpsi, check](double x) { check(x); return std::exp((*lpsi)(x)); };
    p.dpsi = [lpsi, check](double x) { check(x); return lpsi->prime(x) * std::exp((*lpsi)(x)); };
    p.phi = [lphi, check](double x) { check(x); return std::exp((*lphi)(x)); };
    p.dphi = [lphi, check](double x) { check(x); return lphi->prime(x) * std::exp((*lphi)(x)); };
    p.scale = [lscale, check](double x) { check(x); return std::exp((*lscale)(x)); };
    auto sig = m.sigma;
    p.speed = [lscale, sig, check](double x) {
        check(x);
        double s = sig(x);
        return 2.0 / (s * s * std::exp((*lscale)(x)));
    };
    return p;
}

}  // namespace tzone
