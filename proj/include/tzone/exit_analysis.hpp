#pragma once

#include <tzone/error.hpp>
#include <tzone/numerics.hpp>
#include <tzone/ou_target_zone.hpp>
#include <tzone/special_fn.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace tzone {

struct Band {
    double a = 0.0, b = 0.0;
};

namespace detail {

inline void check_band(const Band& band, double x, const char* who) {
    if (!(band.a < band.b)) {
        std::ostringstream os;
        os << who << ": band requires a < b, got (" << band.a << ", " << band.b << ")";
        throw DomainError(os.str());
    }
    if (!(x >= band.a && x <= band.b)) {
        std::ostringstream os;
        os << who << ": x = " << x << " outside [" << band.a << ", " << band.b << "]";
        throw DomainError(os.str());
    }
}

inline double z_of(const OuSpec& s, double u) { return (u - s.m) * std::sqrt(2.0 * s.rho) / s.sigma; }

inline QuadOptions tight() {
    QuadOptions o;
    o.abs_tol = 0.0;
    o.rel_tol = 1e-13;
    return o;
}

// int_w^zb e^{-u^2/2} du, arranged to avoid cancellation for either sign.
inline double gauss_tail(double w, double zb) {
    constexpr double k = 1.2533141373155003;  // sqrt(pi/2)
    const double s = std::numbers::sqrt2;
    if (w >= zb) return 0.0;
    if (zb - w < 0.5) {
        // erfc differences cancel here; a single GK15 panel is exact to rounding
        auto g = [](double u) { return std::exp(-0.5 * u * u); };
        return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(g, w, zb, 0, 0.0);
    }
    if (w >= 0.0) return k * (std::erfc(w / s) - std::erfc(zb / s));
    if (zb <= 0.0) return k * (std::erfc(-zb / s) - std::erfc(-w / s));
    return k * (2.0 - std::erfc(-w / s) - std::erfc(zb / s));
}

}  // namespace detail

// e^{-shift} int_{z1}^{z2} e^{y^2/2} dy. The exponent is convex, so choosing shift as the
// larger endpoint value of y^2/2 keeps the integrand in (0, 1].
inline double scaled_erfi_integral(double z1, double z2, double shift) {
    auto f = [shift](double y) { return std::exp(0.5 * y * y - shift); };
    return integrate(f, z1, z2, detail::tight()).value;
}

struct ExitProbabilities {
    double p_lower = 0.0, p_upper = 0.0;
};

inline ExitProbabilities exit_probabilities(const OuSpec& s, const Band& band, double x) {
    detail::check_band(band, x, "exit_probabilities");
    double za = detail::z_of(s, band.a), zb = detail::z_of(s, band.b), zx = detail::z_of(s, x);
    double shift = 0.5 * std::max(za * za, zb * zb);
    double total = scaled_erfi_integral(za, zb, shift);
    ExitProbabilities p;
    p.p_lower = scaled_erfi_integral(zx, zb, shift) / total;
    p.p_upper = scaled_erfi_integral(za, zx, shift) / total;
    return p;
}

// Expected time (years) for the uncontrolled process started at x to leave (a, b):
// q = A1 + B1 int_{z(a)}^{z(x)} e^{w^2/2} dw - (1/rho) N(z(x)) with
// N(z) = int_z^{z(b)} e^{w^2/2} int_w^{z(b)} e^{-u^2/2} du dw, the inner integral in
// closed form through erfc.
inline double expected_exit_time(const OuSpec& s, const Band& band, double x) {
    detail::check_band(band, x, "expected_exit_time");
    if (x == band.a || x == band.b) return 0.0;
    double za = detail::z_of(s, band.a), zb = detail::z_of(s, band.b), zx = detail::z_of(s, x);
    double shift = 0.5 * std::max(za * za, zb * zb);
    auto n_scaled = [&](double z) {
        auto f = [&](double w) { return std::exp(0.5 * w * w - shift) * detail::gauss_tail(w, zb); };
        return integrate(f, z, zb, detail::tight()).value;
    };
    double a1 = n_scaled(za) / s.rho;
    double b1 = -a1 / scaled_erfi_integral(za, zb, shift);
    double q = a1 + b1 * scaled_erfi_integral(za, zx, shift) - n_scaled(zx) / s.rho;
    return std::max(0.0, q * std::exp(shift));
}

struct ExitProfile {
    Band band;
    std::vector<double> grid, p_lower, p_upper, expected_time;
};

inline ExitProfile exit_profile(const OuSpec& s, const Band& band, int n_points) {
    if (n_points < 2) throw DomainError("exit_profile: need at least 2 points");
    detail::check_band(band, band.a, "exit_profile");
    ExitProfile p;
    p.band = band;
    p.grid.resize(n_points);
    p.p_lower.resize(n_points);
    p.p_upper.resize(n_points);
    p.expected_time.resize(n_points);
    parallel_for(static_cast<size_t>(n_points), [&](size_t i) {
        double x = i + 1 == static_cast<size_t>(n_points) ? band.b
                                                          : band.a + (band.b - band.a) * i / (n_points - 1);
        p.grid[i] = x;
        auto pr = exit_probabilities(s, band, x);
        p.p_lower[i] = pr.p_lower;
        p.p_upper[i] = pr.p_upper;
        p.expected_time[i] = expected_exit_time(s, band, x);
    });
    return p;
}

}  // namespace tzone
