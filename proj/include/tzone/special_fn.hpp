#pragma once

#include <tzone/error.hpp>
#include <tzone/numerics.hpp>

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

namespace tzone {

inline double gamma(double z) {
    if (!(z > 0.0) || !std::isfinite(z)) throw DomainError("gamma: argument must be positive and finite");
    return boost::math::tgamma(z);
}

inline double log_gamma(double z) {
    if (!(z > 0.0) || !std::isfinite(z)) throw DomainError("log_gamma: argument must be positive and finite");
    return boost::math::lgamma(z);
}

inline double erfc(double x) { return std::erfc(x); }

// exp(x^2) erfc(x), finite for all x > -26.
inline double erfcx(double x) {
    if (x < 26.0) {
        if (x < -26.0) return std::numeric_limits<double>::infinity();
        return std::exp(x * x) * std::erfc(x);
    }
    double inv = 1.0 / (2.0 * x * x);
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 8; ++k) {
        term *= -(2.0 * k - 1.0) * inv;
        sum += term;
    }
    return sum / (x * std::sqrt(std::numbers::pi));
}

class CylinderOrder {
public:
    explicit CylinderOrder(double alpha) : alpha_(alpha) {
        if (!(alpha < 0.0) || !std::isfinite(alpha)) {
            std::ostringstream os;
            os << "CylinderOrder: alpha must be negative, got " << alpha;
            throw DomainError(os.str());
        }
    }
    double alpha() const noexcept { return alpha_; }

private:
    double alpha_;
};

namespace detail {

// log of int_0^inf t^(nu-1) exp(-t^2/2 - x t) dt. The substitution t = e^s turns the
// endpoint singularity into an exponential tail; the log-integrand is concave with its
// peak at t* solving t^2 + x t = nu, which is factored out before integrating.
inline double log_cylinder_integral(double nu, double x) {
    const double root = std::sqrt(x * x + 4.0 * nu);
    const double ts = x >= 0.0 ? 2.0 * nu / (x + root) : 0.5 * (root - x);
    const double ss = std::log(ts);
    auto g = [nu, x](double s) {
        double t = std::exp(s);
        return nu * s - 0.5 * t * t - x * t;
    };
    const double gmax = g(ss);
    const double width = 1.0 / std::sqrt(ts * ts + nu);
    constexpr double cut = 46.0;

    double lo = ss - width;
    for (double step = width; g(lo) - gmax > -cut; step *= 2.0) lo -= step;
    double hi = ss + width;
    for (double step = width; g(hi) - gmax > -cut; step *= 2.0) hi += step;

    auto f = [&](double s) { return std::exp(g(s) - gmax); };
    QuadOptions opt;
    opt.abs_tol = 0.0;
    opt.rel_tol = 1e-13;
    opt.max_panels = 400;
    double left = integrate(f, lo, ss, opt).value;
    double right = integrate(f, ss, hi, opt).value;
    return gmax + std::log(left + right);
}

}  // namespace detail

// log D_alpha(x) for alpha < 0.
inline double log_pcf_d(CylinderOrder order, double x) {
    if (!std::isfinite(x)) throw DomainError("pcf_d: argument must be finite");
    const double nu = -order.alpha();
    try {
        return -0.25 * x * x + detail::log_cylinder_integral(nu, x) - log_gamma(nu);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("pcf_d: ") + e.what(), e.achieved());
    }
}

// Parabolic cylinder function D_alpha(x) from its integral representation.
inline double pcf_d(CylinderOrder order, double x) { return std::exp(log_pcf_d(order, x)); }

// d/dx log D_alpha(x), from D'_a(x) = -(x/2) D_a(x) + a D_{a-1}(x).
inline double pcf_d_log_derivative(CylinderOrder order, double x) {
    const double a = order.alpha();
    return a * std::exp(log_pcf_d(CylinderOrder(a - 1.0), x) - log_pcf_d(order, x)) - 0.5 * x;
}

inline double pcf_d_derivative(CylinderOrder order, double x) {
    const double a = order.alpha();
    const double ld = log_pcf_d(order, x);
    const double ld1 = log_pcf_d(CylinderOrder(a - 1.0), x);
    return std::exp(ld) * (a * std::exp(ld1 - ld) - 0.5 * x);
}

}  // namespace tzone
