#pragma once

#include <tzone/error.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

namespace tzone {

struct QuadOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int max_panels = 4000;
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    int panels = 0;
};

namespace detail {

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15_panel(F& f, double a, double b) {
    double err = 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0, &err);
    // Boost reports the error on the reference interval [-1, 1]
    return {a, b, v, err * 0.5 * (b - a)};
}

}  // namespace detail

// Globally adaptive 15-point Gauss-Kronrod on a finite interval.
template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadOptions& opt = {}) {
    if (!(std::isfinite(a) && std::isfinite(b)))
        throw DomainError("integrate: finite limits required");
    if (a == b) return {};
    double sign = 1.0;
    if (a > b) {
        std::swap(a, b);
        sign = -1.0;
    }
    auto g = [&f](double x) { return static_cast<double>(f(x)); };
    std::vector<detail::Panel> heap;
    heap.push_back(detail::gk15_panel(g, a, b));
    double total = heap.front().value;
    double err = heap.front().error;
    while (err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total))) {
        if (static_cast<int>(heap.size()) >= opt.max_panels || !std::isfinite(total)) {
            std::ostringstream os;
            os << "integrate: no convergence on [" << a << ", " << b << "]";
            throw NumericalError(os.str(), err);
        }
        std::pop_heap(heap.begin(), heap.end());
        detail::Panel worst = heap.back();
        heap.pop_back();
        double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            throw NumericalError("integrate: panel width underflow", err);
        }
        auto left = detail::gk15_panel(g, worst.a, mid);
        auto right = detail::gk15_panel(g, mid, worst.b);
        total += left.value + right.value - worst.value;
        heap.push_back(left);
        std::push_heap(heap.begin(), heap.end());
        heap.push_back(right);
        std::push_heap(heap.begin(), heap.end());
        // re-sum the error estimate to avoid drift from cancellation
        err = 0.0;
        for (const auto& p : heap) err += p.error;
    }
    return {sign * total, err, static_cast<int>(heap.size())};
}

// Integral of f from `from` towards +inf (direction > 0) or -inf (direction < 0),
// stopping at `limit` if it is finite. Panels double in width; truncation happens once
// the integrand has dropped below 1e-16 of its running maximum and the last panel is
// negligible.
template <class F>
QuadResult integrate_tail(F&& f, double from, int direction, double initial_width,
                          double limit = std::numeric_limits<double>::infinity(),
                          const QuadOptions& opt = {}) {
    if (!(initial_width > 0.0)) throw DomainError("integrate_tail: width must be positive");
    const double dir = direction >= 0 ? 1.0 : -1.0;
    const double bound = limit;
    auto g = [&f](double x) { return static_cast<double>(f(x)); };

    QuadResult acc;
    double x = from;
    double w = initial_width;
    double fmax = std::abs(g(from));
    for (int k = 0; k < 200; ++k) {
        double next = x + dir * w;
        bool last = false;
        if (std::isfinite(bound) && (dir > 0 ? next >= bound : next <= bound)) {
            next = bound;
            last = true;
        }
        QuadOptions po = opt;
        po.abs_tol = std::max(opt.abs_tol * 0.25, opt.rel_tol * 0.25 * std::abs(acc.value));
        auto part = integrate(g, x, next, po);
        acc.value += dir * part.value;
        acc.error += part.error;
        acc.panels += part.panels;
        if (last) return acc;
        double fend = std::abs(g(next));
        double fmid = std::abs(g(0.5 * (x + next)));
        fmax = std::max({fmax, fend, fmid});
        x = next;
        w *= 2.0;
        if (fend <= 1e-16 * fmax &&
            std::abs(part.value) <= std::max(opt.abs_tol, opt.rel_tol * std::abs(acc.value)))
            return acc;
    }
    throw NumericalError("integrate_tail: tail did not decay", acc.error);
}

struct RootOptions {
    double x_tol = 1e-12;
    int max_iter = 200;
};

// Brent's method on a bracket with f(a), f(b) of opposite sign.
template <class F>
double brent_root(F&& f, double a, double b, double fa, double fb, const RootOptions& opt = {}) {
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0) == (fb > 0)) {
        std::ostringstream os;
        os << "brent_root: no sign change on [" << a << ", " << b << "] (f = " << fa << ", " << fb << ")";
        throw SolverError(os.str());
    }
    double c = a, fc = fa, d = b - a, e = d;
    for (int it = 0; it < opt.max_iter; ++it) {
        if ((fb > 0) == (fc > 0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * opt.x_tol;
        double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol || fb == 0.0) return b;
        if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
            double s = fb / fa, p, q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                double qq = fa / fc, rr = fb / fc;
                p = s * (2.0 * xm * qq * (qq - rr) - (b - a) * (rr - 1.0));
                q = (qq - 1.0) * (rr - 1.0) * (s - 1.0);
            }
            if (p > 0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += std::abs(d) > tol ? d : (xm > 0 ? tol : -tol);
        fb = f(b);
    }
    throw SolverError("brent_root: iteration cap reached");
}

template <class F>
double brent_root(F&& f, double a, double b, const RootOptions& opt = {}) {
    return brent_root(f, a, b, f(a), f(b), opt);
}

struct Bracket {
    double lo, hi, f_lo, f_hi;
};

// Walk from x0 in the direction of `step` with geometrically growing steps until f
// changes sign. Steps never cross `limit`.
template <class F>
Bracket expand_bracket(F&& f, double x0, double step, double limit, int max_steps = 80) {
    double f0 = f(x0);
    double x = x0, fx = f0;
    double s = step;
    for (int k = 0; k < max_steps; ++k) {
        double next = x + s;
        if (std::isfinite(limit)) {
            if ((s > 0 && next >= limit) || (s < 0 && next <= limit)) next = x + 0.5 * (limit - x);
        }
        double fn = f(next);
        if (!std::isfinite(fn)) break;
        if ((fn > 0) != (fx > 0) || fn == 0.0) {
            return s > 0 ? Bracket{x, next, fx, fn} : Bracket{next, x, fn, fx};
        }
        x = next;
        fx = fn;
        s *= 2.0;
    }
    std::ostringstream os;
    os << "expand_bracket: no sign change from " << x0 << " (last x = " << x << ", f = " << fx << ")";
    throw SolverError(os.str());
}

}  // namespace tzone
