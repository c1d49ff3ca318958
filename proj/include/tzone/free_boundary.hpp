#pragma once

#include <tzone/diffusion.hpp>
#include <tzone/error.hpp>
#include <tzone/numerics.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <vector>

namespace tzone {

// Holding cost h and marginal intervention costs c1 (raising the rate) and c2 (lowering
// it). c1_hat, c2_hat are the costs transformed by the hat generator:
// c_hat = (L_hat - (r - mu')) c.
struct CostModel {
    RealFn h, h_prime;
    RealFn c1, c2;
    RealFn c1_hat, c2_hat;
    RealFn c1_prime, c2_prime;  // optional; zero when absent
    std::optional<double> x_tilde_1, x_tilde_2;

    double dc1(double x) const { return c1_prime ? c1_prime(x) : 0.0; }
    double dc2(double x) const { return c2_prime ? c2_prime(x) : 0.0; }
};

// Constant marginal costs: the hat transform reduces to -(r - mu'(x)) c.
inline CostModel constant_costs(const DiffusionModel& m, RealFn h, RealFn h_prime, double c1, double c2) {
    CostModel c;
    c.h = std::move(h);
    c.h_prime = std::move(h_prime);
    c.c1 = [c1](double) { return c1; };
    c.c2 = [c2](double) { return c2; };
    auto mp = m.mu_prime;
    double r = m.r;
    c.c1_hat = [mp, r, c1](double x) { return -(r - mp(x)) * c1; };
    c.c2_hat = [mp, r, c2](double x) { return -(r - mp(x)) * c2; };
    c.c1_prime = [](double) { return 0.0; };
    c.c2_prime = [](double) { return 0.0; };
    return c;
}

// (Rh), (Rh)' and (Rh)'' for the base diffusion.
struct ResolventTerms {
    RealFn value, first, second;
};

// Value and derivative of the resolvent, from the same pair of tail integrals.
struct ResolventValue {
    double value = 0.0, derivative = 0.0, error = 0.0;
};

template <class F>
ResolventValue resolvent_with_derivative(const DiffusionModel& m, const FundamentalPair& p, F&& f, double x,
                                         const QuadOptions& opt = {}) {
    require_interior(m, x, "resolvent");
    double w = p.wronskian();
    auto left = [&](double y) { return f(y) * p.psi(y) * p.speed(y); };
    auto right = [&](double y) { return f(y) * p.phi(y) * p.speed(y); };
    QuadOptions o = opt;
    o.abs_tol = opt.abs_tol * 1e-2;
    auto l = integrate_tail(left, x, -1, p.length_scale, std::max(m.lower, p.lo), o);
    auto r = integrate_tail(right, x, +1, p.length_scale, std::min(m.upper, p.hi), o);
    ResolventValue out;
    out.value = (p.phi(x) * l.value + p.psi(x) * r.value) / w;
    out.derivative = (p.dphi(x) * l.value + p.dpsi(x) * r.value) / w;
    out.error = (std::abs(p.phi(x)) * l.error + std::abs(p.psi(x)) * r.error) / std::abs(w);
    return out;
}

// Rh by quadrature against the base kernel, (Rh)' as the hat resolvent of h', and
// (Rh)'' from the ODE (1/2) sigma^2 u'' + mu u' - r u = -h.
inline ResolventTerms resolvent_terms_numeric(const DiffusionModel& m, const FundamentalPair& base,
                                              const FundamentalPair& hat, const CostModel& c) {
    ResolventTerms t;
    t.value = [m, base, h = c.h](double x) { return resolvent(m, base, h, x).value; };
    t.first = [m, hat, hp = c.h_prime](double x) { return resolvent(m, hat, hp, x).value; };
    t.second = [m, v = t.value, d = t.first, h = c.h](double x) {
        double s = m.sigma(x);
        return 2.0 * (m.r * v(x) - m.mu(x) * d(x) - h(x)) / (s * s);
    };
    return t;
}

struct HjbReport {
    double equality_inside = 0.0;      // max |(L - r)u + h| on (a*, b*)
    double inequality_outside = 0.0;   // min (L - r)u + h outside the band (>= 0 expected)
    double gradient_lower = 0.0;       // max (-c1 - u'), expected <= 0
    double gradient_upper = 0.0;       // max (u' - c2), expected <= 0
    double min_term = 0.0;             // max |min{(L - r)u + h, c2 - u', u' + c1}| / (1 + |h|)
    int points = 0;
};

class BandProblem;

class BandSolution {
public:
    double a_star = 0.0, b_star = 0.0;
    double coeff_A = 0.0, coeff_B = 0.0;
    double theta_residual = 0.0;   // |Theta(b*)| relative to the size of its terms
    double first_residual = 0.0;   // same for the first boundary equation at (a*, b*)
    double flat_constant_gap = 0.0;  // u(a*) from the band formula vs the flat-region closed form
    double c2_gap_lower = 0.0, c2_gap_upper = 0.0;  // |u''(a*+) - u''(a*-)|, same at b*
    std::shared_ptr<const BandProblem> problem;

    double u(double x) const;
    double u_prime(double x) const;
    double u_second(double x) const;
    // (L_X - r)u + h
    double generator_residual(double x) const;
    HjbReport hjb_residual(const std::vector<double>& grid) const;
};

class BandProblem {
public:
    BandProblem(DiffusionModel model, CostModel cost, FundamentalPair base, FundamentalPair hat,
                std::optional<ResolventTerms> rh = std::nullopt)
        : model_(std::move(model)), cost_(std::move(cost)), base_(std::move(base)), hat_(std::move(hat)) {
        if (base_.kind != Kind::base || hat_.kind != Kind::hat)
            throw ConstructionError("BandProblem: pair kinds must be (base, hat)");
        grid_ = model_.sample_grid();
        model_.validate(grid_);
        validate_costs();
        rh_ = rh ? *rh : resolvent_terms_numeric(model_, base_, hat_, cost_);
        locate_tildes();
    }

    const DiffusionModel& model() const { return model_; }
    const CostModel& cost() const { return cost_; }
    const FundamentalPair& base() const { return base_; }
    const FundamentalPair& hat() const { return hat_; }
    const ResolventTerms& rh() const { return rh_; }
    double x_tilde_1() const { return xt1_; }
    double x_tilde_2() const { return xt2_; }

    double lower() const { return std::max(model_.lower, hat_.lo); }
    double upper() const { return std::min(model_.upper, hat_.hi); }

    // K1(a; b) = int_a^b (h' - c1_hat) m_hat' phi_hat
    double k1(double a, double b) const {
        check_order(a, b, "k1");
        auto f = [this](double z) { return (cost_.h_prime(z) - cost_.c1_hat(z)) * hat_.speed(z) * hat_.phi(z); };
        return integrate(f, a, b, quad_).value;
    }
    // K2(b; a) = int_a^b (h' + c2_hat) m_hat' psi_hat
    double k2(double b, double a) const {
        check_order(a, b, "k2");
        auto f = [this](double z) { return (cost_.h_prime(z) + cost_.c2_hat(z)) * hat_.speed(z) * hat_.psi(z); };
        return integrate(f, a, b, quad_).value;
    }
    // int_b^upper (c1_hat + c2_hat) m_hat' phi_hat
    double upper_tail(double b) const {
        auto f = [this](double z) { return (cost_.c1_hat(z) + cost_.c2_hat(z)) * hat_.speed(z) * hat_.phi(z); };
        return integrate_tail(f, b, +1, hat_.length_scale, upper(), quad_).value;
    }
    // -int_lower^a (c1_hat + c2_hat) m_hat' psi_hat
    double lower_tail(double a) const {
        auto f = [this](double z) { return (cost_.c1_hat(z) + cost_.c2_hat(z)) * hat_.speed(z) * hat_.psi(z); };
        return -integrate_tail(f, a, -1, hat_.length_scale, lower(), quad_).value;
    }

    // Unique a in (lower, min(x~1, b)) with K1(a; b) = upper_tail(b).
    double x_star(double b) const {
        double rhs = upper_tail(b);
        auto f = [&](double a) { return k1(a, b) - rhs; };
        double hi = std::min(xt1_, b);
        auto br = expand_bracket(f, hi, -probe_step(), lower());
        return brent_root(f, br.lo, br.hi, br.f_lo, br.f_hi, roots_);
    }

    // Unique b in (max(a, x~2), upper) with K2(b; a) = lower_tail(a).
    double y_star(double a) const {
        double rhs = lower_tail(a);
        auto f = [&](double b) { return k2(b, a) - rhs; };
        double lo = std::max(a, xt2_);
        auto br = expand_bracket(f, lo, probe_step(), upper());
        return brent_root(f, br.lo, br.hi, br.f_lo, br.f_hi, roots_);
    }

    // Theta(b) = K2(b; x*(b)) - lower_tail(x*(b)).
    double theta(double b) const {
        double a = x_star(b);
        return k2(b, a) - lower_tail(a);
    }

    // Coefficient functionals of the smooth-fit system expressed at either boundary:
    // I1(a) = I2(b) and J1(a) = J2(b) at the optimum.
    struct IJ {
        double i, j;
    };
    IJ ij_lower(double a) const { return ij(a, true); }
    IJ ij_upper(double b) const { return ij(b, false); }

    double probe_step() const { return std::max(0.25 * (xt2_ - xt1_), 1e-4 * model_.length_scale()); }

private:
    IJ ij(double x, bool lower_side) const {
        auto g = [&](double z) {
            return cost_.h_prime(z) + (lower_side ? -cost_.c1_hat(z) : cost_.c2_hat(z));
        };
        auto rv = resolvent_with_derivative(model_, hat_, g, x);
        double w = hat_.wronskian();
        double s = hat_.scale(x);
        double i = (hat_.dphi(x) * rv.value - hat_.phi(x) * rv.derivative) / (s * w);
        double j = (hat_.dpsi(x) * rv.value - hat_.psi(x) * rv.derivative) / (s * w);
        return {i, j};
    }

    void check_order(double a, double b, const char* who) const {
        if (a > b) {
            std::ostringstream os;
            os << who << ": requires a <= b, got a = " << a << ", b = " << b;
            throw DomainError(os.str());
        }
    }

    void validate_costs() const {
        const auto& c = cost_;
        if (!c.h || !c.h_prime || !c.c1 || !c.c2 || !c.c1_hat || !c.c2_hat)
            throw ConstructionError("CostModel: h, h', c1, c2 and their hat transforms are required");
        for (double x : grid_) {
            std::ostringstream os;
            if (c.h(x) < 0.0) os << "h negative at x = " << x;
            else if (!(c.c1(x) + c.c2(x) > 0.0)) os << "c1 + c2 not positive at x = " << x;
            else if (!(c.c1_hat(x) + c.c2_hat(x) < 0.0)) os << "c1_hat + c2_hat not negative at x = " << x;
            if (!os.str().empty()) throw ConstructionError("CostModel: " + os.str());
        }
        auto changes = [&](auto f) {
            int n = 0;
            for (size_t i = 1; i < grid_.size(); ++i)
                if ((f(grid_[i - 1]) > 0) != (f(grid_[i]) > 0)) ++n;
            return n;
        };
        auto f1 = [&](double x) { return c.h_prime(x) - c.c1_hat(x); };
        auto f2 = [&](double x) { return c.h_prime(x) + c.c2_hat(x); };
        if (changes(f1) != 1) throw ConstructionError("CostModel: h' - c1_hat must change sign exactly once");
        if (changes(f2) != 1) throw ConstructionError("CostModel: h' + c2_hat must change sign exactly once");
    }

    void locate_tildes() {
        auto find = [&](auto f) {
            for (size_t i = 1; i < grid_.size(); ++i) {
                double f0 = f(grid_[i - 1]), f1 = f(grid_[i]);
                if ((f0 > 0) != (f1 > 0)) return brent_root(f, grid_[i - 1], grid_[i], f0, f1, roots_);
            }
            throw ConstructionError("CostModel: no sign change found for x~");
        };
        xt1_ = cost_.x_tilde_1 ? *cost_.x_tilde_1
                               : find([&](double x) { return cost_.h_prime(x) - cost_.c1_hat(x); });
        xt2_ = cost_.x_tilde_2 ? *cost_.x_tilde_2
                               : find([&](double x) { return cost_.h_prime(x) + cost_.c2_hat(x); });
        if (!(xt1_ < xt2_)) throw ConstructionError("CostModel: x~1 must be below x~2");
    }

    DiffusionModel model_;
    CostModel cost_;
    FundamentalPair base_, hat_;
    ResolventTerms rh_;
    std::vector<double> grid_;
    double xt1_ = 0.0, xt2_ = 0.0;
    QuadOptions quad_{};
    RootOptions roots_{};
};

// Free functions mirroring the problem's members.
inline double k1(double a, double b, const BandProblem& p) { return p.k1(a, b); }
inline double k2(double b, double a, const BandProblem& p) { return p.k2(b, a); }
inline double x_star(double b, const BandProblem& p) { return p.x_star(b); }
inline double y_star(double a, const BandProblem& p) { return p.y_star(a); }

inline BandSolution solve_band(std::shared_ptr<const BandProblem> prob) {
    const BandProblem& p = *prob;
    const auto& m = p.model();
    const auto& c = p.cost();
    const double xt1 = p.x_tilde_1(), xt2 = p.x_tilde_2();
    const double eps = 1e-6 * (xt2 - xt1);

    auto theta = [&](double b) { return p.theta(b); };
    double b0 = xt2 + eps;
    double t0 = theta(b0);
    if (!(t0 < 0.0)) {
        std::ostringstream os;
        os << "solve_band: Theta(x~2 + eps) = " << t0 << " is not negative";
        throw SolverError(os.str());
    }
    Bracket br;
    try {
        br = expand_bracket(theta, b0, p.probe_step(), p.upper());
    } catch (const SolverError& e) {
        throw SolverError(std::string("solve_band: Theta bracket not found; ") + e.what());
    }
    BandSolution s;
    s.b_star = brent_root(theta, br.lo, br.hi, br.f_lo, br.f_hi);
    s.a_star = p.x_star(s.b_star);
    s.problem = prob;

    const double a = s.a_star, b = s.b_star;
    {
        double k2v = p.k2(b, a), lt = p.lower_tail(a);
        s.theta_residual = std::abs(k2v - lt) / std::max(std::abs(k2v), std::abs(lt));
        double k1v = p.k1(a, b), ut = p.upper_tail(b);
        s.first_residual = std::abs(k1v - ut) / std::max(std::abs(k1v), std::abs(ut));
    }

    const auto& base = p.base();
    const auto& rh = p.rh();
    // A psi'(a) + B phi'(a) = -c1(a) - (Rh)'(a);  A psi'(b) + B phi'(b) = c2(b) - (Rh)'(b)
    double m11 = base.dpsi(a), m12 = base.dphi(a), m21 = base.dpsi(b), m22 = base.dphi(b);
    double r1 = -c.c1(a) - rh.first(a), r2 = c.c2(b) - rh.first(b);
    double det = m11 * m22 - m12 * m21;
    if (!(std::abs(det) > 0.0) || !std::isfinite(det)) throw AssemblyError("solve_band: singular smooth-fit system");
    s.coeff_A = (r1 * m22 - m12 * r2) / det;
    s.coeff_B = (m11 * r2 - m21 * r1) / det;

    double sa = m.sigma(a);
    double flat = (c.h(a) - m.mu(a) * c.c1(a) - 0.5 * sa * sa * c.dc1(a)) / m.r;
    double inner = s.coeff_A * base.psi(a) + s.coeff_B * base.phi(a) + rh.value(a);
    s.flat_constant_gap = std::abs(inner - flat) / std::max(1.0, std::abs(flat));

    s.c2_gap_lower = std::abs(s.u_second(a) - (-c.dc1(a)));
    s.c2_gap_upper = std::abs(s.u_second(b) - c.dc2(b));
    double scale = std::max({1.0, std::abs(s.u_second(0.5 * (a + b)))});
    if (s.c2_gap_lower > 1e-4 * scale || s.c2_gap_upper > 1e-4 * scale) {
        std::ostringstream os;
        os << "solve_band: second derivative mismatch at the boundaries (" << s.c2_gap_lower << ", "
           << s.c2_gap_upper << ")";
        throw AssemblyError(os.str());
    }
    return s;
}

inline double BandSolution::u(double x) const {
    const auto& p = *problem;
    const auto& base = p.base();
    const auto& c = p.cost();
    auto inner = [&](double z) { return coeff_A * base.psi(z) + coeff_B * base.phi(z) + p.rh().value(z); };
    if (x <= a_star) {
        return inner(a_star) + integrate(c.c1, x, a_star).value;
    }
    if (x >= b_star) {
        return inner(b_star) + integrate(c.c2, b_star, x).value;
    }
    return inner(x);
}

inline double BandSolution::u_prime(double x) const {
    const auto& p = *problem;
    if (x <= a_star) return -p.cost().c1(x);
    if (x >= b_star) return p.cost().c2(x);
    const auto& base = p.base();
    return coeff_A * base.dpsi(x) + coeff_B * base.dphi(x) + p.rh().first(x);
}

// Inside the band psi'' and phi'' come from their own ODE; (Rh)'' from the resolvent terms.
inline double BandSolution::u_second(double x) const {
    const auto& p = *problem;
    const auto& m = p.model();
    if (x < a_star) return -p.cost().dc1(x);
    if (x > b_star) return p.cost().dc2(x);
    const auto& base = p.base();
    double s = m.sigma(x);
    double k = 2.0 / (s * s);
    double psi2 = k * (m.r * base.psi(x) - m.mu(x) * base.dpsi(x));
    double phi2 = k * (m.r * base.phi(x) - m.mu(x) * base.dphi(x));
    return coeff_A * psi2 + coeff_B * phi2 + p.rh().second(x);
}

inline double BandSolution::generator_residual(double x) const {
    const auto& p = *problem;
    const auto& m = p.model();
    double s = m.sigma(x);
    return 0.5 * s * s * u_second(x) + m.mu(x) * u_prime(x) - m.r * u(x) + p.cost().h(x);
}

inline HjbReport BandSolution::hjb_residual(const std::vector<double>& grid) const {
    const auto& c = problem->cost();
    HjbReport rep;
    rep.inequality_outside = std::numeric_limits<double>::infinity();
    rep.gradient_lower = -std::numeric_limits<double>::infinity();
    rep.gradient_upper = -std::numeric_limits<double>::infinity();
    for (double x : grid) {
        double g = generator_residual(x);
        double up = u_prime(x);
        bool inside = x > a_star && x < b_star;
        if (inside) rep.equality_inside = std::max(rep.equality_inside, std::abs(g));
        else rep.inequality_outside = std::min(rep.inequality_outside, g);
        rep.gradient_lower = std::max(rep.gradient_lower, -c.c1(x) - up);
        rep.gradient_upper = std::max(rep.gradient_upper, up - c.c2(x));
        double mn = std::min({g, c.c2(x) - up, up + c.c1(x)});
        rep.min_term = std::max(rep.min_term, std::abs(mn) / (1.0 + std::abs(c.h(x))));
        ++rep.points;
    }
    return rep;
}

}  // namespace tzone
