#include <tzone/free_boundary.hpp>
#include <tzone/ou_target_zone.hpp>
#include <tzone/reference_values.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tzone;

namespace {

const BandSolution& table1_solution() {
    static const BandSolution sol = solve_ou_band(OuSpec{});
    return sol;
}

std::vector<double> wide_grid(const OuSpec& s, int n = 1000) {
    const double sd = s.stationary_sd();
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = s.m - 10 * sd + 20 * sd * i / (n - 1);
    return g;
}

}  // namespace

TEST(Functionals, EmptyIntervalAndOrder) {
    auto p = ou_problem(OuSpec{});
    EXPECT_EQ(k1(2.0, 2.0, *p), 0.0);
    EXPECT_EQ(k2(2.0, 2.0, *p), 0.0);
    EXPECT_THROW(k1(2.1, 2.0, *p), DomainError);
    EXPECT_THROW(k2(2.0, 2.1, *p), DomainError);
}

TEST(Functionals, K2IncreasingBeyondXTilde2) {
    OuSpec s;
    auto p = ou_problem(s);
    double a = 1.98, prev = k2(s.x_tilde_2(), a, *p);
    for (int i = 1; i <= 10; ++i) {
        double b = s.x_tilde_2() + 0.01 * i;
        double v = k2(b, a, *p);
        EXPECT_GT(v, prev);
        prev = v;
    }
}

TEST(Functionals, FirstEquationHoldsAtSolvedBand) {
    // both sides by an independent quadrature
    OuSpec s;
    const auto& sol = table1_solution();
    auto hat = ou_hat_pair(s);
    const double k = s.r + s.rho;
    auto lhs_f = [&](double z) { return (z - s.theta + k * s.c1) * hat.speed(z) * hat.phi(z); };
    auto tail_f = [&](double z) { return -k * (s.c1 + s.c2) * hat.speed(z) * hat.phi(z); };
    double lhs = oracle::quad(lhs_f, sol.a_star, sol.b_star);
    double rhs = oracle::quad(tail_f, sol.b_star, s.m + 40 * s.stationary_sd());
    EXPECT_LE(std::abs(lhs - rhs), 1e-6 * std::abs(rhs));

    // at the rounded reference boundaries the residual moves by no more than its first-order
    // sensitivity times the rounding
    auto resid = [&](double a, double b) {
        return oracle::quad(lhs_f, a, b) - oracle::quad(tail_f, b, s.m + 40 * s.stationary_sd());
    };
    const double a_pub = 1.98707, b_pub = 2.03214, h = 1e-6;
    double fa = (resid(sol.a_star + h, sol.b_star) - resid(sol.a_star - h, sol.b_star)) / (2 * h);
    double fb = (resid(sol.a_star, sol.b_star + h) - resid(sol.a_star, sol.b_star - h)) / (2 * h);
    double moved = std::abs(fa) * std::abs(a_pub - sol.a_star) + std::abs(fb) * std::abs(b_pub - sol.b_star);
    EXPECT_LE(std::abs(resid(a_pub, b_pub)), 1.1 * moved + 1e-6 * std::abs(rhs));
}

TEST(InnerRoots, LocationAndReferenceRow) {
    OuSpec s;
    auto p = ou_problem(s);
    EXPECT_NEAR(x_star(2.03214, *p), 1.98707, 1e-4);
    for (int i = 0; i < 6; ++i) {
        double b = s.x_tilde_2() + 0.005 + 0.02 * i;
        EXPECT_LT(x_star(b, *p), s.x_tilde_1());
        double a = s.x_tilde_1() - 0.005 - 0.02 * i;
        EXPECT_GT(y_star(a, *p), s.x_tilde_2());
    }
}

TEST(InnerRoots, MonotoneMaps) {
    OuSpec s;
    auto p = ou_problem(s);
    const double h = 1e-5;
    for (int i = 0; i < 10; ++i) {
        double b = s.x_tilde_2() + 0.002 + 0.01 * i;
        EXPECT_LT((x_star(b + h, *p) - x_star(b - h, *p)) / (2 * h), 0.0) << b;
        double a = s.x_tilde_1() - 0.002 - 0.01 * i;
        EXPECT_LT((y_star(a + h, *p) - y_star(a - h, *p)) / (2 * h), 0.0) << a;
    }
}

TEST(SolveBand, ResidualsAndSymmetry) {
    OuSpec s;
    const auto& sol = table1_solution();
    EXPECT_LT(sol.theta_residual, 1e-10);
    EXPECT_LT(sol.first_residual, 1e-10);
    EXPECT_LT(sol.flat_constant_gap, 1e-10);
    EXPECT_NEAR(sol.a_star + sol.b_star, 2 * s.m, 1e-8);
    EXPECT_NEAR(sol.coeff_A, sol.coeff_B, 1e-8 * std::abs(sol.coeff_A));
}

TEST(SolveBand, ReferenceRows) {
    for (double c : {1.0, 0.1}) {
        OuSpec s;
        s.c1 = s.c2 = c;
        auto sol = solve_ou_band(s);
        for (const auto& row : reference::cost_table) {
            if (row.c != c) continue;
            EXPECT_NEAR(sol.a_star, row.a_star, 1e-4);
            EXPECT_NEAR(sol.b_star, row.b_star, 1e-4);
        }
    }
}

TEST(SolveBand, CoefficientFormulasAgreeWithLinearSystem) {
    // Coefficients in the Wronskian form built from R-hat(h' - c1_hat) at a* and
    // R-hat(h' + c2_hat) at b*; R-hat of a linear function is known in closed form.
    OuSpec s;
    const auto& sol = table1_solution();
    auto base = ou_base_pair(s);
    auto hat = ou_hat_pair(s);
    const double k = s.r + s.rho;
    auto rg = [&](double x, double shift) { return (s.m - s.theta + shift) / k + (x - s.m) / (s.r + 2 * s.rho); };
    const double rg1 = 1.0 / (s.r + 2 * s.rho);
    auto coeffs = [&](double x, double shift) {
        double g = rg(x, shift);
        double den = hat.phi(x) * hat.dpsi(x) - hat.dphi(x) * hat.psi(x);
        double ap = (hat.dphi(x) * g - hat.phi(x) * rg1) / den;
        double bp = (hat.dpsi(x) * g - hat.psi(x) * rg1) / den;
        return std::pair{ap, bp};
    };
    const double x0 = s.m + 0.1;
    double kpsi = base.dpsi(x0) / hat.psi(x0), kphi = -base.dphi(x0) / hat.phi(x0);
    for (auto [x, shift] : {std::pair{sol.a_star, k * s.c1}, {sol.b_star, -k * s.c2}}) {
        auto [ap, bp] = coeffs(x, shift);
        EXPECT_NEAR(ap, sol.coeff_A * kpsi, 1e-6 * std::abs(ap)) << x;
        EXPECT_NEAR(-bp, -sol.coeff_B * kphi, 1e-6 * std::abs(bp)) << x;
    }
}

TEST(SolveBand, ScalingInvariance) {
    OuSpec s;
    const auto& ref = table1_solution();
    auto prob = std::make_shared<const BandProblem>(ou_model(s), ou_cost(s), ou_base_pair(s).rescaled(0.3, 17.0),
                                                    ou_hat_pair(s).rescaled(5.0, 0.01), ou_rh(s));
    auto sol = solve_band(prob);
    EXPECT_NEAR(sol.a_star, ref.a_star, 1e-10);
    EXPECT_NEAR(sol.b_star, ref.b_star, 1e-10);
    EXPECT_NEAR(sol.u(s.m), ref.u(s.m), 1e-10);
}

// I and J differences are separable in (a, b), so a grid of cells is cheap. A cell is
// flagged when both differences change sign on its corners; flagged cells are refined until
// they are tiny. The two zero curves are nearly tangent along a + b = const, so the survivors
// form a short strip; all of it must lie within the 1e-4 tolerance of (a*, b*).
TEST(SolveBand, UniqueSignChangeCell) {
    OuSpec s;
    const auto& sol = table1_solution();
    auto p = ou_problem(s);
    struct Cell {
        double a0, a1, b0, b1;
    };
    auto flagged = [&](const Cell& c, int n) {
        std::vector<double> as(n + 1), bs(n + 1);
        std::vector<BandProblem::IJ> lo(n + 1), hi(n + 1);
        for (int i = 0; i <= n; ++i) {
            as[i] = c.a0 + (c.a1 - c.a0) * i / n;
            bs[i] = c.b0 + (c.b1 - c.b0) * i / n;
            lo[i] = p->ij_lower(as[i]);
            hi[i] = p->ij_upper(bs[i]);
        }
        std::vector<Cell> out;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                bool fpos = false, fneg = false, gpos = false, gneg = false;
                for (int di = 0; di < 2; ++di)
                    for (int dj = 0; dj < 2; ++dj) {
                        double f = lo[i + di].i - hi[j + dj].i, g = lo[i + di].j - hi[j + dj].j;
                        (f > 0 ? fpos : fneg) = true;
                        (g > 0 ? gpos : gneg) = true;
                    }
                if (fpos && fneg && gpos && gneg) out.push_back({as[i], as[i + 1], bs[j], bs[j + 1]});
            }
        return out;
    };
    const double xt1 = s.x_tilde_1(), xt2 = s.x_tilde_2(), span = 10 * s.sigma;
    auto cells = flagged({xt1 - span, xt1, xt2, xt2 + span}, 40);
    ASSERT_FALSE(cells.empty());
    for (int level = 0; level < 3; ++level) {
        std::vector<Cell> next;
        for (const auto& c : cells)
            for (const auto& f : flagged(c, 8)) next.push_back(f);
        ASSERT_FALSE(next.empty()) << "level " << level;
        cells = next;
    }
    EXPECT_LT(cells.front().a1 - cells.front().a0, 1e-5);
    bool contains = false;
    for (const auto& c : cells) {
        EXPECT_LE(std::hypot(0.5 * (c.a0 + c.a1) - sol.a_star, 0.5 * (c.b0 + c.b1) - sol.b_star), 1e-4)
            << c.a0 << " " << c.b0;
        contains = contains || (sol.a_star >= c.a0 && sol.a_star <= c.a1 && sol.b_star >= c.b0 && sol.b_star <= c.b1);
    }
    EXPECT_TRUE(contains);
}

TEST(SolveBand, HjbOnWideGrid) {
    OuSpec s;
    const auto& sol = table1_solution();
    auto rep = sol.hjb_residual(wide_grid(s));
    EXPECT_EQ(rep.points, 1000);
    EXPECT_LE(rep.equality_inside, 1e-6);
    EXPECT_GE(rep.inequality_outside, -1e-8);
    EXPECT_LE(rep.gradient_lower, 1e-8);
    EXPECT_LE(rep.gradient_upper, 1e-8);
    EXPECT_LE(rep.min_term, 1e-6);
    for (double x : {sol.a_star - 0.5, sol.a_star - 1e-3, sol.a_star}) EXPECT_EQ(sol.u_prime(x), -s.c1);
    for (double x : {sol.b_star, sol.b_star + 0.2}) EXPECT_EQ(sol.u_prime(x), s.c2);
}

TEST(SolveBand, SmoothFitByOneSidedDifferences) {
    OuSpec s;
    const auto& sol = table1_solution();
    const double h = 1e-5;
    double scale = std::max(1.0, std::abs(sol.u_second(s.m)));
    auto right = [&](double x) {
        return (-3 * sol.u_prime(x) + 4 * sol.u_prime(x + h) - sol.u_prime(x + 2 * h)) / (2 * h);
    };
    auto left = [&](double x) {
        return (3 * sol.u_prime(x) - 4 * sol.u_prime(x - h) + sol.u_prime(x - 2 * h)) / (2 * h);
    };
    EXPECT_LE(std::abs(right(sol.a_star) - left(sol.a_star)) / scale, 1e-5);
    EXPECT_LE(std::abs(right(sol.b_star) - left(sol.b_star)) / scale, 1e-5);
    // value continuity
    EXPECT_NEAR(sol.u(sol.a_star - 1e-12), sol.u(sol.a_star + 1e-12), 1e-12);
}

TEST(SolveBand, GeneralNumericPathAgrees) {
    OuSpec s;
    auto model = ou_model(s);
    auto grid = model.sample_grid(241);
    auto base = fundamental_numeric(model, Kind::base, grid);
    auto hat = fundamental_numeric(model, Kind::hat, grid);
    CostModel cost = constant_costs(
        model, [&](double x) { return 0.5 * (x - s.theta) * (x - s.theta); }, [&](double x) { return x - s.theta; },
        s.c1, s.c2);
    auto sol = solve_band(std::make_shared<const BandProblem>(model, cost, base, hat));
    const auto& ref = table1_solution();
    EXPECT_NEAR(sol.a_star, ref.a_star, 1e-6);
    EXPECT_NEAR(sol.b_star, ref.b_star, 1e-6);
    EXPECT_NEAR(sol.u(s.m), ref.u(s.m), 1e-6 * ref.u(s.m));
}

TEST(SolveBand, ReflectionCovariance) {
    OuSpec s;
    s.theta = s.m + 0.01;
    s.c1 = 0.03;
    s.c2 = 0.05;
    auto sol = solve_ou_band(s);
    const double k = 2.0;
    OuSpec t = s;
    t.m = 2 * k - s.m;
    t.theta = 2 * k - s.theta;
    std::swap(t.c1, t.c2);
    auto ref = solve_ou_band(t);
    EXPECT_NEAR(ref.a_star, 2 * k - sol.b_star, 1e-8);
    EXPECT_NEAR(ref.b_star, 2 * k - sol.a_star, 1e-8);
    EXPECT_NEAR(ref.u(2 * k - 2.02), sol.u(2.02), 1e-8);
}

TEST(SolveBand, RejectsCostsWithoutSignChange) {
    OuSpec s;
    auto model = ou_model(s);
    auto cost = constant_costs(
        model, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); }, s.c1, s.c2);
    EXPECT_THROW(BandProblem(model, cost, ou_base_pair(s), ou_hat_pair(s), ou_rh(s)), ConstructionError);
}
