#include <tzone/mc_simulator.hpp>
#include <tzone/ou_target_zone.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace tzone;

namespace {

SimConfig small(double horizon = 50.0, std::uint64_t paths = 400) {
    SimConfig c;
    c.dt = 1e-3;
    c.horizon = horizon;
    c.n_paths = paths;
    c.seed = 8;
    return c;
}

const Band kBand{1.9870746157, 2.0321380852};

}  // namespace

TEST(SimConfig, Validation) {
    SimConfig c;
    EXPECT_NO_THROW(c.validate());
    c.dt = 0.0;
    EXPECT_THROW(c.validate(), DomainError);
    c = SimConfig{};
    c.horizon = 1e-4;
    EXPECT_THROW(c.validate(), DomainError);
    c = SimConfig{};
    c.trace_paths = 11;
    EXPECT_THROW(c.validate(), DomainError);
    EXPECT_LE(std::exp(-0.005 * SimConfig{}.horizon), 1e-6 * (1 + 1e-9));
}

TEST(Reflection, NoNoiseNoControl) {
    OuSpec s;
    s.sigma = 1e-12;  // effectively deterministic; sigma must stay positive
    auto ps = simulate_reflected(s, kBand, 2.0, small(20.0, 4));
    EXPECT_EQ(ps.xi_mean, 0.0);
    EXPECT_EQ(ps.eta_mean, 0.0);
    EXPECT_GE(ps.x_min, kBand.a);
    EXPECT_LE(ps.x_max, kBand.b);
}

TEST(Reflection, InitialJump) {
    OuSpec s;
    auto ps = simulate_reflected(s, kBand, kBand.b + 0.01, small(1.0, 10));
    EXPECT_NEAR(ps.initial_eta, 0.01, 1e-15);
    EXPECT_EQ(ps.initial_xi, 0.0);
    auto ps2 = simulate_reflected(s, kBand, kBand.a - 0.02, small(1.0, 10));
    EXPECT_NEAR(ps2.initial_xi, 0.02, 1e-15);
    EXPECT_GE(ps2.xi_mean, 0.02);
}

TEST(Reflection, PathsStayInBandAndPushesAreComplementary) {
    OuSpec s;
    s.sigma = 0.05;  // frequent boundary contact
    auto cfg = small(20.0, 200);
    cfg.trace_paths = 3;
    cfg.trace_every = 100;
    auto ps = simulate_reflected(s, kBand, 2.01, cfg);
    EXPECT_GE(ps.x_min, kBand.a);
    EXPECT_LE(ps.x_max, kBand.b);
    EXPECT_EQ(ps.simultaneous_pushes, 0u);
    EXPECT_EQ(ps.misplaced_pushes, 0u);
    EXPECT_EQ(ps.misplaced_mass, 0.0);
    EXPECT_GT(ps.xi_mean, 0.0);
    EXPECT_GT(ps.eta_mean, 0.0);
    ASSERT_FALSE(ps.trace.empty());
    double xi_prev = 0.0;
    int path = ps.trace.front().path;
    for (const auto& r : ps.trace) {
        EXPECT_LT(r.path, 3);
        if (r.path != path) {
            path = r.path;
            xi_prev = 0.0;
        }
        EXPECT_GE(r.xi, xi_prev);
        xi_prev = r.xi;
        EXPECT_GE(r.x, kBand.a);
        EXPECT_LE(r.x, kBand.b);
    }
}

TEST(EstimateCost, DeterministicForFixedSeed) {
    OuSpec s;
    auto a = estimate_cost(s, kBand, 2.0, small(30.0, 300));
    auto b = estimate_cost(s, kBand, 2.0, small(30.0, 300));
    EXPECT_EQ(a.cost_mean, b.cost_mean);
    EXPECT_EQ(a.cost_stderr, b.cost_stderr);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    auto cfg = small(30.0, 300);
    cfg.seed = 9;
    EXPECT_NE(estimate_cost(s, kBand, 2.0, cfg).cost_mean, a.cost_mean);
}

TEST(EstimateCost, ThreadCountDoesNotChangeResult) {
    OuSpec s;
    auto cfg = small(10.0, 64);
    auto a = estimate_cost(s, kBand, 2.0, cfg);
    setenv("BAND_SOLVE_THREADS", "3", 1);
    auto b = estimate_cost(s, kBand, 2.0, cfg);
    unsetenv("BAND_SOLVE_THREADS");
    EXPECT_EQ(a.cost_mean, b.cost_mean);
}

TEST(EstimateCost, JsonRoundTrip) {
    OuSpec s;
    auto rep = simulate_exit(s, kBand, 2.0, small(30.0, 100));
    auto back = sim_report_from_json(to_json(rep));
    EXPECT_EQ(to_json(back).dump(), to_json(rep).dump());
    auto rep2 = estimate_cost(s, kBand, 2.0, small(5.0, 20));
    EXPECT_EQ(to_json(sim_report_from_json(to_json(rep2))).dump(), to_json(rep2).dump());
}

TEST(EstimateCost, HalvingStepIsWithinNoise) {
    OuSpec s;
    auto c1 = small(100.0, 10000);
    auto c2 = c1;
    c2.dt = 2e-3;
    auto a = estimate_cost(s, kBand, 2.0, c1);
    auto b = estimate_cost(s, kBand, 2.0, c2);
    double se = std::hypot(a.cost_stderr, b.cost_stderr);
    EXPECT_LE(std::abs(a.cost_mean - b.cost_mean), 3 * se) << a.cost_mean << " " << b.cost_mean;
}

TEST(EstimateCost, TruncationBoundReported) {
    OuSpec s;
    auto rep = estimate_cost(s, kBand, 2.0, small(10.0, 10));
    double hmax = 0.5 * std::max(std::pow(kBand.a - s.theta, 2), std::pow(kBand.b - s.theta, 2));
    EXPECT_NEAR(rep.truncation_bound, std::exp(-s.r * 10.0) * hmax / s.r, 1e-12);
    EXPECT_LE(rep.ci_low(), rep.cost_mean);
    EXPECT_GE(rep.ci_high(), rep.cost_mean);
}

TEST(PolicyGap, DegenerateBandIsCostly) {
    OuSpec s;
    auto sol = solve_ou_band(s);
    double mid = 0.5 * (sol.a_star + sol.b_star), w = sol.b_star - sol.a_star;
    std::vector<BandOffset> perts{{"narrow", mid - 5e-4 - sol.a_star, mid + 5e-4 - sol.b_star}};
    EXPECT_NEAR(w + perts[0].db - perts[0].da, 1e-3, 1e-12);
    auto g = policy_gap(s, sol, s.m, perts, small(100.0, 1000));
    ASSERT_EQ(g.rows.size(), 2u);
    EXPECT_EQ(g.rows[0].label, "optimal");
    double diff = g.rows[1].cost - g.rows[0].cost;
    EXPECT_GT(diff, 3 * std::hypot(g.rows[0].cost_se, g.rows[1].cost_se));
    EXPECT_GT(g.rows[1].gap, 0.0);
}

TEST(PolicyGap, StandardPerturbations) {
    auto p = standard_perturbations({1.0, 2.0});
    ASSERT_EQ(p.size(), 6u);
    EXPECT_NEAR(p[0].db - p[0].da, 0.1, 1e-12);  // width +10%
    for (const auto& o : p) EXPECT_FALSE(o.label.empty());
    OuSpec s;
    auto sol = solve_ou_band(s);
    EXPECT_THROW(policy_gap(s, sol, s.m, {{"collapse", 0.1, -0.1}}, small(1.0, 10)), DomainError);
}

TEST(Dynkin, BoundaryLimits) {
    OuSpec s;
    auto cfg = small(20.0, 200);
    EXPECT_EQ(dynkin_game_value(s, kBand, kBand.a, cfg).mean, -s.c1);
    EXPECT_EQ(dynkin_game_value(s, kBand, kBand.b, cfg).mean, s.c2);
    EXPECT_NEAR(dynkin_game_value(s, kBand, kBand.a + 1e-6, cfg).mean, -s.c1, 0.02 * s.c1);
    EXPECT_NEAR(dynkin_game_value(s, kBand, kBand.b - 1e-6, cfg).mean, s.c2, 0.02 * s.c2);
}

TEST(Dynkin, MatchesAnalyticDerivativeOffCentre) {
    OuSpec s;
    auto sol = solve_ou_band(s);
    double x = sol.a_star + 0.3 * (sol.b_star - sol.a_star);
    SimConfig cfg = small(80.0, 4000);
    auto d = dynkin_game_value(s, {sol.a_star, sol.b_star}, x, cfg);
    EXPECT_EQ(d.censored, 0u);
    EXPECT_LE(std::abs(d.mean - sol.u_prime(x)), 3 * d.stderr_) << d.mean << " vs " << sol.u_prime(x);
}

TEST(OuSeries, ExactDiscretisationMoments) {
    OuSpec s;
    s.rho = 1.0;
    s.sigma = 0.2;
    auto series = simulate_ou_series(s, s.m, 0.1, 50000, 1);
    double mean = 0.0, var = 0.0;
    for (const auto& [t, v] : series) mean += std::log(v);
    mean /= series.size();
    for (const auto& [t, v] : series) var += std::pow(std::log(v) - mean, 2);
    var /= series.size();
    EXPECT_NEAR(mean, s.m, 0.01);
    EXPECT_NEAR(var / (s.sigma * s.sigma / 2.0), 1.0, 0.05);
    EXPECT_DOUBLE_EQ(series[10].first, 1.0);
}
