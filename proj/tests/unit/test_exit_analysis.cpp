#include <tzone/exit_analysis.hpp>
#include <tzone/mc_simulator.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tzone;

namespace {

const Band kSym{1.9870746157, 2.0321380852};
const Band kShift{2.0071043410, 2.0521678290};

oracle::OuExit exit_oracle(const OuSpec& s, const Band& b) {
    double k = std::sqrt(2 * s.rho) / s.sigma;
    return {s.rho, (b.a - s.m) * k, (b.b - s.m) * k};
}

double z_of(const OuSpec& s, double x) { return (x - s.m) * std::sqrt(2 * s.rho) / s.sigma; }

}  // namespace

TEST(ExitProbabilities, EndpointsAndSymmetry) {
    OuSpec s;
    auto pa = exit_probabilities(s, kSym, kSym.a);
    EXPECT_EQ(pa.p_lower, 1.0);
    EXPECT_EQ(pa.p_upper, 0.0);
    auto pb = exit_probabilities(s, kSym, kSym.b);
    EXPECT_EQ(pb.p_lower, 0.0);
    EXPECT_EQ(pb.p_upper, 1.0);
    Band centred{s.m - 0.02, s.m + 0.02};
    auto pm = exit_probabilities(s, centred, s.m);
    EXPECT_NEAR(pm.p_lower, 0.5, 1e-14);
    EXPECT_THROW(exit_probabilities(s, kSym, 2.5), DomainError);
    EXPECT_THROW(exit_probabilities(s, {2.0, 1.9}, 1.95), DomainError);
}

TEST(ExitProbabilities, NormalisedAndMonotone) {
    OuSpec s;
    for (const Band& b : {kSym, kShift, Band{s.m - 1.5, s.m + 0.5}}) {
        auto p = exit_profile(s, b, 301);
        for (size_t i = 0; i < p.grid.size(); ++i) {
            if (i) {
                EXPECT_GT(p.p_upper[i], p.p_upper[i - 1]);
            }
            EXPECT_NEAR(p.p_lower[i] + p.p_upper[i], 1.0, 1e-10);
        }
    }
}

TEST(ExitProbabilities, SeriesOracle) {
    OuSpec s;
    Band wide{s.m - 4 * s.stationary_sd(), s.m + 3.5 * s.stationary_sd()};
    auto o = exit_oracle(s, wide);
    for (double x : {wide.a + 0.01, s.m - 0.3, s.m, s.m + 0.9}) {
        EXPECT_NEAR(exit_probabilities(s, wide, x).p_lower, o.p_lower(z_of(s, x)), 1e-10) << x;
    }
}

TEST(ScaledErfi, MatchesSeriesForModerateArguments) {
    for (double z1 = -4.0; z1 <= 4.0; z1 += 0.5) {
        for (double z2 : {-3.7, -0.2, 0.0, 1.3, 4.0}) {
            if (z2 <= z1) continue;
            double shift = 0.5 * std::max(z1 * z1, z2 * z2);
            double want = oracle::erfi_integral_series(z1, z2) * std::exp(-shift);
            EXPECT_LE(std::abs(scaled_erfi_integral(z1, z2, shift) - want), 1e-10 * std::abs(want)) << z1 << " " << z2;
        }
    }
}

TEST(ScaledErfi, NoOverflowForWideBands) {
    double v = scaled_erfi_integral(-40.0, 45.0, 0.5 * 45.0 * 45.0);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_NEAR(v * 45.0, 1.0, 1e-3);  // dominated by the upper endpoint: ~ 1/z
}

TEST(ExpectedExitTime, ZeroAtEndpointsAndPositiveInside) {
    OuSpec s;
    EXPECT_EQ(expected_exit_time(s, kSym, kSym.a), 0.0);
    EXPECT_EQ(expected_exit_time(s, kSym, kSym.b), 0.0);
    EXPECT_GT(expected_exit_time(s, kSym, s.m), 0.0);
    EXPECT_THROW(expected_exit_time(s, kSym, 1.0), DomainError);
}

TEST(ExpectedExitTime, GreenFunctionOracle) {
    OuSpec s;
    for (const Band& b : {kSym, kShift, Band{s.m - 4 * s.stationary_sd(), s.m + 4 * s.stationary_sd()}}) {
        auto o = exit_oracle(s, b);
        for (int i = 1; i < 8; ++i) {
            double x = b.a + (b.b - b.a) * i / 8.0;
            double want = o.expected_time(z_of(s, x));
            EXPECT_LE(std::abs(expected_exit_time(s, b, x) - want), 1e-8 * want) << x;
        }
    }
}

TEST(ExpectedExitTime, BoundaryValueProblemResidual) {
    OuSpec s;
    for (const Band& b : {kSym, kShift}) {
        const double h = 1e-4;
        double qmax = 0.0;
        for (int i = 1; i <= 50; ++i) qmax = std::max(qmax, expected_exit_time(s, b, b.a + (b.b - b.a) * i / 51.0));
        for (int i = 1; i <= 50; ++i) {
            double x = b.a + (b.b - b.a) * i / 51.0;
            double q0 = expected_exit_time(s, b, x), qp = expected_exit_time(s, b, x + h),
                   qm = expected_exit_time(s, b, x - h);
            double res = 0.5 * s.sigma * s.sigma * (qp - 2 * q0 + qm) / (h * h) + s.rho * (s.m - x) * (qp - qm) / (2 * h) + 1.0;
            EXPECT_LE(std::abs(res), 1e-4) << x;
        }
        EXPECT_GT(qmax, 0.0);
    }
}

TEST(ExitProfile, SymmetricAboutMean) {
    OuSpec s;
    Band b{s.m - 0.0225, s.m + 0.0225};
    auto p = exit_profile(s, b, 101);
    ASSERT_EQ(p.grid.size(), 101u);
    EXPECT_EQ(p.grid.front(), b.a);
    EXPECT_EQ(p.grid.back(), b.b);
    EXPECT_EQ(p.expected_time.front(), 0.0);
    EXPECT_EQ(p.expected_time.back(), 0.0);
    for (size_t i = 0; i < p.grid.size(); ++i) {
        EXPECT_NEAR(p.expected_time[i], p.expected_time[100 - i], 1e-8);
        EXPECT_NEAR(p.p_lower[i], p.p_upper[100 - i], 1e-8);
    }
    auto k = std::max_element(p.expected_time.begin(), p.expected_time.end()) - p.expected_time.begin();
    EXPECT_EQ(k, 50);
    EXPECT_THROW(exit_profile(s, b, 1), DomainError);
}

TEST(ExpectedExitTime, MonteCarloAgreement) {
    OuSpec s;
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.horizon = 60.0;
    cfg.n_paths = 10000;
    cfg.seed = 515;
    for (int i = 1; i <= 5; ++i) {
        double x = kShift.a + (kShift.b - kShift.a) * i / 6.0;
        auto rep = simulate_exit(s, kShift, x, cfg);
        ASSERT_TRUE(rep.exit_stats.has_value());
        const auto& e = *rep.exit_stats;
        EXPECT_EQ(e.censored, 0u);
        double q = expected_exit_time(s, kShift, x);
        EXPECT_LE(std::abs(e.mean_time - q), 3 * e.time_se) << x << ": " << e.mean_time << " vs " << q;
        double p = exit_probabilities(s, kShift, x).p_lower;
        EXPECT_LE(std::abs(e.p_lower - p), 3 * e.p_lower_se + 1e-12) << x;
    }
}
