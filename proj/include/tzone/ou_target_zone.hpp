#pragma once

#include <tzone/diffusion.hpp>
#include <tzone/error.hpp>
#include <tzone/free_boundary.hpp>
#include <tzone/numerics.hpp>
#include <tzone/parallel.hpp>
#include <tzone/special_fn.hpp>

#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace tzone {

// dX = rho (m - X) dt + sigma dW, holding cost (x - theta)^2 / 2, constant marginal
// costs c1 (buying) and c2 (selling). Rates are per year.
struct OuSpec {
    double rho = 0.001;
    double m = 2.009606351256158;  // log 7.46038
    double sigma = 0.015;
    double r = 0.005;
    double c1 = 0.0335;
    double c2 = 0.0335;
    double theta = 2.009606351256158;

    // Defaults of the numerical case study: EUR/DKK level 7.46038 as both long-run mean
    // and central parity.
    static OuSpec defaults() { return OuSpec{}; }

    void validate() const {
        std::ostringstream os;
        if (!(rho > 0.0)) os << "rho must be positive; ";
        if (!(sigma > 0.0)) os << "sigma must be positive; ";
        if (!(r > 0.0)) os << "r must be positive; ";
        if (!(c1 + c2 > 0.0)) os << "c1 + c2 must be positive; ";
        if (!(std::isfinite(m) && std::isfinite(theta))) os << "m and theta must be finite; ";
        if (!os.str().empty()) throw ConstructionError("OuSpec: " + os.str());
    }

    // sigma / sqrt(2 rho): stationary standard deviation.
    double stationary_sd() const { return sigma / std::sqrt(2.0 * rho); }
    double x_tilde_1() const { return theta - (r + rho) * c1; }
    double x_tilde_2() const { return theta + (r + rho) * c2; }
};

inline DiffusionModel ou_model(const OuSpec& s) {
    s.validate();
    DiffusionModel d;
    double rho = s.rho, m = s.m, sg = s.sigma;
    d.mu = [rho, m](double x) { return rho * (m - x); };
    d.mu_prime = [rho](double) { return -rho; };
    d.sigma = [sg](double) { return sg; };
    d.sigma_prime = [](double) { return 0.0; };
    d.r = s.r;
    d.anchor = s.m;
    return d;
}

// Closed-form fundamental solutions through parabolic cylinder functions, normalised to
// 1 at x = m. Orders: -r/rho (base) and -(r + rho)/rho (hat).
inline FundamentalPair ou_pair(const OuSpec& s, Kind k) {
    s.validate();
    const double alpha = k == Kind::base ? -s.r / s.rho : -(s.r + s.rho) / s.rho;
    const CylinderOrder ord(alpha);
    const CylinderOrder ord1(alpha - 1.0);
    const double kz = std::sqrt(2.0 * s.rho) / s.sigma;
    const double m = s.m;
    const double log_norm = log_pcf_d(ord, 0.0);
    // d/dz log D_alpha(z)
    auto dlog = [ord, ord1, alpha](double z, double ld) {
        return alpha * std::exp(log_pcf_d(ord1, z) - ld) - 0.5 * z;
    };
    FundamentalPair p;
    p.kind = k;
    p.anchor = m;
    p.length_scale = s.stationary_sd();
    p.psi = [=](double x) {
        double y = kz * (x - m);
        return std::exp(0.25 * y * y + log_pcf_d(ord, -y) - log_norm);
    };
    p.dpsi = [=](double x) {
        double y = kz * (x - m);
        double ld = log_pcf_d(ord, -y);
        return std::exp(0.25 * y * y + ld - log_norm) * kz * (0.5 * y - dlog(-y, ld));
    };
    p.phi = [=](double x) {
        double y = kz * (x - m);
        return std::exp(0.25 * y * y + log_pcf_d(ord, y) - log_norm);
    };
    p.dphi = [=](double x) {
        double y = kz * (x - m);
        double ld = log_pcf_d(ord, y);
        return std::exp(0.25 * y * y + ld - log_norm) * kz * (0.5 * y + dlog(y, ld));
    };
    // base and hat scale densities coincide for constant sigma
    const double rho = s.rho, sg2 = s.sigma * s.sigma;
    p.scale = [=](double x) { return std::exp(rho * (x - m) * (x - m) / sg2); };
    p.speed = [=](double x) { return 2.0 / sg2 * std::exp(-rho * (x - m) * (x - m) / sg2); };
    return p;
}

inline FundamentalPair ou_hat_pair(const OuSpec& s) { return ou_pair(s, Kind::hat); }
inline FundamentalPair ou_base_pair(const OuSpec& s) { return ou_pair(s, Kind::base); }

// Expected discounted holding cost of the uncontrolled process:
// int_0^inf e^{-rt} (1/2) E[(X_t - theta)^2] dt in closed form.
inline ResolventTerms ou_rh(const OuSpec& s) {
    const double r = s.r, rho = s.rho, m = s.m, d = m - s.theta;
    const double var_term = s.sigma * s.sigma / (2.0 * rho) * (1.0 / r - 1.0 / (r + 2.0 * rho));
    ResolventTerms t;
    t.value = [=](double x) {
        double y = x - m;
        return 0.5 * (d * d / r + 2.0 * d * y / (r + rho) + y * y / (r + 2.0 * rho) + var_term);
    };
    t.first = [=](double x) { return d / (r + rho) + (x - m) / (r + 2.0 * rho); };
    t.second = [=](double) { return 1.0 / (r + 2.0 * rho); };
    return t;
}

inline CostModel ou_cost(const OuSpec& s) {
    const double th = s.theta;
    auto c = constant_costs(
        ou_model(s), [th](double x) { return 0.5 * (x - th) * (x - th); }, [th](double x) { return x - th; }, s.c1,
        s.c2);
    c.x_tilde_1 = s.x_tilde_1();
    c.x_tilde_2 = s.x_tilde_2();
    return c;
}

inline std::shared_ptr<const BandProblem> ou_problem(const OuSpec& s) {
    return std::make_shared<const BandProblem>(ou_model(s), ou_cost(s), ou_base_pair(s), ou_hat_pair(s), ou_rh(s));
}

inline BandSolution solve_ou_band(const OuSpec& s) { return solve_band(ou_problem(s)); }

// Common cost c = c1 = c2 whose optimal band has the width of (target_a, target_b).
inline double calibrate_costs(OuSpec s, double target_a, double target_b) {
    if (!(target_a < target_b)) throw CalibrationError("calibrate_costs: need target_a < target_b");
    const double width = target_b - target_a;
    auto gap = [&](double log_c) {
        s.c1 = s.c2 = std::exp(log_c);
        auto sol = solve_ou_band(s);
        return (sol.b_star - sol.a_star) - width;
    };
    double c;
    try {
        // width grows with c; walk outward from c = 0.05 in log steps
        double x0 = std::log(0.05);
        double g0 = gap(x0);
        Bracket br = g0 > 0 ? expand_bracket(gap, x0, -1.0, std::log(1e-10), 40)
                            : expand_bracket(gap, x0, 1.0, std::log(1e6), 40);
        RootOptions ro;
        ro.x_tol = 1e-11;
        c = std::exp(brent_root(gap, br.lo, br.hi, br.f_lo, br.f_hi, ro));
    } catch (const SolverError& e) {
        throw CalibrationError(std::string("calibrate_costs: target width not attainable; ") + e.what());
    }
    s.c1 = s.c2 = c;
    auto sol = solve_ou_band(s);
    double err = std::abs((sol.b_star - sol.a_star) - width);
    if (err > 1e-4) {
        std::ostringstream os;
        os << "calibrate_costs: round-trip width error " << err;
        throw CalibrationError(os.str());
    }
    return c;
}

enum class SweepParam { m, sigma, c1, c2, theta };

inline SweepParam parse_sweep_param(const std::string& name) {
    if (name == "m") return SweepParam::m;
    if (name == "sigma") return SweepParam::sigma;
    if (name == "c1") return SweepParam::c1;
    if (name == "c2") return SweepParam::c2;
    if (name == "theta") return SweepParam::theta;
    throw DomainError("unknown sweep parameter '" + name + "' (expected m, sigma, c1, c2 or theta)");
}

inline const char* to_string(SweepParam p) {
    switch (p) {
        case SweepParam::m: return "m";
        case SweepParam::sigma: return "sigma";
        case SweepParam::c1: return "c1";
        case SweepParam::c2: return "c2";
        case SweepParam::theta: return "theta";
    }
    return "?";
}

struct SweepRow {
    double value = 0.0, a_star = 0.0, b_star = 0.0;
    std::string error;  // empty on success
};

struct SweepResult {
    SweepParam param{};
    std::vector<SweepRow> rows;
    int a_direction = 0, b_direction = 0;  // expected sign of the change: +1 or -1
    bool a_verdict = false, b_verdict = false;
};

inline std::pair<int, int> expected_directions(SweepParam p) {
    switch (p) {
        case SweepParam::m: return {-1, -1};
        case SweepParam::sigma: return {-1, +1};
        case SweepParam::c1: return {-1, +1};
        case SweepParam::c2: return {-1, +1};
        case SweepParam::theta: return {+1, +1};
    }
    return {0, 0};
}

inline SweepResult sweep(const OuSpec& spec, SweepParam param, const std::vector<double>& values) {
    for (size_t i = 1; i < values.size(); ++i)
        if (!(values[i] > values[i - 1])) throw DomainError("sweep: values must be strictly increasing");
    SweepResult res;
    res.param = param;
    res.rows.resize(values.size());
    parallel_for(values.size(), [&](size_t i) {
        OuSpec s = spec;
        double v = values[i];
        switch (param) {
            case SweepParam::m: s.m = v; break;
            case SweepParam::sigma: s.sigma = v; break;
            case SweepParam::c1: s.c1 = v; break;
            case SweepParam::c2: s.c2 = v; break;
            case SweepParam::theta: s.theta = v; break;
        }
        SweepRow& row = res.rows[i];
        row.value = v;
        try {
            auto sol = solve_ou_band(s);
            row.a_star = sol.a_star;
            row.b_star = sol.b_star;
        } catch (const Error& e) {
            row.a_star = row.b_star = std::numeric_limits<double>::quiet_NaN();
            row.error = e.what();
        }
    });
    auto [da, db] = expected_directions(param);
    res.a_direction = da;
    res.b_direction = db;
    res.a_verdict = res.b_verdict = res.rows.size() >= 2;
    for (size_t i = 1; i < res.rows.size(); ++i) {
        const auto& p = res.rows[i - 1];
        const auto& q = res.rows[i];
        if (!p.error.empty() || !q.error.empty()) {
            res.a_verdict = res.b_verdict = false;
            continue;
        }
        if (!(da * (q.a_star - p.a_star) > 0.0)) res.a_verdict = false;
        if (!(db * (q.b_star - p.b_star) > 0.0)) res.b_verdict = false;
    }
    return res;
}

struct OuFit {
    double rho = 0.0, m = 0.0, sigma = 0.0;
    double se_rho = 0.0, se_m = 0.0, se_sigma = 0.0;
    double phi = 0.0;  // AR(1) coefficient e^{-rho dt}
    double dt = 0.0;
    size_t n = 0;
    bool degenerate = false;         // zero variance
    bool mean_reverting = true;      // false when the AR(1) coefficient is not inside (0, 1)
    std::string warning;
};

// Exact Gaussian AR(1) maximum likelihood (stationary first observation included) on
// log rates, mapped to OU parameters. The likelihood is profiled over mean and innovation
// variance and maximised over kappa = rho dt on a log scale.
inline OuFit fit_ou_mle(const std::vector<std::pair<double, double>>& series) {
    const size_t n = series.size();
    if (n < 30) throw IngestionError("fit_ou_mle: need at least 30 observations");
    // mean spacing; each step may deviate by 0.1% (rounded timestamps), not by a missing row
    const double dt = (series[n - 1].first - series[0].first) / static_cast<double>(n - 1);
    if (!(dt > 0.0)) throw IngestionError("fit_ou_mle: time must be increasing");
    std::vector<double> x(n);
    for (size_t i = 0; i < n; ++i) {
        if (!(series[i].second > 0.0)) {
            std::ostringstream os;
            os << "fit_ou_mle: non-positive rate at row " << i;
            throw IngestionError(os.str());
        }
        if (i > 0) {
            double step = series[i].first - series[i - 1].first;
            if (std::abs(step - dt) > 1e-3 * dt) {
                std::ostringstream os;
                os << "fit_ou_mle: non-uniform spacing at row " << i;
                throw IngestionError(os.str());
            }
        }
        x[i] = std::log(series[i].second);
    }
    OuFit fit;
    fit.dt = dt;
    fit.n = n;

    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    if (var <= 1e-30 * std::max(1.0, mean * mean) * static_cast<double>(n)) {
        fit.degenerate = true;
        fit.mean_reverting = false;
        fit.m = mean;
        fit.warning = "constant series: volatility is zero and mean reversion is not identified";
        return fit;
    }
    // centre for conditioning; the estimates are shift-equivariant
    for (double& v : x) v -= mean;

    struct Profile {
        double mu, s2, loglik;
    };
    auto profile = [&](double phi) {
        const double q = 1.0 - phi * phi;
        double sx_all = 0.0, sx_mid = 0.0;
        for (size_t i = 0; i < n; ++i) sx_all += x[i];
        for (size_t i = 1; i + 1 < n; ++i) sx_mid += x[i];
        double mu = (sx_all - phi * sx_mid) * (1.0 - phi) / (q + (n - 1.0) * (1.0 - phi) * (1.0 - phi));
        double ss = q * (x[0] - mu) * (x[0] - mu);
        for (size_t i = 1; i < n; ++i) {
            double e = (x[i] - mu) - phi * (x[i - 1] - mu);
            ss += e * e;
        }
        double s2 = ss / static_cast<double>(n);
        return Profile{mu, s2, -0.5 * static_cast<double>(n) * std::log(s2) + 0.5 * std::log(q)};
    };
    auto neg = [&](double log_kappa) { return -profile(std::exp(-std::exp(log_kappa))).loglik; };

    const double lo = std::log(1e-10), hi = std::log(20.0);
    const int coarse = 240;
    int best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= coarse; ++i) {
        double v = neg(lo + (hi - lo) * i / coarse);
        if (v < best_v) {
            best_v = v;
            best = i;
        }
    }
    double step = (hi - lo) / coarse;
    double a = lo + step * std::max(0, best - 1), b = lo + step * std::min(coarse, best + 1);
    auto opt = boost::math::tools::brent_find_minima(neg, a, b, 40);
    double kappa = std::exp(opt.first);
    double phi = std::exp(-kappa);
    auto pr = profile(phi);

    fit.phi = phi;
    fit.rho = kappa / dt;
    fit.m = pr.mu + mean;
    double s2 = pr.s2;
    double q = 1.0 - phi * phi;
    fit.sigma = std::sqrt(2.0 * fit.rho * s2 / q);
    const double nn = static_cast<double>(n);
    double se_phi = std::sqrt(q / nn);
    fit.se_rho = se_phi / (phi * dt);
    fit.se_m = std::sqrt(s2) / ((1.0 - phi) * std::sqrt(nn));
    // delta method on sigma^2 = -2 log(phi) s2 / (dt (1 - phi^2))
    double dsig2_dphi = (-2.0 * s2 / dt) * (q / phi + 2.0 * phi * std::log(phi)) / (q * q);
    double se_s2 = s2 * std::sqrt(2.0 / nn);
    double se_sig2 = std::sqrt(dsig2_dphi * dsig2_dphi * se_phi * se_phi +
                               (fit.sigma * fit.sigma / s2) * (fit.sigma * fit.sigma / s2) * se_s2 * se_s2);
    fit.se_sigma = se_sig2 / (2.0 * fit.sigma);
    if (best == 0) {
        fit.mean_reverting = false;
        fit.warning = "AR(1) coefficient at the unit-root boundary: mean reversion not identified";
    } else if (best == coarse) {
        fit.mean_reverting = false;
        fit.warning = "AR(1) coefficient at zero or negative: no persistence at this sampling interval";
    }
    return fit;
}

}  // namespace tzone
