#pragma once

#include <tzone/error.hpp>
#include <tzone/exit_analysis.hpp>
#include <tzone/free_boundary.hpp>
#include <tzone/ou_target_zone.hpp>
#include <tzone/parallel.hpp>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace tzone {

struct SimConfig {
    double dt = 1e-3;          // years
    double horizon = 2764.0;   // years; e^{-r horizon} <= 1e-6 at r = 0.005
    std::uint64_t n_paths = 10000;
    std::uint64_t seed = 20240101;
    bool antithetic = true;
    int trace_paths = 0;       // number of leading paths to trace, at most 10
    std::uint64_t trace_every = 1;  // record every k-th step in traces

    std::uint64_t steps() const { return static_cast<std::uint64_t>(std::ceil(horizon / dt - 1e-9)); }
    // Independent units: antithetic pairs or single paths.
    std::uint64_t units() const { return antithetic ? (n_paths + 1) / 2 : n_paths; }
    std::uint64_t effective_paths() const { return antithetic ? 2 * units() : n_paths; }

    void validate() const {
        if (!(dt > 0.0) || !(horizon > 0.0) || dt > horizon)
            throw DomainError("SimConfig: need 0 < dt <= horizon");
        if (n_paths < 2) throw DomainError("SimConfig: need at least 2 paths");
        if (trace_paths < 0 || trace_paths > 10) throw DomainError("SimConfig: trace_paths must be in [0, 10]");
        if (trace_every == 0) throw DomainError("SimConfig: trace_every must be positive");
    }
};

struct ExitStats {
    double p_lower = 0.0, p_lower_se = 0.0;
    double mean_time = 0.0, time_se = 0.0;
    std::uint64_t censored = 0;
};

struct SimReport {
    double cost_mean = 0.0;
    double cost_stderr = 0.0;
    double truncation_bound = 0.0;
    double xi_total_mean = 0.0;
    double eta_total_mean = 0.0;
    std::optional<ExitStats> exit_stats;
    Band band;
    double x0 = 0.0;
    SimConfig config;

    double ci_low() const { return cost_mean - 3.0 * cost_stderr; }
    double ci_high() const { return cost_mean + 3.0 * cost_stderr; }
};

struct TraceRow {
    int path = 0;
    double t = 0.0, x = 0.0, xi = 0.0, eta = 0.0;
};

namespace detail {

inline std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x7a6f6e65u};
    return std::mt19937_64(seq);
}

struct Moments {
    double sum = 0.0, sum2 = 0.0;
    std::uint64_t n = 0;
    void add(double v) {
        sum += v;
        sum2 += v * v;
        ++n;
    }
    double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
    double stderr_() const {
        if (n < 2) return 0.0;
        double mu = mean();
        double var = (sum2 - static_cast<double>(n) * mu * mu) / static_cast<double>(n - 1);
        return std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
    }
};

struct NoHook {
    static constexpr bool active = false;
    void step(int, std::uint64_t, double, double, double, double, double, double) {}
};

// Per-unit results for each band: discounted cost, total xi and eta (unit averages).
struct UnitResult {
    std::vector<double> cost, xi, eta;
};

// Euler-Maruyama step, then projection onto [a, b]. The projected amount feeds xi
// (at a) or eta (at b) and is charged at the post-step discount factor. Holding cost is
// integrated with the trapezoidal rule.
// Slot state for up to NJ (band, lane) combinations; fixed size so the step loop
// vectorises.
template <int NJ>
struct Slots {
    alignas(64) double x[NJ], lo[NJ], hi[NJ], sg[NJ], xi[NJ], eta[NJ], ctrl[NJ], hold[NJ];
};

// Euler-Maruyama step, then projection onto [a, b]. The projected amount feeds xi
// (at a) or eta (at b) and is charged at the post-step discount factor. Holding cost is
// integrated with the trapezoidal rule.
template <int NJ, class Hook>
double advance(Slots<NJ>& st, int lanes, const OuSpec& s, const SimConfig& cfg, std::uint64_t unit, Hook& hook) {
    const std::uint64_t n = cfg.steps();
    const double dt = cfg.dt, sq = s.sigma * std::sqrt(dt), rho_dt = s.rho * dt, m = s.m, th = s.theta;
    const double c1 = s.c1, c2 = s.c2;
    const double decay = std::exp(-s.r * dt);
    auto engine = path_engine(cfg.seed, unit);
    boost::random::normal_distribution<double> normal;
    double disc = 1.0;
    for (std::uint64_t i = 1; i <= n; ++i) {
        const double z = normal(engine) * sq;
        disc *= decay;
        for (int j = 0; j < NJ; ++j) {
            double pre = st.x[j] + rho_dt * (m - st.x[j]) + st.sg[j] * z;
            double below = st.lo[j] - pre, above = pre - st.hi[j];
            double dxi = below > 0.0 ? below : 0.0;
            double deta = above > 0.0 ? above : 0.0;
            double xa = pre < st.lo[j] ? st.lo[j] : pre;
            double xn = xa > st.hi[j] ? st.hi[j] : xa;
            double d = xn - th;
            st.xi[j] += dxi;
            st.eta[j] += deta;
            st.ctrl[j] += disc * (c1 * dxi + c2 * deta);
            st.hold[j] += disc * (d * d);
            st.x[j] = xn;
            if constexpr (Hook::active) hook.step(j % lanes, i, i * dt, pre, xn, dxi, deta, disc);
        }
    }
    return disc;
}

template <int NJ, class Hook>
UnitResult run_group(const OuSpec& s, const std::vector<Band>& bands, double x0, const SimConfig& cfg,
                     std::uint64_t unit, Hook& hook) {
    const int lanes = cfg.antithetic ? 2 : 1;
    const size_t nb = bands.size();
    const double th = s.theta, c1 = s.c1, c2 = s.c2;
    Slots<NJ> st;
    for (int j = 0; j < NJ; ++j) {
        // padding slots repeat the last band and are ignored
        size_t k = std::min(static_cast<size_t>(j / lanes), nb - 1);
        int l = j % lanes;
        double up = std::max(0.0, bands[k].a - x0), down = std::max(0.0, x0 - bands[k].b);
        st.lo[j] = bands[k].a;
        st.hi[j] = bands[k].b;
        st.sg[j] = l == 0 ? 1.0 : -1.0;
        st.x[j] = std::clamp(x0, bands[k].a, bands[k].b);
        st.xi[j] = up;
        st.eta[j] = down;
        st.ctrl[j] = c1 * up + c2 * down;
        st.hold[j] = 0.5 * (st.x[j] - th) * (st.x[j] - th);  // first trapezoid weight
        if constexpr (Hook::active)
            if (static_cast<size_t>(j) < nb * lanes) hook.step(l, 0, 0.0, x0, st.x[j], up, down, 1.0);
    }
    const double disc = advance<NJ>(st, lanes, s, cfg, unit, hook);
    UnitResult out;
    out.cost.resize(nb);
    out.xi.resize(nb);
    out.eta.resize(nb);
    for (size_t k = 0; k < nb; ++k) {
        double c = 0.0, sxi = 0.0, seta = 0.0;
        for (int l = 0; l < lanes; ++l) {
            size_t j = k * lanes + l;
            double d = st.x[j] - th;
            // holding cost is (x - theta)^2 / 2; slots accumulate (x - theta)^2
            double held = 0.5 * cfg.dt * (st.hold[j] - 0.5 * disc * d * d);
            c += held + st.ctrl[j];
            sxi += st.xi[j];
            seta += st.eta[j];
        }
        if (!std::isfinite(c)) {
            std::ostringstream os;
            os << "non-finite path cost in unit " << unit;
            throw SimulationError(os.str());
        }
        out.cost[k] = c / lanes;
        out.xi[k] = sxi / lanes;
        out.eta[k] = seta / lanes;
    }
    return out;
}

// All bands see the same increments (same engine per unit). Bands are processed in
// groups of at most 8 antithetic pairs.
template <class Hook>
UnitResult run_unit(const OuSpec& s, const std::vector<Band>& bands, double x0, const SimConfig& cfg,
                    std::uint64_t unit, Hook& hook) {
    const size_t lanes = cfg.antithetic ? 2 : 1;
    const size_t per_group = 16 / lanes;
    UnitResult out;
    for (size_t g = 0; g < bands.size(); g += per_group) {
        std::vector<Band> sub(bands.begin() + g, bands.begin() + std::min(bands.size(), g + per_group));
        size_t nj = sub.size() * lanes;
        UnitResult r = nj <= 2   ? run_group<2>(s, sub, x0, cfg, unit, hook)
                       : nj <= 4 ? run_group<4>(s, sub, x0, cfg, unit, hook)
                       : nj <= 8 ? run_group<8>(s, sub, x0, cfg, unit, hook)
                                 : run_group<16>(s, sub, x0, cfg, unit, hook);
        out.cost.insert(out.cost.end(), r.cost.begin(), r.cost.end());
        out.xi.insert(out.xi.end(), r.xi.begin(), r.xi.end());
        out.eta.insert(out.eta.end(), r.eta.begin(), r.eta.end());
    }
    return out;
}

inline double truncation_bound(const OuSpec& s, const Band& band, double horizon) {
    double hmax = 0.5 * std::max((band.a - s.theta) * (band.a - s.theta), (band.b - s.theta) * (band.b - s.theta));
    return std::exp(-s.r * horizon) * hmax / s.r;
}

inline void check_band(const Band& b) {
    if (!(b.a < b.b)) {
        std::ostringstream os;
        os << "band requires a < b, got (" << b.a << ", " << b.b << ")";
        throw DomainError(os.str());
    }
}

// Runs all bands on common random numbers; one report per band.
inline std::vector<SimReport> run_bands(const OuSpec& s, const std::vector<Band>& bands, double x0,
                                        const SimConfig& cfg) {
    cfg.validate();
    for (const auto& b : bands) check_band(b);
    const std::uint64_t units = cfg.units();
    std::vector<UnitResult> res(units);
    parallel_for(units, [&](size_t u) {
        NoHook hook;
        res[u] = run_unit(s, bands, x0, cfg, u, hook);
    });
    std::vector<SimReport> reps(bands.size());
    for (size_t k = 0; k < bands.size(); ++k) {
        Moments c, xi, eta;
        for (const auto& r : res) {
            c.add(r.cost[k]);
            xi.add(r.xi[k]);
            eta.add(r.eta[k]);
        }
        auto& rep = reps[k];
        rep.cost_mean = c.mean();
        rep.cost_stderr = c.stderr_();
        rep.xi_total_mean = xi.mean();
        rep.eta_total_mean = eta.mean();
        rep.truncation_bound = truncation_bound(s, bands[k], cfg.horizon);
        rep.band = bands[k];
        rep.x0 = x0;
        rep.config = cfg;
    }
    return reps;
}

}  // namespace detail

namespace detail {

struct ReflectAudit {
    static constexpr bool active = true;
    Band band;
    int trace_limit = 0;
    std::uint64_t every = 1;
    std::uint64_t unit = 0;
    int lanes = 1;
    double x_min = std::numeric_limits<double>::infinity(), x_max = -std::numeric_limits<double>::infinity();
    std::uint64_t both = 0, misplaced = 0;
    double misplaced_mass = 0.0;
    double xi[2] = {0, 0}, eta[2] = {0, 0};
    std::vector<TraceRow> trace;
    void step(int lane, std::uint64_t i, double t, double pre, double x, double dxi, double deta, double) {
        xi[lane] += dxi;
        eta[lane] += deta;
        if (i > 0) {
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            if (dxi > 0.0 && deta > 0.0) ++both;
            if ((dxi > 0.0 && !(pre < band.a)) || (deta > 0.0 && !(pre > band.b))) {
                ++misplaced;
                misplaced_mass += dxi + deta;
            }
        }
        int path = static_cast<int>(unit * lanes + lane);
        if (path < trace_limit && i % every == 0) trace.push_back({path, t, x, xi[lane], eta[lane]});
    }
};

}  // namespace detail

// Path-level audit of the reflected scheme.
struct PathStats {
    std::uint64_t paths = 0, steps = 0;
    double x_min = 0.0, x_max = 0.0;          // over t > 0
    double xi_mean = 0.0, eta_mean = 0.0;      // undiscounted totals
    double initial_xi = 0.0, initial_eta = 0.0;  // jump at t = 0
    std::uint64_t simultaneous_pushes = 0;     // steps where xi and eta both increased
    std::uint64_t misplaced_pushes = 0;        // xi increments whose unclamped state is not below a (eta: above b)
    double misplaced_mass = 0.0;
    std::vector<TraceRow> trace;
};

inline PathStats simulate_reflected(const OuSpec& s, const Band& band, double x0, const SimConfig& cfg) {
    cfg.validate();
    detail::check_band(band);
    if (!std::isfinite(x0)) throw DomainError("simulate_reflected: x0 must be finite");
    const std::uint64_t units = cfg.units();
    const int lanes = cfg.antithetic ? 2 : 1;

    std::vector<detail::ReflectAudit> hooks(units);
    std::vector<detail::UnitResult> res(units);
    parallel_for(units, [&](size_t u) {
        auto& h = hooks[u];
        h.band = band;
        h.trace_limit = cfg.trace_paths;
        h.every = cfg.trace_every;
        h.unit = u;
        h.lanes = lanes;
        res[u] = detail::run_unit(s, {band}, x0, cfg, u, h);
    });

    PathStats ps;
    ps.paths = cfg.effective_paths();
    ps.steps = cfg.steps();
    ps.x_min = std::numeric_limits<double>::infinity();
    ps.x_max = -std::numeric_limits<double>::infinity();
    ps.initial_xi = std::max(0.0, band.a - x0);
    ps.initial_eta = std::max(0.0, x0 - band.b);
    double xs = 0.0, es = 0.0;
    for (size_t u = 0; u < units; ++u) {
        const auto& h = hooks[u];
        ps.x_min = std::min(ps.x_min, h.x_min);
        ps.x_max = std::max(ps.x_max, h.x_max);
        ps.simultaneous_pushes += h.both;
        ps.misplaced_pushes += h.misplaced;
        ps.misplaced_mass += h.misplaced_mass;
        xs += res[u].xi[0];
        es += res[u].eta[0];
        ps.trace.insert(ps.trace.end(), h.trace.begin(), h.trace.end());
    }
    ps.xi_mean = xs / static_cast<double>(units);
    ps.eta_mean = es / static_cast<double>(units);
    std::stable_sort(ps.trace.begin(), ps.trace.end(),
                     [](const TraceRow& p, const TraceRow& q) { return p.path < q.path; });
    return ps;
}

// Discounted cost of the band policy from x0:
// int e^{-rt} h(X) dt + c1 int e^{-rt} dxi + c2 int e^{-rt} deta, truncated at the horizon.
inline SimReport estimate_cost(const OuSpec& s, const Band& band, double x0, const SimConfig& cfg) {
    return detail::run_bands(s, {band}, x0, cfg).front();
}

struct BandOffset {
    std::string label;
    double da = 0.0, db = 0.0;
};

// Centred width changes of +-10% and +-25%, and shifts of +-0.01.
inline std::vector<BandOffset> standard_perturbations(const Band& band) {
    double w = band.b - band.a;
    auto width = [w](const char* label, double f) { return BandOffset{label, -0.5 * f * w, 0.5 * f * w}; };
    return {width("width+10%", 0.10), width("width-10%", -0.10), width("width+25%", 0.25),
            width("width-25%", -0.25), BandOffset{"shift+0.01", 0.01, 0.01}, BandOffset{"shift-0.01", -0.01, -0.01}};
}

struct GapRow {
    std::string label;
    Band band;
    double cost = 0.0, cost_se = 0.0;
    double gap = 0.0;  // cost - v(x0)
    double truncation_bound = 0.0;
};

struct PolicyGap {
    double value = 0.0;  // analytic v(x0)
    std::vector<GapRow> rows;  // rows[0] is the unperturbed band
};

// Costs of the optimal band and of perturbed bands on common random numbers, against the
// analytic value at x0.
inline PolicyGap policy_gap(const OuSpec& s, const BandSolution& sol, double x0,
                            const std::vector<BandOffset>& perturbations, const SimConfig& cfg) {
    Band opt{sol.a_star, sol.b_star};
    std::vector<Band> bands{opt};
    std::vector<std::string> labels{"optimal"};
    for (const auto& p : perturbations) {
        Band b{opt.a + p.da, opt.b + p.db};
        if (!(b.a < b.b)) throw DomainError("policy_gap: perturbation '" + p.label + "' collapses the band");
        bands.push_back(b);
        labels.push_back(p.label);
    }
    auto reps = detail::run_bands(s, bands, x0, cfg);
    PolicyGap out;
    out.value = sol.u(x0);
    for (size_t k = 0; k < bands.size(); ++k) {
        out.rows.push_back({labels[k], bands[k], reps[k].cost_mean, reps[k].cost_stderr,
                            reps[k].cost_mean - out.value, reps[k].truncation_bound});
    }
    return out;
}

namespace detail {

// Probability that a Brownian bridge of variance s2 between x0 and x1 (same side of the
// level) touches the level.
inline double bridge_cross(double x0, double x1, double level, double s2) {
    double d = (x0 - level) * (x1 - level);
    if (d <= 0.0) return 1.0;
    return std::exp(-2.0 * d / s2);
}

}  // namespace detail

// Uncontrolled paths absorbed at a or b; crossings between grid times detected with the
// Brownian-bridge probability. Exit times are recorded at the end of the crossing step.
inline SimReport simulate_exit(const OuSpec& s, const Band& band, double x0, const SimConfig& cfg) {
    cfg.validate();
    detail::check_band(band);
    if (!(x0 >= band.a && x0 <= band.b)) throw DomainError("simulate_exit: x0 outside the band");
    const std::uint64_t units = cfg.units();
    const int lanes = cfg.antithetic ? 2 : 1;
    const std::uint64_t n = cfg.steps();
    const double dt = cfg.dt, sq = s.sigma * std::sqrt(dt), s2 = s.sigma * s.sigma * dt;
    struct U {
        double low = 0.0, time = 0.0;
        std::uint64_t censored = 0;
    };
    std::vector<U> res(units);
    parallel_for(units, [&](size_t u) {
        auto engine = detail::path_engine(cfg.seed, u);
        boost::random::normal_distribution<double> normal;
        boost::random::uniform_01<double> unif;
        // each lane owns its uniforms so that lanes stay independent of each other's exits
        auto engine_u = detail::path_engine(cfg.seed ^ 0x9e3779b97f4a7c15ull, u);
        double x[2] = {x0, x0};
        bool done[2] = {false, false};
        double low = 0.0, time = 0.0;
        int alive = lanes;
        for (int l = 0; l < lanes; ++l) {
            if (x0 <= band.a || x0 >= band.b) {
                done[l] = true;
                --alive;
                low += x0 <= band.a ? 1.0 : 0.0;
            }
        }
        for (std::uint64_t i = 1; i <= n && alive > 0; ++i) {
            double z = normal(engine) * sq;
            for (int l = 0; l < lanes; ++l) {
                if (done[l]) continue;
                double prev = x[l];
                double nx = prev + s.rho * dt * (s.m - prev) + (l == 0 ? z : -z);
                int hit = 0;  // -1 lower, +1 upper
                if (nx <= band.a) hit = -1;
                else if (nx >= band.b) hit = 1;
                else {
                    double pa = detail::bridge_cross(prev, nx, band.a, s2);
                    double pb = detail::bridge_cross(prev, nx, band.b, s2);
                    if (pa > 1e-15 || pb > 1e-15) {
                        double v = unif(engine_u);
                        if (v < pa) hit = -1;
                        else if (v < pa + pb) hit = 1;
                    }
                }
                x[l] = nx;
                if (hit != 0) {
                    done[l] = true;
                    --alive;
                    low += hit < 0 ? 1.0 : 0.0;
                    time += i * dt;
                }
            }
        }
        res[u].censored = static_cast<std::uint64_t>(alive);
        res[u].low = low / lanes;
        res[u].time = (time + alive * n * dt) / lanes;
    });
    detail::Moments pl, tm;
    std::uint64_t cens = 0;
    for (const auto& r : res) {
        pl.add(r.low);
        tm.add(r.time);
        cens += r.censored;
    }
    SimReport rep;
    rep.band = band;
    rep.x0 = x0;
    rep.config = cfg;
    rep.exit_stats = ExitStats{pl.mean(), pl.stderr_(), tm.mean(), tm.stderr_(), cens};
    return rep;
}

struct DynkinEstimate {
    double mean = 0.0, stderr_ = 0.0;
    std::uint64_t censored = 0;
};

// Saddle-point stopping rule for the derivative of the value: run the hat process (same
// OU dynamics, discount r + rho) from x until it leaves (a, b). Payoff:
// int_0^{T} e^{-(r+rho)t} h'(X) dt - c1 e^{-(r+rho)T} on exit at a, + c2 e^{-(r+rho)T} at b.
inline DynkinEstimate dynkin_game_value(const OuSpec& s, const Band& band, double x, const SimConfig& cfg) {
    cfg.validate();
    detail::check_band(band);
    if (x <= band.a) return {-s.c1, 0.0, 0};
    if (x >= band.b) return {s.c2, 0.0, 0};
    const std::uint64_t units = cfg.units();
    const int lanes = cfg.antithetic ? 2 : 1;
    const std::uint64_t n = cfg.steps();
    const double dt = cfg.dt, sq = s.sigma * std::sqrt(dt), s2 = s.sigma * s.sigma * dt;
    const double decay = std::exp(-(s.r + s.rho) * dt);
    std::vector<double> pay(units);
    std::vector<std::uint64_t> cens(units);
    parallel_for(units, [&](size_t u) {
        auto engine = detail::path_engine(cfg.seed, u);
        auto engine_u = detail::path_engine(cfg.seed ^ 0x9e3779b97f4a7c15ull, u);
        boost::random::normal_distribution<double> normal;
        boost::random::uniform_01<double> unif;
        double total = 0.0;
        std::uint64_t alive_end = 0;
        double xs[2] = {x, x}, run[2] = {0, 0}, hprev[2] = {x - s.theta, x - s.theta};
        bool done[2] = {false, false};
        int alive = lanes;
        double disc = 1.0;
        for (std::uint64_t i = 1; i <= n && alive > 0; ++i) {
            double z = normal(engine) * sq;
            double dnext = disc * decay;
            for (int l = 0; l < lanes; ++l) {
                if (done[l]) continue;
                double prev = xs[l];
                double nx = prev + s.rho * dt * (s.m - prev) + (l == 0 ? z : -z);
                int hit = 0;
                if (nx <= band.a) hit = -1;
                else if (nx >= band.b) hit = 1;
                else {
                    double pa = detail::bridge_cross(prev, nx, band.a, s2);
                    double pb = detail::bridge_cross(prev, nx, band.b, s2);
                    if (pa > 1e-15 || pb > 1e-15) {
                        double v = unif(engine_u);
                        if (v < pa) hit = -1;
                        else if (v < pa + pb) hit = 1;
                    }
                }
                if (hit != 0) {
                    double level = hit < 0 ? band.a : band.b;
                    run[l] += 0.5 * dt * (disc * hprev[l] + dnext * (level - s.theta));
                    run[l] += hit < 0 ? -s.c1 * dnext : s.c2 * dnext;
                    done[l] = true;
                    --alive;
                } else {
                    double hn = nx - s.theta;
                    run[l] += 0.5 * dt * (disc * hprev[l] + dnext * hn);
                    hprev[l] = hn;
                    xs[l] = nx;
                }
            }
            disc = dnext;
        }
        for (int l = 0; l < lanes; ++l) total += run[l];
        alive_end = static_cast<std::uint64_t>(alive);
        pay[u] = total / lanes;
        cens[u] = alive_end;
    });
    detail::Moments mo;
    DynkinEstimate est;
    for (size_t u = 0; u < units; ++u) {
        mo.add(pay[u]);
        est.censored += cens[u];
    }
    est.mean = mo.mean();
    est.stderr_ = mo.stderr_();
    return est;
}

// Occupation estimate: E int_0^H e^{-k t} f(X_t) dt for the uncontrolled OU process,
// with k the given killing rate. Used to cross-check Green kernels.
template <class F>
DynkinEstimate discounted_occupation(const OuSpec& s, double killing, F&& f, double x, const SimConfig& cfg) {
    cfg.validate();
    const std::uint64_t units = cfg.units();
    const int lanes = cfg.antithetic ? 2 : 1;
    const std::uint64_t n = cfg.steps();
    const double dt = cfg.dt, sq = s.sigma * std::sqrt(dt), decay = std::exp(-killing * dt);
    std::vector<double> out(units);
    parallel_for(units, [&](size_t u) {
        auto engine = detail::path_engine(cfg.seed, u);
        boost::random::normal_distribution<double> normal;
        double xs[2] = {x, x}, acc = 0.0;
        double fprev[2] = {f(x), f(x)};
        double disc = 1.0;
        for (std::uint64_t i = 1; i <= n; ++i) {
            double z = normal(engine) * sq;
            double dn = disc * decay;
            for (int l = 0; l < lanes; ++l) {
                xs[l] += s.rho * dt * (s.m - xs[l]) + (l == 0 ? z : -z);
                double fv = f(xs[l]);
                acc += 0.5 * dt * (disc * fprev[l] + dn * fv);
                fprev[l] = fv;
            }
            disc = dn;
        }
        out[u] = acc / lanes;
    });
    detail::Moments mo;
    for (double v : out) mo.add(v);
    return {mo.mean(), mo.stderr_(), 0};
}

// Exactly discretised OU sample path on a uniform grid, returned as (time, exp(X)).
inline std::vector<std::pair<double, double>> simulate_ou_series(const OuSpec& s, double x0, double dt,
                                                                 std::size_t n, std::uint64_t seed) {
    if (!(dt > 0.0) || n < 2) throw DomainError("simulate_ou_series: need dt > 0 and n >= 2");
    auto engine = detail::path_engine(seed, 0);
    boost::random::normal_distribution<double> normal;
    const double phi = std::exp(-s.rho * dt);
    const double sd = s.sigma * std::sqrt((1.0 - phi * phi) / (2.0 * s.rho));
    std::vector<std::pair<double, double>> out(n);
    double x = x0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = {i * dt, std::exp(x)};
        x = s.m + phi * (x - s.m) + sd * normal(engine);
    }
    return out;
}

inline nlohmann::json to_json(const SimReport& r) {
    nlohmann::json j;
    j["cost_mean"] = r.cost_mean;
    j["cost_stderr"] = r.cost_stderr;
    j["ci_low"] = r.ci_low();
    j["ci_high"] = r.ci_high();
    j["truncation_bound"] = r.truncation_bound;
    j["xi_total_mean"] = r.xi_total_mean;
    j["eta_total_mean"] = r.eta_total_mean;
    j["band"] = {{"a", r.band.a}, {"b", r.band.b}};
    j["x0"] = r.x0;
    j["config"] = {{"dt", r.config.dt},
                   {"horizon", r.config.horizon},
                   {"n_paths", r.config.n_paths},
                   {"seed", r.config.seed},
                   {"antithetic", r.config.antithetic}};
    if (r.exit_stats) {
        const auto& e = *r.exit_stats;
        j["exit_stats"] = {{"p_lower", e.p_lower},
                           {"p_lower_se", e.p_lower_se},
                           {"mean_time", e.mean_time},
                           {"time_se", e.time_se},
                           {"censored", e.censored}};
    } else {
        j["exit_stats"] = nullptr;
    }
    return j;
}

inline SimReport sim_report_from_json(const nlohmann::json& j) {
    SimReport r;
    r.cost_mean = j.at("cost_mean").get<double>();
    r.cost_stderr = j.at("cost_stderr").get<double>();
    r.truncation_bound = j.at("truncation_bound").get<double>();
    r.xi_total_mean = j.at("xi_total_mean").get<double>();
    r.eta_total_mean = j.at("eta_total_mean").get<double>();
    r.band = {j.at("band").at("a").get<double>(), j.at("band").at("b").get<double>()};
    r.x0 = j.at("x0").get<double>();
    const auto& c = j.at("config");
    r.config.dt = c.at("dt").get<double>();
    r.config.horizon = c.at("horizon").get<double>();
    r.config.n_paths = c.at("n_paths").get<std::uint64_t>();
    r.config.seed = c.at("seed").get<std::uint64_t>();
    r.config.antithetic = c.at("antithetic").get<bool>();
    if (!j.at("exit_stats").is_null()) {
        const auto& e = j.at("exit_stats");
        r.exit_stats = ExitStats{e.at("p_lower").get<double>(), e.at("p_lower_se").get<double>(),
                                 e.at("mean_time").get<double>(), e.at("time_se").get<double>(),
                                 e.at("censored").get<std::uint64_t>()};
    }
    return r;
}

}  // namespace tzone
