#pragma once

#include <tzone/error.hpp>
#include <tzone/exit_analysis.hpp>
#include <tzone/free_boundary.hpp>
#include <tzone/io.hpp>
#include <tzone/mc_simulator.hpp>
#include <tzone/ou_target_zone.hpp>
#include <tzone/reference_values.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace tzone::cli {

using nlohmann::json;

// Round to nine significant digits so that JSON output matches the CSV precision.
inline double r9(double v) {
    if (!std::isfinite(v)) return v;
    return std::stod(fmt9(v));
}

inline json round_all(json j) {
    if (j.is_number_float()) return r9(j.get<double>());
    if (j.is_array() || j.is_object())
        for (auto& v : j) v = round_all(v);
    return j;
}

struct RunConfig {
    std::string command;
    OuSpec spec;
    std::optional<double> c;  // sets c1 and c2 unless they are given explicitly
    std::optional<double> a, b;
    std::optional<double> x0;
    int grid_n = 101;
    SimConfig sim;
    std::string out;
    std::string format = "csv";

    // sweep
    std::string param;
    std::vector<double> values;
    std::optional<double> start, stop;
    int count = 5;

    // simulate
    std::string mode = "cost";
    std::string trace_out;
    int trace = 0;

    // fit
    std::string series;
};

// Writes text to cfg.out, or to the stream when no path is given.
inline void emit(const RunConfig& cfg, std::ostream& out, const std::string& text) {
    if (cfg.out.empty()) {
        out << text;
        return;
    }
    std::ofstream f(cfg.out);
    if (!f) throw IngestionError("cannot write '" + cfg.out + "'");
    f << text;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p);
    if (!f) throw IngestionError("cannot write '" + p.string() + "'");
    f << text;
}

inline std::string csv_text(const CsvTable& t) {
    std::ostringstream os;
    write_csv(os, t);
    return os.str();
}

inline json table_json(const CsvTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows) {
        json o;
        for (size_t i = 0; i < t.header.size(); ++i) o[t.header[i]] = r[i];
        rows.push_back(o);
    }
    json j{{"rows", rows}};
    if (!t.comments.empty()) j["notes"] = t.comments;
    return round_all(j);
}

inline std::string render(const RunConfig& cfg, const CsvTable& t) {
    return cfg.format == "json" ? table_json(t).dump(2) + "\n" : csv_text(t);
}

inline Band resolve_band(const RunConfig& cfg, const OuSpec& s) {
    if (cfg.a && cfg.b) return {*cfg.a, *cfg.b};
    auto sol = solve_ou_band(s);
    return {cfg.a.value_or(sol.a_star), cfg.b.value_or(sol.b_star)};
}

inline int cmd_solve(const RunConfig& cfg, std::ostream& out) {
    auto sol = solve_ou_band(cfg.spec);
    double w = sol.b_star - sol.a_star;
    CsvTable t;
    t.header = {"x", "u", "u_prime"};
    for (int i = 0; i < cfg.grid_n; ++i) {
        double x = sol.a_star - w + 3.0 * w * i / (cfg.grid_n - 1);
        t.rows.push_back({x, sol.u(x), sol.u_prime(x)});
    }
    if (cfg.format == "json") {
        json j = table_json(t);
        j["a_star"] = r9(sol.a_star);
        j["b_star"] = r9(sol.b_star);
        j["A"] = r9(sol.coeff_A);
        j["B"] = r9(sol.coeff_B);
        emit(cfg, out, j.dump(2) + "\n");
        return 0;
    }
    std::ostringstream head;
    head << "a_star = " << fmt9(sol.a_star) << "\n"
         << "b_star = " << fmt9(sol.b_star) << "\n"
         << "A = " << fmt9(sol.coeff_A) << "\n"
         << "B = " << fmt9(sol.coeff_B) << "\n";
    out << head.str();
    if (cfg.out.empty()) out << "\n";
    emit(cfg, out, csv_text(t));
    return 0;
}

inline int cmd_calibrate(const RunConfig& cfg, std::ostream& out) {
    const double centre = std::log(reference::parity_level);
    double ta = cfg.a.value_or(centre + std::log1p(-reference::band_half_width));
    double tb = cfg.b.value_or(centre + std::log1p(reference::band_half_width));
    double c = calibrate_costs(cfg.spec, ta, tb);
    OuSpec s = cfg.spec;
    s.c1 = s.c2 = c;
    auto sol = solve_ou_band(s);
    double err = std::abs((sol.b_star - sol.a_star) - (tb - ta));
    if (cfg.format == "json") {
        json j{{"c", c},          {"target_a", ta},   {"target_b", tb},
               {"a_star", sol.a_star}, {"b_star", sol.b_star}, {"width_error", err}};
        emit(cfg, out, round_all(j).dump(2) + "\n");
        return 0;
    }
    std::ostringstream os;
    os << "c = " << fmt9(c) << "\n"
       << "target_a = " << fmt9(ta) << "\n"
       << "target_b = " << fmt9(tb) << "\n"
       << "a_star = " << fmt9(sol.a_star) << "\n"
       << "b_star = " << fmt9(sol.b_star) << "\n"
       << "width_error = " << fmt9(err) << "\n";
    emit(cfg, out, os.str());
    return 0;
}

inline int cmd_exit(const RunConfig& cfg, std::ostream& out) {
    Band band = resolve_band(cfg, cfg.spec);
    emit(cfg, out, render(cfg, profile_table(exit_profile(cfg.spec, band, cfg.grid_n))));
    return 0;
}

inline json gap_json(const PolicyGap& g) {
    json rows = json::array();
    for (const auto& r : g.rows) {
        rows.push_back({{"label", r.label},
                        {"a", r.band.a},
                        {"b", r.band.b},
                        {"cost", r.cost},
                        {"cost_stderr", r.cost_se},
                        {"gap", r.gap},
                        {"truncation_bound", r.truncation_bound}});
    }
    return {{"value", g.value}, {"rows", rows}};
}

inline int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    const OuSpec& s = cfg.spec;
    double x0 = cfg.x0.value_or(s.m);
    SimConfig sc = cfg.sim;
    json j;
    if (cfg.mode == "gap") {
        auto sol = solve_ou_band(s);
        j = gap_json(policy_gap(s, sol, x0, standard_perturbations({sol.a_star, sol.b_star}), sc));
        j["mode"] = "gap";
    } else {
        Band band = resolve_band(cfg, s);
        if (cfg.mode == "cost") {
            j = to_json(estimate_cost(s, band, x0, sc));
        } else if (cfg.mode == "exit") {
            j = to_json(simulate_exit(s, band, x0, sc));
            auto p = exit_probabilities(s, band, std::clamp(x0, band.a, band.b));
            j["analytic"] = {{"p_lower", p.p_lower},
                             {"expected_time", expected_exit_time(s, band, std::clamp(x0, band.a, band.b))}};
        } else if (cfg.mode == "dynkin") {
            auto d = dynkin_game_value(s, band, x0, sc);
            j = {{"mean", d.mean}, {"stderr", d.stderr_}, {"censored", d.censored},
                 {"band", {{"a", band.a}, {"b", band.b}}}, {"x0", x0}};
            if (!cfg.a && !cfg.b) j["analytic_u_prime"] = solve_ou_band(s).u_prime(x0);
        } else {
            throw DomainError("unknown simulate mode '" + cfg.mode + "'");
        }
        j["mode"] = cfg.mode;
        if (cfg.trace > 0) {
            SimConfig tc = sc;
            tc.n_paths = std::max<std::uint64_t>(2, static_cast<std::uint64_t>(cfg.trace));
            tc.trace_paths = cfg.trace;
            tc.trace_every = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(0.1 / sc.dt)));
            auto ps = simulate_reflected(s, band, x0, tc);
            if (cfg.trace_out.empty()) throw DomainError("--trace requires --trace-out");
            write_file(cfg.trace_out, csv_text(trace_table(ps.trace)));
        }
    }
    emit(cfg, out, round_all(j).dump(2) + "\n");
    return 0;
}

inline std::vector<double> sweep_values(const RunConfig& cfg) {
    if (!cfg.values.empty()) return cfg.values;
    if (!cfg.start || !cfg.stop) throw DomainError("sweep needs --values or --start/--stop");
    if (cfg.count < 2) throw DomainError("sweep needs --count >= 2");
    std::vector<double> v(cfg.count);
    for (int i = 0; i < cfg.count; ++i) v[i] = *cfg.start + (*cfg.stop - *cfg.start) * i / (cfg.count - 1);
    return v;
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
    auto res = sweep(cfg.spec, parse_sweep_param(cfg.param), sweep_values(cfg));
    emit(cfg, out, render(cfg, sweep_table(res)));
    return 0;
}

inline int cmd_fit(const RunConfig& cfg, std::ostream& out) {
    auto series = read_rate_series_file(cfg.series);
    auto f = fit_ou_mle(series);
    json j{{"rho", f.rho},       {"m", f.m},          {"sigma", f.sigma},  {"se_rho", f.se_rho},
           {"se_m", f.se_m},     {"se_sigma", f.se_sigma}, {"phi", f.phi}, {"dt", f.dt},
           {"n", f.n},           {"degenerate", f.degenerate}, {"mean_reverting", f.mean_reverting},
           {"warning", f.warning}};
    emit(cfg, out, round_all(j).dump(2) + "\n");
    return 0;
}

inline int cmd_reproduce(const RunConfig& cfg, std::ostream& out) {
    namespace fs = std::filesystem;
    fs::path dir = cfg.out.empty() ? fs::path("reproduction") : fs::path(cfg.out);
    fs::create_directories(dir);
    const OuSpec base = cfg.spec;
    json summary;

    // Cost table.
    CsvTable t2;
    t2.header = {"c", "a_star", "b_star", "a_minus_m", "b_minus_m", "reference_a_star", "reference_b_star"};
    {
        const auto& tab = reference::cost_table;
        std::vector<BandSolution> sols(tab.size());
        parallel_for(tab.size(), [&](size_t i) {
            OuSpec s = base;
            s.c1 = s.c2 = tab[i].c;
            sols[i] = solve_ou_band(s);
        });
        double worst = 0.0;
        for (size_t i = 0; i < tab.size(); ++i) {
            const auto& sl = sols[i];
            t2.rows.push_back({tab[i].c, sl.a_star, sl.b_star, sl.a_star - base.m, sl.b_star - base.m,
                               tab[i].a_star, tab[i].b_star});
            worst = std::max({worst, std::abs(sl.a_star - tab[i].a_star), std::abs(sl.b_star - tab[i].b_star)});
        }
        summary["cost_table"] = {{"rows", tab.size()}, {"max_abs_deviation", worst},
                                 {"within_tolerance", worst <= reference::tolerance}};
    }
    write_file(dir / "cost_table.csv", csv_text(t2));

    // Parity-deviation table.
    CsvTable t3;
    t3.header = {"delta", "a_star", "b_star", "a_minus_m", "b_minus_m", "reference_a_star", "reference_b_star"};
    Band band_delta_002;
    {
        const auto& tab = reference::parity_table;
        std::vector<BandSolution> sols(tab.size());
        parallel_for(tab.size(), [&](size_t i) {
            OuSpec s = base;
            s.theta = base.m + tab[i].delta;
            sols[i] = solve_ou_band(s);
        });
        double worst = 0.0;
        for (size_t i = 0; i < tab.size(); ++i) {
            const auto& sl = sols[i];
            t3.rows.push_back({tab[i].delta, sl.a_star, sl.b_star, sl.a_star - base.m, sl.b_star - base.m,
                               tab[i].a_star, tab[i].b_star});
            worst = std::max({worst, std::abs(sl.a_star - tab[i].a_star), std::abs(sl.b_star - tab[i].b_star)});
            if (tab[i].delta == 0.02) band_delta_002 = {sl.a_star, sl.b_star};
        }
        summary["parity_table"] = {{"rows", tab.size()}, {"max_abs_deviation", worst},
                                   {"within_tolerance", worst <= reference::tolerance}};
    }
    write_file(dir / "parity_table.csv", csv_text(t3));

    // Calibration to the +-2.25% band.
    {
        const double centre = std::log(reference::parity_level);
        double ta = centre + std::log1p(-reference::band_half_width);
        double tb = centre + std::log1p(reference::band_half_width);
        double c = calibrate_costs(base, ta, tb);
        summary["calibration"] = {{"target_a", ta}, {"target_b", tb}, {"c", c}};
    }

    const int n = std::max(cfg.grid_n, 201);
    auto profile_summary = [&](const ExitProfile& p) {
        size_t k = 0;
        for (size_t i = 1; i < p.grid.size(); ++i)
            if (p.expected_time[i] > p.expected_time[k]) k = i;
        double x201 = std::clamp(2.01, p.band.a, p.band.b);
        double pl = 1.0;
        double worst_sum = 0.0;
        for (size_t i = 0; i < p.grid.size(); ++i) {
            if (p.grid[i] <= 2.04) pl = std::min(pl, p.p_lower[i]);
            worst_sum = std::max(worst_sum, std::abs(p.p_lower[i] + p.p_upper[i] - 1.0));
        }
        return json{{"band", {{"a", p.band.a}, {"b", p.band.b}}},
                    {"max_expected_time", p.expected_time[k]},
                    {"argmax", p.grid[k]},
                    {"expected_time_at_2_01", expected_exit_time(base, p.band, x201)},
                    {"min_p_lower_for_x_le_2_04", pl},
                    {"max_probability_sum_error", worst_sum}};
    };

    auto sym = solve_ou_band(base);
    auto prof4 = exit_profile(base, {sym.a_star, sym.b_star}, n);
    CsvTable f4;
    f4.header = {"x", "q_years"};
    for (size_t i = 0; i < prof4.grid.size(); ++i) f4.rows.push_back({prof4.grid[i], prof4.expected_time[i]});
    write_file(dir / "exit_time_symmetric.csv", csv_text(f4));
    summary["exit_symmetric"] = profile_summary(prof4);
    summary["exit_symmetric"]["reference_max_expected_time"] = reference::max_exit_time_symmetric;

    OuSpec shifted = base;
    shifted.theta = base.m + 0.02;
    auto prof56 = exit_profile(shifted, band_delta_002, n);
    CsvTable f5, f6;
    f5.header = {"x", "q_years"};
    f6.header = {"x", "p_lower", "p_upper"};
    for (size_t i = 0; i < prof56.grid.size(); ++i) {
        f5.rows.push_back({prof56.grid[i], prof56.expected_time[i]});
        f6.rows.push_back({prof56.grid[i], prof56.p_lower[i], prof56.p_upper[i]});
    }
    write_file(dir / "exit_time_delta_0.02.csv", csv_text(f5));
    write_file(dir / "exit_probabilities_delta_0.02.csv", csv_text(f6));
    summary["exit_delta_0.02"] = profile_summary(prof56);
    summary["exit_delta_0.02"]["reference_expected_time_at_2_01"] = reference::exit_time_at_2_01_delta_002;
    summary["exit_delta_0.02"]["reference_max_expected_time"] = reference::max_exit_time_delta_002;
    summary["exit_delta_0.02"]["reference_argmax"] = reference::argmax_exit_time_delta_002;

    summary["parameters"] = {{"rho", base.rho}, {"m", base.m}, {"sigma", base.sigma},
                             {"r", base.r},     {"theta", base.theta}, {"c1", base.c1}, {"c2", base.c2}};
    write_file(dir / "summary.json", round_all(summary).dump(2) + "\n");
    out << "wrote " << (dir / "cost_table.csv").string() << ", parity_table.csv, exit profiles and summary.json\n";
    return 0;
}

inline void validate(const RunConfig& cfg) {
    std::ostringstream os;
    const auto& s = cfg.spec;
    if (!(s.rho > 0.0)) os << "--rho must be positive; ";
    if (!(s.sigma > 0.0)) os << "--sigma must be positive; ";
    if (!(s.r > 0.0)) os << "--r must be positive; ";
    if (!(s.c1 >= 0.0) || !(s.c2 >= 0.0) || !(s.c1 + s.c2 > 0.0))
        os << "costs must be nonnegative with a positive sum; ";
    if (cfg.a && cfg.b && !(*cfg.a < *cfg.b)) os << "--a must be below --b; ";
    if (cfg.grid_n < 2 || cfg.grid_n > 1000000) os << "--grid-n must be in [2, 1e6]; ";
    if (!(cfg.sim.dt > 0.0) || !(cfg.sim.horizon >= cfg.sim.dt)) os << "need 0 < --dt <= --horizon; ";
    if (cfg.sim.n_paths < 2) os << "--paths must be at least 2; ";
    if (cfg.trace < 0 || cfg.trace > 10) os << "--trace must be in [0, 10]; ";
    if (!os.str().empty()) throw DomainError("invalid configuration: " + os.str());
}

inline json diagnostic(const std::exception& e) {
    json j{{"status", "error"}, {"message", e.what()}};
    if (auto* te = dynamic_cast<const Error*>(&e)) {
        j["kind"] = te->kind();
        if (auto* ne = dynamic_cast<const NumericalError*>(&e)) j["achieved"] = ne->achieved();
    } else {
        j["kind"] = "internal";
    }
    return j;
}

// Exit status: 0 success, 2 invalid arguments or configuration, 3 solver or simulation failure.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Optimal exchange-rate target zones: band solver, exit analysis and simulation.\n"
                 "Time is measured in years; rho, r and sigma are annual rates."};
    app.set_config("--config", "", "key = value configuration file; command-line flags take precedence");
    app.require_subcommand(1, 1);

    auto& s = cfg.spec;
    app.add_option("--rho", s.rho, "Mean-reversion speed per year")->capture_default_str();
    app.add_option("--m", s.m, "Long-run mean of the log rate")->capture_default_str();
    app.add_option("--sigma", s.sigma, "Volatility per sqrt(year)")->capture_default_str();
    app.add_option("--r", s.r, "Discount rate per year")->capture_default_str();
    app.add_option("--c1", s.c1, "Marginal cost of buying foreign currency")->capture_default_str();
    app.add_option("--c2", s.c2, "Marginal cost of selling foreign currency")->capture_default_str();
    app.add_option("--c", cfg.c, "Common marginal cost (c1 = c2 = c)");
    app.add_option("--theta", s.theta, "Central parity (log)")->capture_default_str();
    app.add_option("--a", cfg.a, "Lower band edge (override or calibration target)");
    app.add_option("--b", cfg.b, "Upper band edge (override or calibration target)");
    app.add_option("--x0", cfg.x0, "Initial log rate (default m)");
    app.add_option("--grid-n", cfg.grid_n, "Number of grid points")->capture_default_str();
    app.add_option("--dt", cfg.sim.dt, "Simulation step in years")->capture_default_str();
    app.add_option("--horizon", cfg.sim.horizon, "Simulation horizon in years")->capture_default_str();
    app.add_option("--paths", cfg.sim.n_paths, "Number of simulated paths")->capture_default_str();
    app.add_option("--seed", cfg.sim.seed, "Random seed")->capture_default_str();
    app.add_option("--out", cfg.out, "Output file (directory for reproduce-paper); stdout if omitted");
    app.add_option("--format", cfg.format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();

    auto* solve = app.add_subcommand("solve", "Optimal band, value-function coefficients and samples");
    auto* calib = app.add_subcommand("calibrate", "Common cost c that produces the target band (--a, --b)");
    auto* exitc = app.add_subcommand("exit", "Exit probabilities and expected exit times over the band");
    auto* sim = app.add_subcommand("simulate", "Monte Carlo: cost, exit, dynkin or gap");
    sim->add_option("--mode", cfg.mode, "cost | exit | dynkin | gap")
        ->check(CLI::IsMember({"cost", "exit", "dynkin", "gap"}))
        ->capture_default_str();
    sim->add_option("--trace", cfg.trace, "Trace this many reflected paths (at most 10)");
    sim->add_option("--trace-out", cfg.trace_out, "CSV file for traced paths (t, X, xi, eta)");
    auto* sw = app.add_subcommand("sweep", "Comparative statics over one parameter");
    sw->add_option("--param", cfg.param, "m | sigma | c1 | c2 | theta")->required();
    sw->add_option("--values", cfg.values, "Explicit values")->delimiter(',');
    sw->add_option("--start", cfg.start, "First value");
    sw->add_option("--stop", cfg.stop, "Last value");
    sw->add_option("--count", cfg.count, "Number of values")->capture_default_str();
    auto* fit = app.add_subcommand("fit", "Maximum-likelihood OU fit of a rate series (CSV time,rate)");
    fit->add_option("--series", cfg.series, "Input CSV")->required()->check(CLI::ExistingFile);
    auto* repro = app.add_subcommand("reproduce-paper", "Regenerate the case-study tables and exit profiles");
    for (auto* sc : {solve, calib, exitc, sim, sw, fit, repro}) sc->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return 2;
    }
    if (cfg.c) {
        if (app.count("--c1") == 0) s.c1 = *cfg.c;
        if (app.count("--c2") == 0) s.c2 = *cfg.c;
    }
    cfg.command = app.get_subcommands().front()->get_name();

    try {
        validate(cfg);
        cfg.sim.validate();
    } catch (const Error& e) {
        err << diagnostic(e).dump() << "\n";
        return 2;
    }

    try {
        if (cfg.command == "solve") return cmd_solve(cfg, out);
        if (cfg.command == "calibrate") return cmd_calibrate(cfg, out);
        if (cfg.command == "exit") return cmd_exit(cfg, out);
        if (cfg.command == "simulate") return cmd_simulate(cfg, out);
        if (cfg.command == "sweep") return cmd_sweep(cfg, out);
        if (cfg.command == "fit") return cmd_fit(cfg, out);
        return cmd_reproduce(cfg, out);
    } catch (const std::exception& e) {
        err << diagnostic(e).dump() << "\n";
        return 3;
    }
}

}  // namespace tzone::cli
