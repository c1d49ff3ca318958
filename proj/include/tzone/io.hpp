#pragma once

#include <tzone/error.hpp>
#include <tzone/exit_analysis.hpp>
#include <tzone/mc_simulator.hpp>
#include <tzone/ou_target_zone.hpp>

#include <charconv>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace tzone {

// Nine significant digits.
inline std::string fmt9(double v) {
    std::ostringstream os;
    os << std::setprecision(9) << v;
    return os.str();
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> comments;  // lines that started with '#', without the marker

    int column(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw IngestionError("csv: missing column '" + name + "'");
    }
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    size_t start = 0;
    for (;;) {
        size_t pos = line.find(',', start);
        auto cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
        out.push_back(cell);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_double(std::string_view s, size_t line) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
        std::ostringstream os;
        os << "csv: cannot parse '" << s << "' on line " << line;
        throw IngestionError(os.str());
    }
    return v;
}

}  // namespace detail

inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            t.comments.push_back(line.size() > 1 && line[1] == ' ' ? line.substr(2) : line.substr(1));
            continue;
        }
        auto cells = detail::split(line);
        if (t.header.empty()) {
            for (auto c : cells) t.header.emplace_back(c);
            continue;
        }
        if (cells.size() != t.header.size()) {
            std::ostringstream os;
            os << "csv: line " << lineno << " has " << cells.size() << " fields, expected " << t.header.size();
            throw IngestionError(os.str());
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (auto c : cells) row.push_back(detail::parse_double(c, lineno));
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw IngestionError("csv: empty input");
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open '" + path + "'");
    return read_csv(in);
}

inline void write_csv(std::ostream& out, const CsvTable& t) {
    for (size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
    out << '\n';
    for (const auto& r : t.rows) {
        for (size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << fmt9(r[i]);
        out << '\n';
    }
    for (const auto& c : t.comments) out << "# " << c << '\n';
}

inline std::vector<std::pair<double, double>> read_rate_series(std::istream& in) {
    auto t = read_csv(in);
    int ct = t.column("time"), cr = t.column("rate");
    std::vector<std::pair<double, double>> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) out.emplace_back(r[ct], r[cr]);
    return out;
}

inline std::vector<std::pair<double, double>> read_rate_series_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open '" + path + "'");
    return read_rate_series(in);
}

inline CsvTable rate_series_table(const std::vector<std::pair<double, double>>& s) {
    CsvTable t;
    t.header = {"time", "rate"};
    for (const auto& [time, rate] : s) t.rows.push_back({time, rate});
    return t;
}

inline const char* direction_word(int d) { return d > 0 ? "increasing" : "decreasing"; }

inline CsvTable sweep_table(const SweepResult& r) {
    CsvTable t;
    t.header = {"value", "a_star", "b_star"};
    for (const auto& row : r.rows) t.rows.push_back({row.value, row.a_star, row.b_star});
    t.comments.push_back(std::string("parameter ") + to_string(r.param));
    t.comments.push_back(std::string("a_star ") + direction_word(r.a_direction) + ": " + (r.a_verdict ? "true" : "false"));
    t.comments.push_back(std::string("b_star ") + direction_word(r.b_direction) + ": " + (r.b_verdict ? "true" : "false"));
    for (const auto& row : r.rows)
        if (!row.error.empty()) t.comments.push_back("error at value " + fmt9(row.value) + ": " + row.error);
    return t;
}

inline SweepResult sweep_from_table(const CsvTable& t) {
    SweepResult r;
    int cv = t.column("value"), ca = t.column("a_star"), cb = t.column("b_star");
    for (const auto& row : t.rows) r.rows.push_back({row[cv], row[ca], row[cb], {}});
    for (const auto& c : t.comments) {
        if (c.rfind("parameter ", 0) == 0) r.param = parse_sweep_param(c.substr(10));
        auto verdict = [&](const char* key, int& dir, bool& v) {
            std::string k = key;
            if (c.rfind(k, 0) != 0) return;
            dir = c.find("increasing") != std::string::npos ? 1 : -1;
            v = c.size() >= 4 && c.substr(c.size() - 4) == "true";
        };
        verdict("a_star ", r.a_direction, r.a_verdict);
        verdict("b_star ", r.b_direction, r.b_verdict);
    }
    return r;
}

inline CsvTable profile_table(const ExitProfile& p) {
    CsvTable t;
    t.header = {"x", "p_lower", "p_upper", "q_years"};
    for (size_t i = 0; i < p.grid.size(); ++i)
        t.rows.push_back({p.grid[i], p.p_lower[i], p.p_upper[i], p.expected_time[i]});
    return t;
}

inline ExitProfile profile_from_table(const CsvTable& t) {
    ExitProfile p;
    int cx = t.column("x"), cl = t.column("p_lower"), cu = t.column("p_upper"), cq = t.column("q_years");
    for (const auto& r : t.rows) {
        p.grid.push_back(r[cx]);
        p.p_lower.push_back(r[cl]);
        p.p_upper.push_back(r[cu]);
        p.expected_time.push_back(r[cq]);
    }
    if (!p.grid.empty()) p.band = {p.grid.front(), p.grid.back()};
    return p;
}

inline CsvTable trace_table(const std::vector<TraceRow>& rows) {
    CsvTable t;
    t.header = {"path", "t", "X", "xi", "eta"};
    for (const auto& r : rows) t.rows.push_back({static_cast<double>(r.path), r.t, r.x, r.xi, r.eta});
    return t;
}

}  // namespace tzone
