#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "wolb/errors.hpp"
#include "wolb/ga.hpp"
#include "wolb/ocp.hpp"
#include "wolb/params.hpp"
#include "wolb/sim.hpp"

namespace wolb::io {

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool skippable(const std::string& line) {
    const auto t = trim(line);
    return t.empty() || t.front() == '#';
}

inline double number_at(const std::string& cell, std::size_t line_no) {
    try {
        return parse_decimal_or_rational(trim(cell));
    } catch (const ParseError& e) {
        throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open '" + path + "' for writing");
    f << std::setprecision(12);
    return f;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open '" + path + "'");
    return f;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trajectories

inline void write_trajectory(std::ostream& os, const Trajectory& tr) {
    os << "t,x,y,u_applied\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        os << tr.times[i] << ',' << tr.states[i].x << ',' << tr.states[i].y << ',' << tr.u_applied[i] << '\n';
}

// ---------------------------------------------------------------------------
// Schedules: day,size[,rule]

inline void write_schedule(std::ostream& os, const ImpulseSchedule& s) {
    os << "day,size,rule\n";
    for (const auto& r : s.entries) os << r.time << ',' << r.size << ',' << to_string(s.rule) << '\n';
}

/// Reads `day,size[,rule]` rows. A header row starting with "day", blank
/// lines and '#' comments are skipped. Errors carry 1-based line numbers.
inline ImpulseSchedule read_schedule(std::istream& is, int period_m = 1) {
    ImpulseSchedule s;
    s.period_m = period_m;
    std::string line;
    std::size_t no = 0;
    bool rule_seen = false;
    while (std::getline(is, line)) {
        ++no;
        if (detail::skippable(line)) continue;
        const auto cells = detail::split_csv(line);
        if (detail::trim(cells.front()) == "day") continue;
        if (cells.size() < 2 || cells.size() > 3)
            throw ParseError("line " + std::to_string(no) + ": expected day,size[,rule]");
        const double day = detail::number_at(cells[0], no);
        const double size = detail::number_at(cells[1], no);
        if (size < 0 || size != std::floor(size))
            throw ParseError("line " + std::to_string(no) + ": size must be a nonnegative integer");
        if (!s.entries.empty() && !(day > s.entries.back().time))
            throw ParseError("line " + std::to_string(no) + ": days must be strictly increasing");
        if (day < 0) throw ParseError("line " + std::to_string(no) + ": negative day");
        s.entries.push_back({day, static_cast<std::int64_t>(size)});
        if (cells.size() == 3 && !rule_seen) {
            try {
                s.rule = rule_from_string(detail::trim(cells[2]));
            } catch (const ParseError& e) {
                throw ParseError("line " + std::to_string(no) + ": " + e.what());
            }
            rule_seen = true;
        }
    }
    return s;
}

inline ImpulseSchedule read_schedule_file(const std::string& path, int period_m = 1) {
    auto f = detail::open_in(path);
    return read_schedule(f, period_m);
}

// ---------------------------------------------------------------------------
// Continuous controls: t,u_star,lambda1,lambda2

inline void write_control(std::ostream& os, const ocp::OCPSolution& s) {
    os << "t,u_star,lambda1,lambda2\n";
    for (std::size_t i = 0; i < s.control.times.size(); ++i)
        os << s.control.times[i] << ',' << s.control.values[i] << ',' << s.adjoints[i][0] << ','
           << s.adjoints[i][1] << '\n';
}

/// Reads the first two columns (t, u) of a control CSV. The horizon is the
/// last time value.
inline ocp::ContinuousControl read_control(std::istream& is) {
    ocp::ContinuousControl c;
    std::string line;
    std::size_t no = 0;
    while (std::getline(is, line)) {
        ++no;
        if (detail::skippable(line)) continue;
        const auto cells = detail::split_csv(line);
        if (detail::trim(cells.front()) == "t") continue;
        if (cells.size() < 2) throw ParseError("line " + std::to_string(no) + ": expected t,u_star,...");
        const double t = detail::number_at(cells[0], no);
        const double u = detail::number_at(cells[1], no);
        if (!c.times.empty() && !(t > c.times.back()))
            throw ParseError("line " + std::to_string(no) + ": times must be strictly increasing");
        if (u < 0) throw ParseError("line " + std::to_string(no) + ": negative control value");
        c.times.push_back(t);
        c.values.push_back(u);
    }
    if (c.times.size() < 2) throw ParseError("control file needs at least two rows");
    c.t_star = c.times.back();
    return c;
}

inline ocp::ContinuousControl read_control_file(const std::string& path) {
    auto f = detail::open_in(path);
    return read_control(f);
}

// ---------------------------------------------------------------------------
// Phase plane

inline void write_phase(std::ostream& os, const std::vector<PhaseSample>& v) {
    os << "x,y,dx,dy\n";
    for (const auto& s : v) os << s.x << ',' << s.y << ',' << s.dx << ',' << s.dy << '\n';
}

inline void write_curve(std::ostream& os, const std::vector<State>& v) {
    os << "x,y\n";
    for (const auto& s : v) os << s.x << ',' << s.y << '\n';
}

// ---------------------------------------------------------------------------
// GA

inline void write_history(std::ostream& os, const std::vector<ga::HistoryRow>& h) {
    os << "generation,best_fitness,best_J,feasible_count\n";
    for (const auto& r : h)
        os << r.generation << ',' << std::setprecision(17) << r.best_fitness << std::setprecision(12)
           << ',' << r.best_j << ',' << r.feasible_count << '\n';
}

/// Writes `write(os)` into `path`.
template <class Fn>
void write_file(const std::string& path, Fn&& write) {
    auto f = detail::open_out(path);
    write(f);
    if (!f) throw ParseError("failed writing '" + path + "'");
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

}  // namespace wolb::io
