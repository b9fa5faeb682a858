#pragma once

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ndbc/analysis.hpp"
#include "ndbc/error.hpp"
#include "ndbc/evolution.hpp"
#include "ndbc/fields.hpp"
#include "ndbc/geometry.hpp"
#include "ndbc/kernel.hpp"

namespace ndbc {

/// Shortest form that round-trips: 17 significant digits.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::Io, "cannot open " + path + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    require(!in.bad(), ErrorCode::Io, "read error on " + path);
    return ss.str();
}

/// Writes to a sibling temporary file, then renames it over the target.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        require(out.good(), ErrorCode::Io, "write error on " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail(ErrorCode::Io, "cannot move output into place at " + path);
    }
}

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column position by name, or Io when absent.
    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        fail(ErrorCode::Io, "CSV has no column '" + name + "'");
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline CsvTable parse_csv(const std::string& text, const std::string& origin = "CSV") {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        require(cells.size() == t.header.size(), ErrorCode::Io,
                origin + ": row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(cells.size()) +
                    " cells, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    require(have_header, ErrorCode::Io, origin + " is empty (header row is mandatory)");
    return t;
}

inline CsvTable read_csv(const std::string& path) { return parse_csv(read_text_file(path), path); }

inline double parse_number(const std::string& cell, const std::string& origin) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    require(end != begin && *end == '\0' && errno != ERANGE, ErrorCode::Io,
            origin + ": '" + cell + "' is not a number");
    return v;
}

inline std::string csv_row(std::initializer_list<std::string> cells) {
    std::string out;
    bool first = true;
    for (const auto& c : cells) {
        if (!first) out += ',';
        out += c;
        first = false;
    }
    out += '\n';
    return out;
}

// ---------------------------------------------------------------------------
// Writers

inline const char* class_name(NodeClass c) { return c == NodeClass::Strip ? "strip" : "interior"; }

/// Header of a per-node table: index,x[,y],<extra columns>.
inline std::string node_header(const Grid& g, const std::string& tail) {
    return std::string("index,x,") + (g.dim() == 2 ? "y," : "") + tail + "\n";
}

inline std::string node_prefix(const Grid& g, std::size_t i) {
    std::string s = std::to_string(i) + "," + format_double(g.node(i)[0]) + ",";
    if (g.dim() == 2) s += format_double(g.node(i)[1]) + ",";
    return s;
}

inline std::string grid_csv(const Grid& g) {
    std::string out = node_header(g, "class,bdist,mu");
    for (std::size_t i = 0; i < g.size(); ++i) {
        out += node_prefix(g, i) + class_name(g.klass(i)) + "," + format_double(g.bdist(i)) + "," +
               format_double(g.mu(i)) + "\n";
    }
    return out;
}

inline std::string full_field_csv(const Grid& g, const FullField& u) {
    check_field(g, u);
    std::string out = node_header(g, "class,value");
    for (std::size_t i = 0; i < g.size(); ++i) {
        out += node_prefix(g, i) + class_name(g.klass(i)) + "," + format_double(u[static_cast<Eigen::Index>(i)]) + "\n";
    }
    return out;
}

/// Strip values keyed by global node index.
inline std::string strip_field_csv(const Grid& g, const StripField& u) {
    check_field(g, u);
    std::string out = node_header(g, "value");
    for (std::size_t k = 0; k < g.n_strip(); ++k) {
        out += node_prefix(g, g.strip()[k]) + format_double(u[static_cast<Eigen::Index>(k)]) + "\n";
    }
    return out;
}

inline const char* kTrajectoryHeader = "step,t,mass,d1,d2,dp,dq,dinf,energy";

inline std::string trajectory_csv(const Trajectory& t) {
    std::string out = std::string(kTrajectoryHeader) + "\n";
    for (std::size_t k = 0; k < t.diag.size(); ++k) {
        const DiagRow& r = t.diag[k];
        out += std::to_string(k) + "," + format_double(t.times[k]) + "," + format_double(r.mass) + "," +
               format_double(r.d1) + "," + format_double(r.d2) + "," + format_double(r.dp) + "," + format_double(r.dq) +
               "," + format_double(r.dinf) + "," + format_double(r.energy) + "\n";
    }
    return out;
}

inline std::string counterexample_csv(const std::vector<std::pair<int, double>>& seq) {
    std::string out = "n,quotient\n";
    for (const auto& [n, q] : seq) out += std::to_string(n) + "," + format_double(q) + "\n";
    return out;
}

/// One row `model,rate,r2,t_lo,t_hi` (no header).
inline std::string decay_fit_row(const DecayFit& f) {
    return std::string(to_string(f.model)) + "," + format_double(f.rate) + "," + format_double(f.r2) + "," +
           format_double(f.t_lo) + "," + format_double(f.t_hi);
}

// ---------------------------------------------------------------------------
// Readers

/// Strip values from an `index,value` table with global node indices; every
/// strip node must appear exactly once and no interior node may appear.
inline StripField parse_strip_values(const CsvTable& t, const Grid& g, const std::string& origin = "strip CSV") {
    const std::size_t ci = t.column("index");
    const std::size_t cv = t.column("value");
    Eigen::VectorXd v(static_cast<Eigen::Index>(g.n_strip()));
    std::vector<char> seen(g.n_strip(), 0);
    for (const auto& row : t.rows) {
        const double idx = parse_number(row[ci], origin);
        require(idx >= 0 && idx == std::floor(idx) && idx < static_cast<double>(g.size()), ErrorCode::Io,
                origin + ": bad node index " + row[ci]);
        const auto node = static_cast<std::size_t>(idx);
        const auto local = g.local_index(node);
        require(g.is_strip(node), ErrorCode::Io, origin + ": node " + row[ci] + " is not a strip node");
        require(!seen[local], ErrorCode::Io, origin + ": node " + row[ci] + " listed twice");
        seen[local] = 1;
        v[static_cast<Eigen::Index>(local)] = parse_number(row[cv], origin);
    }
    for (std::size_t k = 0; k < g.n_strip(); ++k) {
        require(seen[k], ErrorCode::Io, origin + ": strip node " + std::to_string(g.strip()[k]) + " missing");
    }
    return StripField(std::move(v));
}

inline StripField read_strip_values(const std::string& path, const Grid& g) {
    return parse_strip_values(read_csv(path), g, path);
}

/// Times and diagnostic rows of a trajectory table (states are not stored).
inline Trajectory parse_trajectory(const CsvTable& t, const std::string& origin = "trajectory CSV") {
    Trajectory out;
    const std::size_t ct = t.column("t");
    const std::size_t cols[] = {t.column("mass"), t.column("d1"), t.column("d2"), t.column("dp"),
                                t.column("dq"),   t.column("dinf"), t.column("energy")};
    for (const auto& row : t.rows) {
        out.times.push_back(parse_number(row[ct], origin));
        DiagRow r;
        double* slots[] = {&r.mass, &r.d1, &r.d2, &r.dp, &r.dq, &r.dinf, &r.energy};
        for (std::size_t i = 0; i < 7; ++i) *slots[i] = parse_number(row[cols[i]], origin);
        out.diag.push_back(r);
    }
    require(!out.times.empty(), ErrorCode::Io, origin + " has no rows");
    return out;
}

inline Trajectory read_trajectory(const std::string& path) { return parse_trajectory(read_csv(path), path); }

}  // namespace ndbc
