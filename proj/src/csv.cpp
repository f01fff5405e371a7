#include "vturnpike/csv.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vturnpike/errors.hpp"

namespace vturnpike {

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

void add_group(std::vector<std::string>& cols, const std::string& name, Eigen::Index dim) {
    if (dim == 1) {
        cols.push_back(name);
        return;
    }
    for (Eigen::Index i = 0; i < dim; ++i) cols.push_back(name + "[" + std::to_string(i) + "]");
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& cell, std::size_t line) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double x = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        std::ostringstream msg;
        msg << "CSV line " << line << ": '" << cell << "' is not a number";
        throw ValidationError(msg.str());
    }
    return x;
}

// Number of components of the group `name` in the header, starting at `pos`.
Eigen::Index group_width(const std::vector<std::string>& header, std::size_t pos, const std::string& name) {
    if (pos < header.size() && header[pos] == name) return 1;
    Eigen::Index k = 0;
    while (pos + static_cast<std::size_t>(k) < header.size() &&
           header[pos + static_cast<std::size_t>(k)] == name + "[" + std::to_string(k) + "]") {
        ++k;
    }
    return k;
}

}  // namespace

std::vector<std::string> trajectory_columns(const Trajectory& traj) {
    std::vector<std::string> cols{"t"};
    add_group(cols, "q", traj.q.cols());
    add_group(cols, "v", traj.v.cols());
    add_group(cols, "u", traj.u.cols());
    if (traj.has_adjoints()) {
        add_group(cols, "lambda_q", traj.lambda_q->cols());
        add_group(cols, "lambda_v", traj.lambda_v->cols());
    }
    return cols;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    traj.validate();
    const auto cols = trajectory_columns(traj);
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (Eigen::Index k = 0; k < traj.nodes(); ++k) {
        os << format_number(traj.t(k));
        const auto row = [&](const Mat& m) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) os << ',' << format_number(m(k, j));
        };
        row(traj.q);
        row(traj.v);
        row(traj.u);
        if (traj.has_adjoints()) {
            row(*traj.lambda_q);
            row(*traj.lambda_v);
        }
        os << '\n';
    }
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_trajectory_csv(os, traj);
    if (!os) throw IoError("write to '" + path + "' failed");
}

Trajectory read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("CSV: missing header");
    const auto header = split(line);

    std::size_t pos = 0;
    if (header.empty() || header[0] != "t") throw ValidationError("CSV line 1: first column must be 't'");
    pos = 1;
    const auto take = [&](const std::string& name, bool required) {
        const Eigen::Index w = group_width(header, pos, name);
        if (w == 0 && required) throw ValidationError("CSV line 1: missing column group '" + name + "'");
        pos += static_cast<std::size_t>(w);
        return w;
    };
    const Eigen::Index nq = take("q", true);
    const Eigen::Index nv = take("v", true);
    const Eigen::Index nu = take("u", true);
    const Eigen::Index nlq = take("lambda_q", false);
    const Eigen::Index nlv = nlq ? take("lambda_v", true) : 0;
    if (pos != header.size()) throw ValidationError("CSV line 1: unexpected column '" + header[pos] + "'");

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            std::ostringstream msg;
            msg << "CSV line " << line_no << ": expected " << header.size() << " cells, found " << cells.size();
            throw ValidationError(msg.str());
        }
        std::vector<double> r;
        for (const auto& c : cells) r.push_back(parse_cell(c, line_no));
        rows.push_back(std::move(r));
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    Trajectory tr;
    tr.t.resize(n);
    tr.q.resize(n, nq);
    tr.v.resize(n, nv);
    tr.u.resize(n, nu);
    Mat lq(n, nlq);
    Mat lv(n, nlv);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& r = rows[static_cast<std::size_t>(k)];
        std::size_t c = 0;
        tr.t(k) = r[c++];
        for (Eigen::Index j = 0; j < nq; ++j) tr.q(k, j) = r[c++];
        for (Eigen::Index j = 0; j < nv; ++j) tr.v(k, j) = r[c++];
        for (Eigen::Index j = 0; j < nu; ++j) tr.u(k, j) = r[c++];
        for (Eigen::Index j = 0; j < nlq; ++j) lq(k, j) = r[c++];
        for (Eigen::Index j = 0; j < nlv; ++j) lv(k, j) = r[c++];
    }
    if (nlq) {
        tr.lambda_q = std::move(lq);
        tr.lambda_v = std::move(lv);
    }
    tr.validate();
    return tr;
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    return read_trajectory_csv(is);
}

void write_table_csv(const std::string& path, const CsvTable& table) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < table.header.size(); ++i) os << (i ? "," : "") << table.header[i];
    os << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_number(row[i]);
        os << '\n';
    }
    if (!os) throw IoError("write to '" + path + "' failed");
}

}  // namespace vturnpike
