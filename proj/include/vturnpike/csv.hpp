#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vturnpike/model.hpp"

namespace vturnpike {

/// "%.17g", with nan and inf spelled out.
std::string format_number(double x);

/// Column names t, q, v, u, lambda_q, lambda_v; signals with more than one
/// component become q[0], q[1], ... Adjoint columns are omitted when the
/// trajectory carries none.
std::vector<std::string> trajectory_columns(const Trajectory& traj);

void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

/// Inverse of write_trajectory_csv. Throws IoError for unreadable files and
/// ValidationError for malformed content (with the line number).
Trajectory read_trajectory_csv(std::istream& is);
Trajectory read_trajectory_csv(const std::string& path);

/// Plain table with a header row.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

void write_table_csv(const std::string& path, const CsvTable& table);

}  // namespace vturnpike
