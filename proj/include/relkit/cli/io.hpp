#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "relkit/errors.hpp"
#include "relkit/sim.hpp"

namespace relkit::cli {

class IoError : public Error {
 public:
  using Error::Error;
};

/// Seventeen significant digits: enough for an exact double round trip.
inline std::string format_double(double x) { return fmt::format("{:.17g}", x); }

template <int N>
std::vector<std::string> trajectory_header() {
  if constexpr (N == 1) {
    return {"t", "p", "v", "u", "w", "gamma", "energy", "e"};
  } else {
    return {"t",  "px", "py", "pz", "vx", "vy",    "vz",     "ux", "uy",
            "uz", "wx", "wy", "wz", "gamma", "energy", "ex", "ey", "ez"};
  }
}

template <int N>
std::vector<double> trajectory_row(const Sample<N>& s) {
  std::vector<double> row{s.t};
  for (const auto* v : {&s.x.p, &s.x.v, &s.u, &s.w})
    for (int i = 0; i < N; ++i) row.push_back((*v)(i));
  row.push_back(s.gamma);
  row.push_back(s.energy);
  for (int i = 0; i < N; ++i) row.push_back(s.e(i));
  return row;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  auto out = open_output(path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

/// Every `stride`-th sample; the final sample is always kept.
template <int N>
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory<N>& traj,
                          std::size_t stride = 1) {
  std::vector<std::vector<double>> rows;
  const auto& s = traj.samples;
  for (std::size_t i = 0; i < s.size(); i += stride) rows.push_back(trajectory_row<N>(s[i]));
  if (!s.empty() && (s.size() - 1) % stride != 0) rows.push_back(trajectory_row<N>(s.back()));
  write_csv(path, trajectory_header<N>(), rows);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw IoError("no column '" + name + "'");
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV '" + path.string() + "'");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw IoError("non-numeric CSV cell '" + cell + "'");
      row.push_back(v);
    }
    if (row.size() != table.header.size()) throw IoError("ragged CSV row in '" + path.string() + "'");
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  auto out = open_output(path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

/// JSON has no infinities; unsettled or unbounded quantities become null.
inline nlohmann::json finite_or_null(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

/// gnuplot script plotting `columns` (1-based) of `csv` against column `x`.
inline void write_gnuplot_script(const std::filesystem::path& path, const std::string& csv,
                                 const std::vector<std::string>& header, int x,
                                 const std::vector<int>& columns, bool log_axes = false) {
  auto out = open_output(path);
  out << "set datafile separator ','\n"
      << "set key autotitle columnhead\n"
      << "set grid\n";
  if (log_axes) out << "set logscale xy\n";
  out << "set xlabel '" << header[x - 1] << "'\n"
      << "plot ";
  for (std::size_t i = 0; i < columns.size(); ++i)
    out << (i ? ", \\\n     " : "") << "'" << csv << "' using " << x << ":" << columns[i] << " with lines";
  out << "\npause -1\n";
}

}  // namespace relkit::cli
