#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fepls/dataset.hpp"
#include "fepls/errors.hpp"

namespace fepls {

// Full-precision decimal rendering (round-trips doubles exactly).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  auto e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

inline double parse_cell(const std::string& cell, const std::string& path, int line_no) {
  std::string t = trim(cell);
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) {
    throw DataError(path + ":" + std::to_string(line_no) +
                    ": cannot parse numeric cell '" + cell + "'");
  }
  return v;
}

inline bool is_numeric(const std::string& cell) {
  std::string t = trim(cell);
  if (t.empty()) return false;
  char* end = nullptr;
  std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

}  // namespace detail

// Raw numeric CSV (all rows same width). Non-numeric first row is treated
// as a header and skipped.
inline Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (line_no == 1 && !detail::is_numeric(cells[0])) continue;  // header
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(detail::parse_cell(c, path, line_no));
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(width) + " columns, found " +
                      std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no numeric rows");
  Eigen::MatrixXd M(rows.size(), width);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) M(i, j) = rows[i][j];
  return M;
}

// Functional-variable CSV. Wide format: row 1 = grid points, later rows =
// one subject each. Long format (header "subject,t,value") is accepted for
// per-subject grids; subjects are ordered by first appearance.
inline PredictorBlock read_functional_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::string first;
  int line_no = 0;
  do {
    if (!std::getline(in, first)) throw DataError(path + ": empty file");
    ++line_no;
  } while (detail::trim(first).empty());

  auto head = detail::split_csv_line(first);
  bool long_format = head.size() == 3 && !detail::is_numeric(head[0]);

  PredictorBlock block;
  if (long_format) {
    std::vector<long long> order;
    std::map<long long, std::pair<std::vector<double>, std::vector<double>>> per;
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::trim(line).empty()) continue;
      auto cells = detail::split_csv_line(line);
      if (cells.size() != 3)
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": long format requires 3 columns (subject,t,value)");
      long long id = static_cast<long long>(detail::parse_cell(cells[0], path, line_no));
      double t = detail::parse_cell(cells[1], path, line_no);
      double v = detail::parse_cell(cells[2], path, line_no);
      if (!per.count(id)) order.push_back(id);
      per[id].first.push_back(t);
      per[id].second.push_back(v);
    }
    if (order.empty()) throw DataError(path + ": no observations");
    bool shared = true;
    const auto& g0 = per[order[0]].first;
    for (auto id : order) {
      const auto& g = per[id].first;
      if (g.size() != g0.size() || !std::equal(g.begin(), g.end(), g0.begin()))
        shared = false;
    }
    if (shared) {
      block.grid = Eigen::Map<const Eigen::VectorXd>(g0.data(), g0.size());
      block.values.resize(order.size(), g0.size());
      for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& v = per[order[i]].second;
        block.values.row(i) = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
      }
    } else {
      for (auto id : order) {
        const auto& g = per[id].first;
        const auto& v = per[id].second;
        block.subject_grids.push_back(Eigen::Map<const Eigen::VectorXd>(g.data(), g.size()));
        block.subject_values.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()));
      }
    }
    return block;
  }

  // wide format: `first` is the grid row
  auto grid_cells = detail::split_csv_line(first);
  std::vector<double> grid;
  for (const auto& c : grid_cells) grid.push_back(detail::parse_cell(c, path, line_no));
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != grid.size())
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(grid.size()) + " columns, found " +
                      std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(detail::parse_cell(c, path, line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": grid row present but no subject rows");
  block.grid = Eigen::Map<const Eigen::VectorXd>(grid.data(), grid.size());
  block.values.resize(rows.size(), grid.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < grid.size(); ++j) block.values(i, j) = rows[i][j];
  return block;
}

inline void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& M,
                             const std::vector<std::string>& header = {}) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j)
      out << (j ? "," : "") << header[j];
    out << "\n";
  }
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      out << (j ? "," : "") << format_double(M(i, j));
    out << "\n";
  }
}

// Wide-format functional CSV: grid row followed by one row per subject.
inline void write_functional_csv(const std::string& path,
                                 const Eigen::VectorXd& grid,
                                 const Eigen::MatrixXd& values) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  for (Eigen::Index j = 0; j < grid.size(); ++j)
    out << (j ? "," : "") << format_double(grid(j));
  out << "\n";
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j)
      out << (j ? "," : "") << format_double(values(i, j));
    out << "\n";
  }
}

}  // namespace fepls
