#pragma once

// Trajectory CSV: header t,u_0..,y_0..[,x_0..][,e_0..], one row per sample.

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ddpc/lti.hpp"

namespace ddpc {

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  tr.validate();
  const auto old_prec = os.precision(17);
  os << 't';
  for (Index i = 0; i < tr.n_u(); ++i) os << ",u_" << i;
  for (Index i = 0; i < tr.n_y(); ++i) os << ",y_" << i;
  if (tr.x)
    for (Index i = 0; i < tr.x->rows(); ++i) os << ",x_" << i;
  if (tr.e)
    for (Index i = 0; i < tr.e->rows(); ++i) os << ",e_" << i;
  os << '\n';
  for (Index t = 0; t < tr.length(); ++t) {
    os << t;
    for (Index i = 0; i < tr.n_u(); ++i) os << ',' << tr.u(i, t);
    for (Index i = 0; i < tr.n_y(); ++i) os << ',' << tr.y(i, t);
    if (tr.x)
      for (Index i = 0; i < tr.x->rows(); ++i) os << ',' << (*tr.x)(i, t);
    if (tr.e)
      for (Index i = 0; i < tr.e->rows(); ++i) os << ',' << (*tr.e)(i, t);
    os << '\n';
  }
  os.precision(old_prec);
}

inline Trajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("trajectory csv: empty input");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  if (cols.empty() || cols[0] != "t") throw ConfigError("trajectory csv: first column must be 't'");
  Index nu = 0, ny = 0, nx = 0, ne = 0;
  for (std::size_t j = 1; j < cols.size(); ++j) {
    const char p = cols[j].empty() ? '?' : cols[j][0];
    if (cols[j].size() < 3 || cols[j][1] != '_') throw ConfigError("trajectory csv: bad column '" + cols[j] + "'");
    if (p == 'u') ++nu;
    else if (p == 'y') ++ny;
    else if (p == 'x') ++nx;
    else if (p == 'e') ++ne;
    else throw ConfigError("trajectory csv: bad column '" + cols[j] + "'");
  }
  std::vector<std::vector<double>> rows;
  Index lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError("trajectory csv: line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (vals.size() != cols.size())
      throw ConfigError("trajectory csv: line " + std::to_string(lineno) + " has " + std::to_string(vals.size()) +
                        " fields, expected " + std::to_string(cols.size()));
    rows.push_back(std::move(vals));
  }
  const Index T = static_cast<Index>(rows.size());
  Trajectory tr;
  tr.u.resize(nu, T);
  tr.y.resize(ny, T);
  if (nx) tr.x = Matrix(nx, T);
  if (ne) tr.e = Matrix(ne, T);
  for (Index t = 0; t < T; ++t) {
    const auto& v = rows[static_cast<std::size_t>(t)];
    std::size_t k = 1;
    for (Index i = 0; i < nu; ++i) tr.u(i, t) = v[k++];
    for (Index i = 0; i < ny; ++i) tr.y(i, t) = v[k++];
    for (Index i = 0; i < nx; ++i) (*tr.x)(i, t) = v[k++];
    for (Index i = 0; i < ne; ++i) (*tr.e)(i, t) = v[k++];
  }
  return tr;
}

}  // namespace ddpc
