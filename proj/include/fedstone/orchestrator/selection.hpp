#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fedstone/errors.hpp"
#include "fedstone/io.hpp"

namespace fedstone {

struct GridCell {
  int n_e = 0;
  int n_r = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// Accuracy indexed [n_e][n_r], rows and columns labelled by the values
/// actually run.
struct AccuracyMatrix {
  std::vector<int> n_e_values;
  std::vector<int> n_r_values;
  std::vector<double> values;  // row-major, n_e rows x n_r columns

  double at(std::size_t row, std::size_t col) const {
    return values[row * n_r_values.size() + col];
  }
  double& at(std::size_t row, std::size_t col) { return values[row * n_r_values.size() + col]; }

  void validate() const {
    if (n_e_values.empty() || n_r_values.empty())
      throw InputError("accuracy matrix is empty");
    if (values.size() != n_e_values.size() * n_r_values.size())
      throw InputError("accuracy matrix has " + std::to_string(values.size()) +
                       " values for a " + std::to_string(n_e_values.size()) + "x" +
                       std::to_string(n_r_values.size()) + " grid");
  }
};

/// Argmax over all cells. Ties go to the smaller n_r, then the smaller n_e.
inline GridCell select_optimal(const AccuracyMatrix& m) {
  m.validate();
  bool found = false;
  GridCell best;
  double best_acc = 0.0;
  for (std::size_t i = 0; i < m.n_e_values.size(); ++i) {
    for (std::size_t j = 0; j < m.n_r_values.size(); ++j) {
      const GridCell cell{m.n_e_values[i], m.n_r_values[j]};
      const double acc = m.at(i, j);
      const bool better =
          !found || acc > best_acc ||
          (acc == best_acc &&
           (cell.n_r < best.n_r || (cell.n_r == best.n_r && cell.n_e < best.n_e)));
      if (better) {
        found = true;
        best = cell;
        best_acc = acc;
      }
    }
  }
  return best;
}

inline double accuracy_at(const AccuracyMatrix& m, const GridCell& cell) {
  for (std::size_t i = 0; i < m.n_e_values.size(); ++i)
    for (std::size_t j = 0; j < m.n_r_values.size(); ++j)
      if (m.n_e_values[i] == cell.n_e && m.n_r_values[j] == cell.n_r) return m.at(i, j);
  throw InputError("cell (" + std::to_string(cell.n_e) + ", " + std::to_string(cell.n_r) +
                   ") is not part of the grid");
}

/// CSV with one row per n_e and one column per n_r.
inline std::string format_grid_csv(const AccuracyMatrix& m) {
  m.validate();
  std::string out = "n_e\\n_r";
  for (int r : m.n_r_values) out += "," + std::to_string(r);
  out += "\n";
  for (std::size_t i = 0; i < m.n_e_values.size(); ++i) {
    out += std::to_string(m.n_e_values[i]);
    for (std::size_t j = 0; j < m.n_r_values.size(); ++j) out += "," + format_double(m.at(i, j));
    out += "\n";
  }
  return out;
}

}  // namespace fedstone
