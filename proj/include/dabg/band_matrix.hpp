#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dabg {

/// Sparse Galerkin matrix indexed by (row j, col n), both in 1..N.
/// Only nonzeros are stored, grouped per row for residual sweeps.
class BandMatrix {
 public:
  explicit BandMatrix(int n) : n_(n), rows_(static_cast<std::size_t>(n)) {
    if (n < 1) throw std::invalid_argument("BandMatrix: dimension must be >= 1");
  }

  int dim() const { return n_; }

  void add(int j, int n, double value) {
    check(j, n);
    if (value == 0.0) return;
    rows_[static_cast<std::size_t>(j - 1)].emplace_back(n, value);
  }

  /// Entry lookup (zero when not stored).
  double coeff(int j, int n) const {
    check(j, n);
    for (const auto& [col, v] : rows_[static_cast<std::size_t>(j - 1)])
      if (col == n) return v;
    return 0.0;
  }

  const std::vector<std::pair<int, double>>& row(int j) const {
    check(j, 1);
    return rows_[static_cast<std::size_t>(j - 1)];
  }

  std::size_t nonzeros() const {
    std::size_t c = 0;
    for (const auto& r : rows_) c += r.size();
    return c;
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_, n_);
    for (int j = 1; j <= n_; ++j)
      for (const auto& [col, v] : rows_[static_cast<std::size_t>(j - 1)]) m(j - 1, col - 1) += v;
    return m;
  }

  void sort_rows() {
    for (auto& r : rows_)
      std::sort(r.begin(), r.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  /// Debug dump as "row,col,value" lines.
  void dump_csv(std::ostream& os) const {
    os << "row,col,value\n";
    for (int j = 1; j <= n_; ++j) {
      auto r = rows_[static_cast<std::size_t>(j - 1)];
      std::sort(r.begin(), r.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      for (const auto& [col, v] : r) {
        os.precision(17);
        os << j << ',' << col << ',' << v << '\n';
      }
    }
  }

 private:
  void check(int j, int n) const {
    if (j < 1 || j > n_ || n < 1 || n > n_)
      throw std::out_of_range("BandMatrix: index outside 1..N");
  }

  int n_;
  std::vector<std::vector<std::pair<int, double>>> rows_;
};

}  // namespace dabg
