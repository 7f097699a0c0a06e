#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dabg {

/// Relative l2 error over the test grid X x tgrid from tabulated values
/// (rows = spatial points, cols = times).
inline double relative_l2_error(const Eigen::MatrixXd& approx, const Eigen::MatrixXd& truth) {
  if (approx.rows() != truth.rows() || approx.cols() != truth.cols())
    throw std::invalid_argument("relative_l2_error: shape mismatch");
  const double den = truth.squaredNorm();
  if (den == 0.0) throw std::invalid_argument("relative_l2_error: truth vanishes on the grid");
  return std::sqrt((approx - truth).squaredNorm() / den);
}

inline double relative_l2_error(
    const std::function<double(const Eigen::VectorXd&, double)>& approx,
    const std::function<double(const Eigen::VectorXd&, double)>& truth, const Eigen::MatrixXd& X,
    const Eigen::VectorXd& tgrid) {
  Eigen::MatrixXd A(X.cols(), tgrid.size()), U(X.cols(), tgrid.size());
  for (Eigen::Index q = 0; q < X.cols(); ++q)
    for (Eigen::Index k = 0; k < tgrid.size(); ++k) {
      A(q, k) = approx(X.col(q), tgrid(k));
      U(q, k) = truth(X.col(q), tgrid(k));
    }
  return relative_l2_error(A, U);
}

/// One benchmark result row.
struct ErrorReport {
  int case_id = 0;
  std::string method;  // "dabg" or "dls"
  int n_or_depth = 0;  // N for dabg, depth L for dls
  int m_width = 0;
  double error = 0.0;
  std::uint64_t seed = 0;
  double runtime_s = 0.0;
  std::string config_echo;  // key = value lines
};

inline void write_reports_csv(std::ostream& os, const std::vector<ErrorReport>& reports) {
  if (!reports.empty() && !reports.front().config_echo.empty()) {
    std::istringstream echo(reports.front().config_echo);
    std::string line;
    while (std::getline(echo, line)) os << "# " << line << '\n';
  }
  os << "case,method,N_or_L,M,error,seed,runtime_s\n";
  os.precision(17);
  for (const auto& r : reports)
    os << r.case_id << ',' << r.method << ',' << r.n_or_depth << ',' << r.m_width << ','
       << r.error << ',' << r.seed << ',' << r.runtime_s << '\n';
}

inline std::vector<ErrorReport> read_reports_csv(std::istream& is) {
  std::vector<ErrorReport> out;
  std::string line;
  std::string echo;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      if (!body.empty() && body[0] == ' ') body.erase(0, 1);
      echo += body + '\n';
      continue;
    }
    if (!header_seen) {
      if (line != "case,method,N_or_L,M,error,seed,runtime_s")
        throw std::runtime_error("report csv: unexpected header: " + line);
      header_seen = true;
      continue;
    }
    std::istringstream ss(line);
    std::string field;
    ErrorReport r;
    std::getline(ss, field, ',');
    r.case_id = std::stoi(field);
    std::getline(ss, r.method, ',');
    std::getline(ss, field, ',');
    r.n_or_depth = std::stoi(field);
    std::getline(ss, field, ',');
    r.m_width = std::stoi(field);
    std::getline(ss, field, ',');
    r.error = std::stod(field);
    std::getline(ss, field, ',');
    r.seed = std::stoull(field);
    std::getline(ss, field, ',');
    r.runtime_s = std::stod(field);
    r.config_echo = echo;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dabg
