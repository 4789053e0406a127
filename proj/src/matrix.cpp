#include "ginc/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ginc/errors.hpp"

namespace ginc {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw InvalidConfiguration("matrix data size does not match its shape");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double log_sum_exp(std::span<const double> values) {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

double max_row_sum_error(const Matrix& m) {
  double worst = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double v : m.row(r)) s += v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

double max_col_sum_error(const Matrix& m) {
  double worst = 0.0;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) s += m(r, c);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

double min_entry(const Matrix& m) {
  return m.data().empty() ? 0.0 : *std::min_element(m.data().begin(), m.data().end());
}

bool is_distribution(std::span<const double> p, double tol) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    s += v;
  }
  return !p.empty() && std::abs(s - 1.0) <= tol;
}

void require_row_stochastic(const Matrix& m, const char* what, bool strictly_positive,
                            double tol) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    throw InvalidDistribution(std::string(what) + ": transition matrix must be square and non-empty");
  }
  for (double v : m.data()) {
    if (!std::isfinite(v) || v < 0.0 || (strictly_positive && v <= 0.0)) {
      throw InvalidDistribution(std::string(what) +
                                (strictly_positive ? ": entries must be strictly positive"
                                                   : ": entries must be non-negative"));
    }
  }
  if (max_row_sum_error(m) > tol) {
    throw InvalidDistribution(std::string(what) + ": rows do not sum to 1");
  }
}

void require_distribution(std::span<const double> p, const char* what, bool strictly_positive,
                          double tol) {
  if (!is_distribution(p, tol)) {
    throw InvalidDistribution(std::string(what) + ": not a normalized probability vector");
  }
  if (strictly_positive) {
    for (double v : p) {
      if (v <= 0.0) throw InvalidDistribution(std::string(what) + ": entries must be strictly positive");
    }
  }
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

}  // namespace ginc
