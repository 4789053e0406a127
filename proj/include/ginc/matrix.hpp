#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace ginc {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Tolerance for row sums and normalization of stored distributions.
inline constexpr double kStochasticTol = 1e-12;
// Tolerance for inference identities (likelihood folds, posteriors).
inline constexpr double kInferenceTol = 1e-9;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// log(sum(exp(x))) with max shift; -inf for empty input or all -inf.
double log_sum_exp(std::span<const double> values);

// Largest |row sum - 1|.
double max_row_sum_error(const Matrix& m);
double max_col_sum_error(const Matrix& m);
double min_entry(const Matrix& m);

bool is_distribution(std::span<const double> p, double tol = kStochasticTol);

// Throws InvalidDistribution unless `m` is square, non-negative and
// row-stochastic within `tol`. With `strictly_positive`, zero entries are
// rejected too.
void require_row_stochastic(const Matrix& m, const char* what, bool strictly_positive,
                            double tol = kStochasticTol);
void require_distribution(std::span<const double> p, const char* what, bool strictly_positive,
                          double tol = kStochasticTol);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax_lowest(std::span<const double> values);

double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace ginc
