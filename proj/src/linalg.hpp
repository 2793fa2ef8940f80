#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace szaszlab {

using Vec = std::vector<double>;

std::string format_vec(std::span<const double> v);

// Dense row-major matrix for the small (m <= 3 typical) systems in this
// library: Hessians, Newton steps, least-squares normal blocks.
class Mat {
public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Mat identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const std::vector<double>& data() const { return data_; }

  Mat operator*(const Mat& rhs) const;
  Vec operator*(std::span<const double> v) const;
  Mat transpose() const;

  // LU with partial pivoting; throws Error{Numeric} on singularity.
  Vec solve(std::span<const double> b) const;
  Mat inverse() const;
  double det() const;

  // Attempted Cholesky; false when the matrix is not numerically SPD.
  bool is_positive_definite() const;

  double max_abs_diff(const Mat& other) const;

private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

struct LeastSquares {
  Vec coefficients;
  Vec stderrs;       // from residual variance, one per coefficient
  double condition;  // diag-ratio estimate of the design matrix's R factor
  double r_squared;
  double residual_ss;
};

// Ordinary least squares on explicit design columns (Householder QR).
LeastSquares lstsq(const std::vector<Vec>& columns, const Vec& y);

} // namespace szaszlab
