#include "linalg.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "error.hpp"

namespace szaszlab {

std::string format_vec(std::span<const double> v) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    os << v[i];
  }
  os << ")";
  return os.str();
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::operator*(const Mat& rhs) const {
  Mat out(rows_, rhs.cols_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t k = 0; k < cols_; ++k) {
      const double a = (*this)(i, k);
      if (a == 0.0) continue;
      for (std::size_t j = 0; j < rhs.cols_; ++j) out(i, j) += a * rhs(k, j);
    }
  return out;
}

Vec Mat::operator*(std::span<const double> v) const {
  Vec out(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) s += (*this)(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

Mat Mat::transpose() const {
  Mat out(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
  return out;
}

namespace {

// LU decomposition with partial pivoting, in place. Returns pivot rows and
// the sign of the permutation; throws on numerical singularity.
int lu_decompose(Mat& a, std::vector<std::size_t>& piv) {
  const std::size_t n = a.rows();
  piv.resize(n);
  int sign = 1;
  for (std::size_t i = 0; i < n; ++i) piv[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::fabs(a(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::fabs(a(i, k));
      if (v > best) { best = v; p = i; }
    }
    if (best == 0.0) fail(ErrorKind::Numeric, "singular matrix in LU solve");
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
      std::swap(piv[k], piv[p]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      a(i, k) /= a(k, k);
      const double f = a(i, k);
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return sign;
}

Vec lu_solve(const Mat& lu, const std::vector<std::size_t>& piv, std::span<const double> b) {
  const std::size_t n = lu.rows();
  Vec x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[piv[i]];
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) x[i] -= lu(i, j) * x[j];
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu(i, j) * x[j];
    x[i] /= lu(i, i);
  }
  return x;
}

} // namespace

Vec Mat::solve(std::span<const double> b) const {
  if (rows_ != cols_ || b.size() != rows_)
    fail(ErrorKind::Numeric, "solve requires a square system");
  Mat lu = *this;
  std::vector<std::size_t> piv;
  lu_decompose(lu, piv);
  return lu_solve(lu, piv, b);
}

Mat Mat::inverse() const {
  if (rows_ != cols_) fail(ErrorKind::Numeric, "inverse requires a square matrix");
  Mat lu = *this;
  std::vector<std::size_t> piv;
  lu_decompose(lu, piv);
  Mat out(rows_, rows_);
  Vec e(rows_, 0.0);
  for (std::size_t j = 0; j < rows_; ++j) {
    e.assign(rows_, 0.0);
    e[j] = 1.0;
    Vec col = lu_solve(lu, piv, e);
    for (std::size_t i = 0; i < rows_; ++i) out(i, j) = col[i];
  }
  return out;
}

double Mat::det() const {
  if (rows_ != cols_) fail(ErrorKind::Numeric, "det requires a square matrix");
  Mat lu = *this;
  std::vector<std::size_t> piv;
  double d;
  try {
    d = static_cast<double>(lu_decompose(lu, piv));
  } catch (const Error&) {
    return 0.0;
  }
  for (std::size_t i = 0; i < rows_; ++i) d *= lu(i, i);
  return d;
}

bool Mat::is_positive_definite() const {
  if (rows_ != cols_) return false;
  Mat l(rows_, rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = (*this)(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s)) return false;
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return true;
}

double Mat::max_abs_diff(const Mat& other) const {
  double m = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i)
    m = std::max(m, std::fabs(data_[i] - other.data_[i]));
  return m;
}

LeastSquares lstsq(const std::vector<Vec>& columns, const Vec& y) {
  const std::size_t k = columns.size();
  const std::size_t n = y.size();
  if (k == 0 || n < k) fail(ErrorKind::Usage, "least squares needs more rows than columns");
  for (const auto& c : columns)
    if (c.size() != n) fail(ErrorKind::Usage, "least squares column length mismatch");

  // Householder QR of the n x k design matrix; R overwrites the top block.
  std::vector<Vec> a = columns;
  Vec rhs = y;
  Vec rdiag(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double norm = 0.0;
    for (std::size_t i = j; i < n; ++i) norm += a[j][i] * a[j][i];
    norm = std::sqrt(norm);
    if (norm == 0.0) fail(ErrorKind::Numeric, "rank-deficient design matrix");
    if (a[j][j] > 0) norm = -norm;
    for (std::size_t i = j; i < n; ++i) a[j][i] /= norm;
    a[j][j] -= 1.0;
    for (std::size_t c = j + 1; c < k; ++c) {
      double s = 0.0;
      for (std::size_t i = j; i < n; ++i) s += a[j][i] * a[c][i];
      s /= a[j][j];
      for (std::size_t i = j; i < n; ++i) a[c][i] += s * a[j][i];
    }
    double sy = 0.0;
    for (std::size_t i = j; i < n; ++i) sy += a[j][i] * rhs[i];
    sy /= a[j][j];
    for (std::size_t i = j; i < n; ++i) rhs[i] += sy * a[j][i];
    rdiag[j] = norm;
  }

  LeastSquares out;
  out.coefficients.assign(k, 0.0);
  for (std::size_t j = k; j-- > 0;) {
    double s = rhs[j];
    for (std::size_t c = j + 1; c < k; ++c) s -= a[c][j] * out.coefficients[c];
    out.coefficients[j] = s / rdiag[j];
  }

  double ssr = 0.0;
  for (std::size_t i = k; i < n; ++i) ssr += rhs[i] * rhs[i];
  out.residual_ss = ssr;

  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  double sst = 0.0;
  for (double v : y) sst += (v - mean) * (v - mean);
  out.r_squared = sst > 0 ? 1.0 - ssr / sst : 1.0;

  double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    dmax = std::max(dmax, std::fabs(rdiag[j]));
    dmin = std::min(dmin, std::fabs(rdiag[j]));
  }
  out.condition = dmin > 0 ? dmax / dmin : std::numeric_limits<double>::infinity();

  // Covariance of the coefficients: sigma^2 (R^T R)^-1.
  const double dof = static_cast<double>(n - k);
  const double sigma2 = dof > 0 ? ssr / dof : 0.0;
  Mat r(k, k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    r(i, i) = rdiag[i];
    for (std::size_t j = i + 1; j < k; ++j) r(i, j) = a[j][i];
  }
  Mat rinv = r.inverse();
  out.stderrs.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    double s = 0.0;
    for (std::size_t j = i; j < k; ++j) s += rinv(i, j) * rinv(i, j);
    out.stderrs[i] = std::sqrt(sigma2 * s);
  }
  return out;
}

} // namespace szaszlab
