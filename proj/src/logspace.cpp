#include "logspace.hpp"

#include <cmath>
#include <limits>

namespace szaszlab {

namespace {
double pairwise_rec(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_rec(v, half) + pairwise_rec(v + half, n - half);
}
} // namespace

double pairwise_sum(std::span<const double> v) {
  return pairwise_rec(v.data(), v.size());
}

double log_sum_exp(std::span<const double> logs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double l : logs) mx = std::max(mx, l);
  if (!std::isfinite(mx)) return mx;
  std::vector<double> shifted(logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) shifted[i] = std::exp(logs[i] - mx);
  return mx + std::log(pairwise_sum(shifted));
}

double log_factorial(long long n) { return std::lgamma(static_cast<double>(n) + 1.0); }

double log_binomial(long long n, long long k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

double log_pochhammer(double a, long long j) {
  return std::lgamma(a + static_cast<double>(j)) - std::lgamma(a);
}

} // namespace szaszlab
