#pragma once

#include <span>
#include <string>
#include <vector>

#include "lattice_ops.hpp"
#include "quadrature.hpp"

namespace szaszlab {

// Geometric N grid {from, 1.5*from, 2*from, 3*from, ...} up to `to`.
std::vector<int> geometric_grid(int from, int to);

struct AsymptoticFit {
  std::vector<int> N_grid;
  Vec values;
  Vec coefficients; // c_0..c_p of sum c_j N^{-j}
  Vec coeff_stderr;
  double residual_slope = 0.0; // log-log slope of |v - c0 - c1/N|
  double r_squared = 0.0;
  double condition = 0.0;
  std::string warning; // conditioning / noise-floor warnings
};

AsymptoticFit fit_inverse_powers(std::span<const int> N_grid, std::span<const double> values,
                                 int degree = 3);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int points_used = 0;
};

// Least-squares line through (log N, log d) for d above the noise floor.
SlopeFit loglog_slope(std::span<const int> N_grid, std::span<const double> dist,
                      double floor = 1e-300);

// S_{h^N} f(x) over the N grid with coefficient extraction.
AsymptoticFit voronovskaya_extract(const ToricModel& model, const TestFunction& f,
                                   std::span<const double> x, std::span<const int> N_grid,
                                   const TruncationPolicy& policy = {},
                                   const NormSource* norms = nullptr);

// Second-order prediction (1/2) sum_ij H_ij(x) f_ij(x) for the 1/N term.
double voronovskaya_theory(const ToricModel& model, const TestFunction& f,
                           std::span<const double> x);

// (D_{1/N} S_{h^N} D_{1/N}^{-1}) f(x) = S_{h^N}(f(N .))(x/N).
double corner_scaled_operator(const ToricModel& model, const TestFunction& f,
                              std::span<const double> x, int N,
                              const TruncationPolicy& policy = {},
                              const NormSource* norms = nullptr);

struct CornerB1Record {
  AsymptoticFit fit;
  double c0_expected = 0.0; // classical operator at level 1
  double fitted_c1 = 0.0;
  double formula_b1 = 0.0; // (1/2) sum a_ij S^1(f_ij)(x), a = M(x)^2 hess h(0)
  bool sign_agrees = false;
  double magnitude_ratio = 0.0; // |fitted| / |formula|
  bool quadratic_regime = false; // third derivatives vanish at the probes
};

CornerB1Record corner_b1_fit(const ToricModel& model, const TestFunction& f,
                             std::span<const double> x, std::span<const int> N_grid,
                             const TruncationPolicy& policy = {},
                             const NormSource* norms = nullptr);

struct WallResult {
  double value = 0.0;
  double szasz_limit = 0.0; // classical operator of the frozen-tail slice
  double distance = 0.0;
};

// Dilation in the leading |x_prime| axes only, on a product model.
WallResult wall_scaled_operator(const ToricModel& product_model, const TestFunction& f,
                                std::span<const double> x_prime, std::span<const double> x_tail,
                                int N, const TruncationPolicy& policy = {});

struct PoissonRefinementReport {
  double x = 0.0;
  int k_max = 0;
  std::vector<int> N_grid;
  std::vector<Vec> residuals; // signed binomial - poisson pmf, per N then k
  Vec sup_residual;           // per N
  double first_order_slope = 0.0;
  Vec corrected_sup;          // after removing the fitted a_k/N correction
  double second_order_slope = 0.0;
};

// binomial(N, x/N) vs poisson(x) pmf comparison over k <= k_max.
PoissonRefinementReport poisson_refinement(double x, int k_max, std::span<const int> N_grid);

} // namespace szaszlab
