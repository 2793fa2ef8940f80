#include "asymptotics.hpp"

#include <cmath>
#include <limits>

#include "error.hpp"
#include "probability.hpp"

namespace szaszlab {

std::vector<int> geometric_grid(int from, int to) {
  std::vector<int> grid;
  for (int a = from; a <= to; a *= 2) {
    grid.push_back(a);
    const int mid = a + a / 2;
    if (mid <= to) grid.push_back(mid);
  }
  return grid;
}

AsymptoticFit fit_inverse_powers(std::span<const int> N_grid, std::span<const double> values,
                                 int degree) {
  if (N_grid.size() != values.size()) fail(ErrorKind::Usage, "fit grid/value size mismatch");
  if (N_grid.size() < 4) fail(ErrorKind::Usage, "fit needs an N grid of length >= 4");
  for (std::size_t i = 1; i < N_grid.size(); ++i)
    if (N_grid[i] <= N_grid[i - 1]) fail(ErrorKind::Usage, "N grid must be strictly increasing");
  const int p = std::min<int>(degree, static_cast<int>(N_grid.size()) - 1);

  std::vector<Vec> cols(static_cast<std::size_t>(p) + 1, Vec(N_grid.size()));
  for (std::size_t i = 0; i < N_grid.size(); ++i) {
    double v = 1.0;
    for (int d = 0; d <= p; ++d) {
      cols[d][i] = v;
      v /= static_cast<double>(N_grid[i]);
    }
  }
  LeastSquares ls = lstsq(cols, Vec(values.begin(), values.end()));

  AsymptoticFit fit;
  fit.N_grid.assign(N_grid.begin(), N_grid.end());
  fit.values.assign(values.begin(), values.end());
  fit.coefficients = ls.coefficients;
  fit.coeff_stderr = ls.stderrs;
  fit.r_squared = ls.r_squared;
  fit.condition = ls.condition;
  if (ls.condition > 1e12)
    fit.warning = "ill-conditioned fit (condition estimate " + std::to_string(ls.condition) + ")";

  double scale = 1.0;
  for (double v : values) scale = std::max(scale, std::fabs(v));
  Vec resid(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    resid[i] = values[i] - fit.coefficients[0] - fit.coefficients[1] / N_grid[i];
  SlopeFit sf = loglog_slope(N_grid, resid, 1e-13 * scale);
  if (sf.points_used >= 3) {
    fit.residual_slope = sf.slope;
  } else {
    fit.residual_slope = 0.0;
    if (!fit.warning.empty()) fit.warning += "; ";
    fit.warning += "residuals at the noise floor after removing c0 + c1/N";
  }
  return fit;
}

SlopeFit loglog_slope(std::span<const int> N_grid, std::span<const double> dist, double floor) {
  Vec lx, ly;
  for (std::size_t i = 0; i < N_grid.size(); ++i) {
    const double d = std::fabs(dist[i]);
    if (d > floor) {
      lx.push_back(std::log(static_cast<double>(N_grid[i])));
      ly.push_back(std::log(d));
    }
  }
  SlopeFit out;
  out.points_used = static_cast<int>(lx.size());
  if (lx.size() < 2) return out;
  std::vector<Vec> cols{Vec(lx.size(), 1.0), lx};
  LeastSquares ls = lstsq(cols, ly);
  out.intercept = ls.coefficients[0];
  out.slope = ls.coefficients[1];
  out.r_squared = ls.r_squared;
  return out;
}

AsymptoticFit voronovskaya_extract(const ToricModel& model, const TestFunction& f,
                                   std::span<const double> x, std::span<const int> N_grid,
                                   const TruncationPolicy& policy, const NormSource* norms) {
  Vec values(N_grid.size());
  for (std::size_t i = 0; i < N_grid.size(); ++i)
    values[i] = generalized_operator(model, f, N_grid[i], x, policy, norms).value;
  return fit_inverse_powers(N_grid, values, 3);
}

double voronovskaya_theory(const ToricModel& model, const TestFunction& f,
                           std::span<const double> x) {
  const int m = model.dimension();
  if (!f.has_derivatives())
    fail(ErrorKind::Dependency, "voronovskaya_theory needs second derivatives of f");
  Mat H = hessians(model, x).second;
  double s = 0.0;
  std::vector<int> multi(m, 0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      std::fill(multi.begin(), multi.end(), 0);
      multi[i] += 1;
      multi[j] += 1;
      s += 0.5 * H(i, j) * f.derivative(multi, x);
    }
  }
  return s;
}

double corner_scaled_operator(const ToricModel& model, const TestFunction& f,
                              std::span<const double> x, int N, const TruncationPolicy& policy,
                              const NormSource* norms) {
  const int m = model.dimension();
  Vec y(m);
  for (int j = 0; j < m; ++j) y[j] = x[j] / static_cast<double>(N);
  if (!model.polytope().strictly_inside(y))
    fail(ErrorKind::Domain, "x/N = " + format_vec(y) + " is outside the polytope");
  TestFunction dilated = f.dilate(static_cast<double>(N));
  return generalized_operator(model, dilated, N, y, policy, norms).value;
}

CornerB1Record corner_b1_fit(const ToricModel& model, const TestFunction& f,
                             std::span<const double> x, std::span<const int> N_grid,
                             const TruncationPolicy& policy, const NormSource* norms) {
  const int m = model.dimension();
  if (!f.has_derivatives())
    fail(ErrorKind::Dependency, "corner_b1_fit compares against a second-derivative formula");
  Vec values(N_grid.size());
  for (std::size_t i = 0; i < N_grid.size(); ++i)
    values[i] = corner_scaled_operator(model, f, x, N_grid[i], policy, norms);

  CornerB1Record rec;
  rec.fit = fit_inverse_powers(N_grid, values, 3);
  rec.fitted_c1 = rec.fit.coefficients[1];
  rec.c0_expected = szasz_classical(f, 1, x, policy).value;

  SmoothRemainder sr = smooth_remainder(model);
  double b1 = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double a_ij = x[i] * x[i] * sr.hess0(i, j); // M(x)^2 hess h(0)
      if (a_ij == 0.0) continue;
      const double s1 = szasz_classical(f.second_partial(i, j), 1, x, policy).value;
      b1 += 0.5 * a_ij * s1;
    }
  }
  rec.formula_b1 = b1;

  const double tiny = 1e-10 * std::max(1.0, std::fabs(rec.c0_expected));
  if (std::fabs(rec.fitted_c1) < tiny && std::fabs(rec.formula_b1) < tiny) {
    rec.sign_agrees = true;
    rec.magnitude_ratio = 1.0;
  } else {
    rec.sign_agrees = (rec.fitted_c1 >= 0) == (rec.formula_b1 >= 0);
    rec.magnitude_ratio = std::fabs(rec.formula_b1) > 0
                              ? std::fabs(rec.fitted_c1) / std::fabs(rec.formula_b1)
                              : std::numeric_limits<double>::infinity();
  }

  // third derivatives at the evaluation point decide the comparison regime
  rec.quadratic_regime = true;
  std::vector<int> multi(m, 0);
  for (int i = 0; i < m && rec.quadratic_regime; ++i) {
    for (int j = 0; j < m && rec.quadratic_regime; ++j) {
      for (int k = 0; k < m && rec.quadratic_regime; ++k) {
        std::fill(multi.begin(), multi.end(), 0);
        multi[i] += 1;
        multi[j] += 1;
        multi[k] += 1;
        if (std::fabs(f.derivative(multi, x)) > 1e-9) rec.quadratic_regime = false;
      }
    }
  }
  return rec;
}

WallResult wall_scaled_operator(const ToricModel& product_model, const TestFunction& f,
                                std::span<const double> x_prime, std::span<const double> x_tail,
                                int N, const TruncationPolicy& policy) {
  const int m = product_model.dimension();
  const int k = static_cast<int>(x_prime.size());
  if (k < 1 || k >= m || static_cast<int>(x_tail.size()) != m - k)
    fail(ErrorKind::Usage, "wall operator needs 1 <= |x_prime| < dimension");
  Vec y(m);
  for (int j = 0; j < k; ++j) y[j] = x_prime[j] / static_cast<double>(N);
  for (int j = k; j < m; ++j) y[j] = x_tail[j - k];
  if (!product_model.polytope().strictly_inside(y))
    fail(ErrorKind::Domain, "dilated point " + format_vec(y) + " is outside the polytope");

  TestFunction dilated = f.dilate_axes(static_cast<double>(N), k);
  WallResult r;
  r.value = generalized_operator(product_model, dilated, N, y, policy).value;
  TestFunction frozen = f.slice_tail(Vec(x_tail.begin(), x_tail.end()));
  r.szasz_limit = szasz_classical(frozen, 1, x_prime, policy).value;
  r.distance = std::fabs(r.value - r.szasz_limit);
  return r;
}

PoissonRefinementReport poisson_refinement(double x, int k_max, std::span<const int> N_grid) {
  if (x < 0) fail(ErrorKind::Usage, "poisson_refinement needs x >= 0");
  PoissonRefinementReport rep;
  rep.x = x;
  rep.k_max = k_max;
  rep.N_grid.assign(N_grid.begin(), N_grid.end());
  rep.residuals.resize(N_grid.size());
  rep.sup_residual.assign(N_grid.size(), 0.0);
  LatticeDistribution poi = LatticeDistribution::poisson(x);
  for (std::size_t i = 0; i < N_grid.size(); ++i) {
    const int N = N_grid[i];
    LatticeDistribution bin = LatticeDistribution::binomial(N, x / N);
    rep.residuals[i].assign(k_max + 1, 0.0);
    for (int k = 0; k <= k_max; ++k) {
      const double d = bin.pmf(k) - poi.pmf(k);
      rep.residuals[i][k] = d;
      rep.sup_residual[i] = std::max(rep.sup_residual[i], std::fabs(d));
    }
  }
  rep.first_order_slope = loglog_slope(N_grid, rep.sup_residual).slope;

  // per-k fit of the signed residual to a_k/N + b_k/N^2; removing a_k/N
  // exposes the second-order decay
  rep.corrected_sup.assign(N_grid.size(), 0.0);
  for (int k = 0; k <= k_max; ++k) {
    Vec y(N_grid.size());
    std::vector<Vec> cols(2, Vec(N_grid.size()));
    for (std::size_t i = 0; i < N_grid.size(); ++i) {
      y[i] = rep.residuals[i][k];
      cols[0][i] = 1.0 / N_grid[i];
      cols[1][i] = 1.0 / (static_cast<double>(N_grid[i]) * N_grid[i]);
    }
    const double a_k = lstsq(cols, y).coefficients[0];
    for (std::size_t i = 0; i < N_grid.size(); ++i) {
      const double corrected = std::fabs(y[i] - a_k / N_grid[i]);
      rep.corrected_sup[i] = std::max(rep.corrected_sup[i], corrected);
    }
  }
  rep.second_order_slope = loglog_slope(N_grid, rep.corrected_sup).slope;
  return rep;
}

} // namespace szaszlab
