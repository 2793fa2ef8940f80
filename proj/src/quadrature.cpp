#include "quadrature.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "error.hpp"
#include "linalg.hpp"
#include "logspace.hpp"
#include "parallel.hpp"

namespace szaszlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string alpha_str(std::span<const long long> alpha) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (i) os << ",";
    os << alpha[i];
  }
  os << ")";
  return os.str();
}

// Gauss-Legendre nodes/weights on [-1, 1], cached per order.
struct GaussRule {
  Vec nodes, weights;
};

const GaussRule& gauss_rule(int n) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Newton from the Chebyshev-angle initial guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it2 = 0; it2 < 100; ++it2) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

// Sequential max-rescaled accumulator for sums of w * exp(L) with huge L
// spreads; deterministic for a fixed visit order.
struct LogAccumulator {
  double log_shift = kNegInf;
  double acc = 0.0;
  void add(double log_value, double weight) {
    if (log_value == kNegInf || weight == 0.0) return;
    if (log_value > log_shift) {
      acc *= std::exp(log_shift - log_value);
      log_shift = log_value;
    }
    acc += weight * std::exp(log_value - log_shift);
  }
  double log_total() const { return acc > 0 ? log_shift + std::log(acc) : kNegInf; }
};

double log_det_hess(const ToricModel& model, std::span<const double> rho) {
  Mat h = model.hess_phi(rho);
  const double d = h.det();
  if (!(d > 0.0)) fail(ErrorKind::Numeric, "non-positive Hessian determinant in quadrature");
  return std::log(d);
}

// Integrand exponent g(rho) = <alpha, rho> - N phi(rho) + log det H(rho).
double exponent(const ToricModel& model, std::span<const long long> alpha, int N,
                std::span<const double> rho) {
  double g = -static_cast<double>(N) * model.phi(rho);
  for (std::size_t j = 0; j < rho.size(); ++j) g += static_cast<double>(alpha[j]) * rho[j];
  return g + log_det_hess(model, rho);
}

Vec exponent_grad_fd(const ToricModel& model, std::span<const long long> alpha, int N,
                     const Vec& rho) {
  const int m = static_cast<int>(rho.size());
  Vec g = model.grad_phi(rho);
  Vec out(m);
  for (int j = 0; j < m; ++j)
    out[j] = static_cast<double>(alpha[j]) - static_cast<double>(N) * g[j];
  // central differences of log det H
  const double h = 1e-4;
  for (int j = 0; j < m; ++j) {
    Vec rp = rho, rm = rho;
    rp[j] += h;
    rm[j] -= h;
    if (model.rho_in_domain(rp) && model.rho_in_domain(rm))
      out[j] += (log_det_hess(model, rp) - log_det_hess(model, rm)) / (2 * h);
  }
  return out;
}

// Mode of the full integrand; seeds from the moment-map inverse of a point
// pushed strictly inside the polytope and refines with damped Newton steps
// preconditioned by N H_phi.
Vec find_mode(const ToricModel& model, std::span<const long long> alpha, int N) {
  const int m = model.dimension();
  Vec target(m);
  for (int j = 0; j < m; ++j)
    target[j] = (static_cast<double>(alpha[j]) + 0.5) / (static_cast<double>(N) + 1.0);
  target = model.polytope().clamp_inside(target, 1e-3 / (N + 1.0));
  Vec rho = dual_potential(model, target).second;
  try {
    for (int it = 0; it < 40; ++it) {
      Vec g = exponent_grad_fd(model, alpha, N, rho);
      double gn = 0.0;
      for (double v : g) gn = std::max(gn, std::fabs(v));
      if (gn < 1e-8 * std::max(1.0, static_cast<double>(N))) break;
      Mat h = model.hess_phi(rho);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) h(i, j) *= static_cast<double>(N);
      Vec step = h.solve(g);
      for (int j = 0; j < m; ++j)
        step[j] = std::clamp(step[j], -1.0, 1.0); // keep the search local
      Vec trial = rho;
      bool ok = false;
      for (int halve = 0; halve < 30; ++halve) {
        for (int j = 0; j < m; ++j) trial[j] = rho[j] + step[j];
        if (model.rho_in_domain(trial)) {
          ok = true;
          break;
        }
        for (int j = 0; j < m; ++j) step[j] *= 0.5;
      }
      if (!ok) break;
      rho = trial;
    }
  } catch (const Error&) {
    // fall back to the seeded point; window doubling compensates
  }
  return rho;
}

// Composite tensor Gauss-Legendre over explicit rho boxes: `panels` equal
// panels per axis, `order` nodes per panel, exponent shifted by log_shift.
double integrate_box(const ToricModel& model, std::span<const long long> alpha, int N,
                     const std::vector<std::pair<double, double>>& windows, int panels, int order,
                     double log_shift) {
  const int m = model.dimension();
  const GaussRule& rule = gauss_rule(order);
  LogAccumulator acc;
  std::vector<int> pidx(m, 0), nidx(m, 0);
  Vec rho(m);
  for (;;) {
    std::fill(nidx.begin(), nidx.end(), 0);
    for (;;) {
      double jac = 1.0;
      for (int j = 0; j < m; ++j) {
        const double lo = windows[j].first +
                          (windows[j].second - windows[j].first) * pidx[j] / panels;
        const double hi = windows[j].first +
                          (windows[j].second - windows[j].first) * (pidx[j] + 1) / panels;
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        rho[j] = mid + half * rule.nodes[nidx[j]];
        jac *= half * rule.weights[nidx[j]];
      }
      if (model.rho_in_domain(rho)) acc.add(exponent(model, alpha, N, rho) - log_shift, jac);
      int j = 0;
      while (j < m && nidx[j] == order - 1) {
        nidx[j] = 0;
        ++j;
      }
      if (j == m) break;
      ++nidx[j];
    }
    int j = 0;
    while (j < m && pidx[j] == panels - 1) {
      pidx[j] = 0;
      ++j;
    }
    if (j == m) break;
    ++pidx[j];
  }
  return acc.log_total() + log_shift;
}

// Laplace-window path for models whose rho-domain is all of R^m.
double raw_lognorm_laplace(const ToricModel& model, std::span<const long long> alpha, int N,
                           const QuadratureSpec& spec, double* est_error) {
  const int m = model.dimension();
  Vec mode = find_mode(model, alpha, N);
  const double g0 = exponent(model, alpha, N, mode);
  Mat h = model.hess_phi(mode);
  Vec sigma(m);
  Mat hinv = h.inverse();
  for (int j = 0; j < m; ++j)
    sigma[j] = std::sqrt(std::max(hinv(j, j) / static_cast<double>(N), 1e-300));

  if (spec.window) {
    if (static_cast<int>(spec.window->size()) != m)
      fail(ErrorKind::Usage, "explicit quadrature window dimension mismatch");
    double prev = kNegInf;
    for (int panels = 4; panels <= 256; panels *= 2) {
      const double cur = integrate_box(model, alpha, N, *spec.window, panels,
                                       spec.nodes_per_axis, g0);
      if (std::isfinite(prev) && std::fabs(cur - prev) <= spec.rel_tol) {
        if (est_error) *est_error = std::fabs(cur - prev);
        return cur;
      }
      prev = cur;
    }
    fail(ErrorKind::Numeric,
         "explicit-window quadrature did not stabilize for alpha = " + alpha_str(alpha));
  }

  // Window mode +- c sigma with c doubling until the value stabilizes; the
  // panel width stays ~2 sigma so each panel sees a benign integrand.
  double prev = kNegInf;
  double last_change = std::numeric_limits<double>::infinity();
  for (int c = 6; c <= 768; c *= 2) {
    std::vector<std::pair<double, double>> w(m);
    for (int j = 0; j < m; ++j) w[j] = {mode[j] - c * sigma[j], mode[j] + c * sigma[j]};
    const double cur = integrate_box(model, alpha, N, w, c, spec.nodes_per_axis, g0);
    if (std::isfinite(prev)) {
      last_change = std::fabs(cur - prev);
      if (last_change <= spec.rel_tol) {
        if (est_error) *est_error = last_change;
        return cur;
      }
    }
    prev = cur;
  }
  fail(ErrorKind::Numeric,
       "monomial norm integral failed to stabilize for alpha = " + alpha_str(alpha) +
           " (window growth kept changing the value by " + std::to_string(last_change) +
           "; the norm may not be integrable)");
}

// Simplex path for ball-type rho-domains: substitute t_j = e^{rho_j} and
// integrate over {t_j > 0, sum t_j < 1} with iterated Gauss-Legendre panels.
double raw_lognorm_simplex(const ToricModel& model, std::span<const long long> alpha, int N,
                           const QuadratureSpec& spec, double* est_error) {
  const int m = model.dimension();
  // exponent in t: sum (alpha_j - 1) log t_j - N phi + log det H, rho = log t
  auto exponent_t = [&](const Vec& t) {
    Vec rho(m);
    for (int j = 0; j < m; ++j) rho[j] = std::log(t[j]);
    double g = -static_cast<double>(N) * model.phi(rho) + log_det_hess(model, rho);
    for (int j = 0; j < m; ++j)
      g += (static_cast<double>(alpha[j]) - 1.0) * rho[j];
    return g;
  };

  double prev = kNegInf;
  double last_change = std::numeric_limits<double>::infinity();
  for (int panels = 2; panels <= 128; panels *= 2) {
    const GaussRule& rule = gauss_rule(spec.nodes_per_axis);
    LogAccumulator acc;
    Vec t(m);
    // iterated integration: axis j runs over [0, 1 - sum of previous]
    std::function<void(int, double, double)> recurse = [&](int axis, double remaining,
                                                           double log_jac) {
      for (int p = 0; p < panels; ++p) {
        const double lo = remaining * p / panels;
        const double hi = remaining * (p + 1) / panels;
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (int i = 0; i < spec.nodes_per_axis; ++i) {
          t[axis] = mid + half * rule.nodes[i];
          const double jac = half * rule.weights[i];
          if (t[axis] <= 0.0) continue;
          if (axis + 1 == m) {
            acc.add(exponent_t(t) + log_jac + std::log(jac), 1.0);
          } else {
            recurse(axis + 1, remaining - t[axis], log_jac + std::log(jac));
          }
        }
      }
    };
    recurse(0, 1.0, 0.0);
    const double cur = acc.log_total();
    if (std::isfinite(prev)) {
      last_change = std::fabs(cur - prev);
      if (last_change <= spec.rel_tol) {
        if (est_error) *est_error = last_change;
        return cur;
      }
    }
    prev = cur;
  }
  fail(ErrorKind::Numeric, "simplex quadrature failed to stabilize for alpha = " +
                               alpha_str(alpha) + " (last change " + std::to_string(last_change) + ")");
}

double raw_lognorm(const ToricModel& model, std::span<const long long> alpha, int N,
                   const QuadratureSpec& spec, double* est_error) {
  if (model.rho_domain_kind() == ToricModel::RhoDomainKind::UnitBallExp)
    return raw_lognorm_simplex(model, alpha, N, spec, est_error);
  return raw_lognorm_laplace(model, alpha, N, spec, est_error);
}

double log_calibration(const ToricModel& model, int N, const QuadratureSpec& spec) {
  if (spec.calibration_constant > 0.0) return std::log(spec.calibration_constant);
  if (!model.has_closed_norms()) return 0.0;
  std::vector<long long> zero(model.dimension(), 0);
  const double raw0 = raw_lognorm(model, zero, N, spec, nullptr);
  return model.closed_log_norm(zero, N) - raw0;
}

} // namespace

double monomial_log_norm(const ToricModel& model, int N, std::span<const long long> alpha,
                         const QuadratureSpec& spec, double* est_error) {
  if (N < model.min_level())
    fail(ErrorKind::Usage,
         "model '" + model.name() + "' needs N >= " + std::to_string(model.min_level()));
  if (!model.polytope().lattice_contains(N, alpha))
    fail(ErrorKind::Usage, "alpha = " + alpha_str(alpha) + " lies outside N*P");
  // Products integrate factor by factor; the integrand splits exactly.
  if (!model.factors().empty()) {
    const auto& fs = model.factors();
    const int da = fs[0]->dimension();
    double e1 = 0.0, e2 = 0.0;
    const double v = monomial_log_norm(*fs[0], N, alpha.subspan(0, da), spec, &e1) +
                     monomial_log_norm(*fs[1], N, alpha.subspan(da), spec, &e2);
    if (est_error) *est_error = e1 + e2;
    return v;
  }
  const double raw = raw_lognorm(model, alpha, N, spec, est_error);
  return raw + log_calibration(model, N, spec);
}

NormTable build_norm_table(const ToricModel& model, int N, long long alpha_max,
                           const QuadratureSpec& spec, int jobs) {
  const int m = model.dimension();
  std::vector<std::vector<long long>> alphas;
  std::vector<long long> alpha(m, 0);
  std::vector<long long> hi(m, alpha_max);
  for (int j = 0; j < m; ++j) {
    auto r = model.polytope().lattice_axis_range(N, alpha, j);
    if (r.hi) hi[j] = std::min(*r.hi, alpha_max);
  }
  for (;;) {
    if (model.polytope().lattice_contains(N, alpha)) alphas.push_back(alpha);
    int j = 0;
    while (j < m && alpha[j] == hi[j]) {
      alpha[j] = 0;
      ++j;
    }
    if (j == m) break;
    ++alpha[j];
  }

  NormTable table;
  table.model = model.name();
  table.N = N;
  table.spec = spec;
  table.entries.resize(alphas.size());
  parallel_for(alphas.size(), jobs, [&](std::size_t i) {
    double err = 0.0;
    const double v = monomial_log_norm(model, N, alphas[i], spec, &err);
    table.entries[i] = NormEntry{alphas[i], v, err};
  });
  return table;
}

double NormTable::log_norm(std::span<const long long> alpha) const {
  for (const auto& e : entries) {
    if (std::equal(e.alpha.begin(), e.alpha.end(), alpha.begin(), alpha.end()))
      return e.log_norm;
  }
  fail(ErrorKind::Dependency, "norm table has no entry for alpha = " + alpha_str(alpha));
}

std::string NormTable::to_csv() const {
  nlohmann::json header;
  header["model"] = model;
  header["N"] = N;
  header["spec"] = {{"nodes_per_axis", spec.nodes_per_axis},
                    {"rel_tol", spec.rel_tol},
                    {"calibration_constant", spec.calibration_constant}};
  std::ostringstream os;
  os << "# " << header.dump() << "\n";
  if (!entries.empty())
    for (std::size_t j = 0; j < entries.front().alpha.size(); ++j) os << "alpha" << (j + 1) << ",";
  os << "log_norm,est_error\n";
  os.precision(17);
  for (const auto& e : entries) {
    for (long long a : e.alpha) os << a << ",";
    os << e.log_norm << "," << e.est_error << "\n";
  }
  return os.str();
}

double TableNorms::log_norm(std::span<const long long> alpha, int N) const {
  if (N != table_.N)
    fail(ErrorKind::Dependency, "norm table was built for N = " + std::to_string(table_.N));
  return table_.log_norm(alpha);
}

double QuadratureNorms::log_norm(std::span<const long long> alpha, int N) const {
  std::vector<long long> key(alpha.begin(), alpha.end());
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find({N, key});
    if (it != cache_.end()) return it->second;
  }
  const double v = monomial_log_norm(*model_, N, alpha, spec_, nullptr);
  std::lock_guard<std::mutex> lock(mu_);
  cache_[{N, key}] = v;
  return v;
}

KernelDiagResult kernel_diag(const ToricModel& model, const NormSource& norms, int N,
                             std::span<const double> x, const TruncationPolicy& policy) {
  const int m = model.dimension();
  if (static_cast<int>(x.size()) != m) fail(ErrorKind::Usage, "x dimension mismatch");
  if (!model.polytope().strictly_inside(x))
    fail(ErrorKind::Domain, "x must be strictly inside the polytope");
  if (N < model.min_level())
    fail(ErrorKind::Usage,
         "model '" + model.name() + "' needs N >= " + std::to_string(model.min_level()));

  // phi-route terms: <rho, alpha> - N phi(rho) - log norm, at rho = rho(x).
  Vec rho = dual_potential(model, x).second;
  const double nphi = static_cast<double>(N) * model.phi(rho);

  detail::WindowSpec spec;
  spec.m = m;
  spec.center.resize(m);
  for (int j = 0; j < m; ++j)
    spec.center[j] = static_cast<long long>(std::llround(static_cast<double>(N) * x[j]));
  std::vector<long long> center_copy = spec.center;
  spec.axis_bounds = [&model, N, &center_copy](int axis) {
    return model.polytope().lattice_axis_range(N, center_copy, axis);
  };
  spec.log_weight = [&](std::span<const long long> a) {
    double lw = -nphi;
    for (int j = 0; j < m; ++j) lw += static_cast<double>(a[j]) * rho[j];
    return lw - norms.log_norm(a, N);
  };
  detail::WindowSum s = detail::windowed_sum(spec, policy, true);

  KernelDiagResult r;
  r.B = std::exp(s.log_max) * s.sum_w;
  r.tail_bound = s.tail_rel;
  r.closed_value = model.closed_kernel_diag(N);
  r.stated_value = model.stated_kernel_diag(N);

  // cumulative partial sums over expanding sup-norm rings about the center
  long long max_ring = 0;
  std::vector<long long> rings(s.entries.size());
  for (std::size_t i = 0; i < s.entries.size(); ++i) {
    long long ring = 0;
    for (int j = 0; j < m; ++j)
      ring = std::max(ring, std::llabs(s.entries[i].alpha[j] - spec.center[j]));
    rings[i] = ring;
    max_ring = std::max(max_ring, ring);
  }
  std::vector<double> ring_sums(static_cast<std::size_t>(max_ring) + 1, 0.0);
  for (std::size_t i = 0; i < s.entries.size(); ++i)
    ring_sums[static_cast<std::size_t>(rings[i])] +=
        std::exp(s.entries[i].log_weight - s.log_max);
  r.partial_sums.resize(ring_sums.size());
  double cum = 0.0;
  for (std::size_t i = 0; i < ring_sums.size(); ++i) {
    cum += ring_sums[i];
    r.partial_sums[i] = std::exp(s.log_max) * cum;
  }
  return r;
}

TyzRatioResult tyz_ratio(const ToricModel& model, const NormSource& norms,
                         std::vector<int> N_list, std::span<const double> x,
                         const TruncationPolicy& policy) {
  if (N_list.size() < 2) fail(ErrorKind::Usage, "tyz_ratio needs at least two N values");
  TyzRatioResult out;
  out.N_list = std::move(N_list);
  out.ratios.resize(out.N_list.size());
  const double m = static_cast<double>(model.dimension());
  for (std::size_t i = 0; i < out.N_list.size(); ++i) {
    const double B = kernel_diag(model, norms, out.N_list[i], x, policy).B;
    out.ratios[i] = B / std::pow(static_cast<double>(out.N_list[i]), m);
  }
  // fit ratio ~ c0 + a1/N (+ a2/N^2 when enough points)
  const int degree = out.N_list.size() >= 4 ? 2 : 1;
  std::vector<Vec> cols(static_cast<std::size_t>(degree) + 1, Vec(out.N_list.size()));
  for (std::size_t i = 0; i < out.N_list.size(); ++i) {
    double p = 1.0;
    for (int d = 0; d <= degree; ++d) {
      cols[d][i] = p;
      p /= static_cast<double>(out.N_list[i]);
    }
  }
  LeastSquares fit = lstsq(cols, out.ratios);
  out.fitted_a1 = fit.coefficients[1];
  return out;
}

} // namespace szaszlab
