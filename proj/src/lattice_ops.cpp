#include "lattice_ops.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "error.hpp"
#include "logspace.hpp"

namespace szaszlab {

ClosedFormNorms::ClosedFormNorms(ModelPtr model) : owner_(std::move(model)), model_(owner_.get()) {
  if (!model_ || !model_->has_closed_norms())
    fail(ErrorKind::Dependency,
         "model has no closed-form norms; supply a quadrature norm table instead");
}

ClosedFormNorms::ClosedFormNorms(const ToricModel& model) : model_(&model) {
  if (!model_->has_closed_norms())
    fail(ErrorKind::Dependency,
         "model has no closed-form norms; supply a quadrature norm table instead");
}

double ClosedFormNorms::log_norm(std::span<const long long> alpha, int N) const {
  return model_->closed_log_norm(alpha, N);
}

ScaledNorms::ScaledNorms(const NormSource& base, double scale) : base_(base) {
  if (!(scale > 0.0)) fail(ErrorKind::Usage, "norm scale must be positive");
  log_scale_ = std::log(scale);
}

double ScaledNorms::log_norm(std::span<const long long> alpha, int N) const {
  return base_.log_norm(alpha, N) + log_scale_;
}

namespace detail {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logaddexp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

struct AxisScan {
  long long lo = 0, hi = 0;
  double log_tail = kNegInf; // absolute (profile) mass estimate of the cut tails
  double log_mass = kNegInf; // profile mass inside [lo, hi]
};

// Expands one axis of the product window along the profile through `center`.
AxisScan expand_axis(const std::function<double(long long)>& log_w, long long center,
                     long long lo_bound, std::optional<long long> hi_bound, double eps_axis,
                     const TruncationPolicy& policy) {
  AxisScan scan;
  if (policy.mode == TruncationPolicy::Mode::FixedRadius) {
    scan.lo = std::max(lo_bound, center - policy.fixed_radius);
    scan.hi = center + policy.fixed_radius;
    if (hi_bound) scan.hi = std::min(scan.hi, *hi_bound);
    for (long long k = scan.lo; k <= scan.hi; ++k) scan.log_mass = logaddexp(scan.log_mass, log_w(k));
    // edge-ratio estimate of what the fixed window cuts off
    for (int dir : {-1, +1}) {
      const long long edge = dir < 0 ? scan.lo : scan.hi;
      if (dir < 0 && edge == lo_bound) continue;
      if (dir > 0 && hi_bound && edge == *hi_bound) continue;
      const double lw0 = log_w(edge), lw1 = log_w(edge + dir);
      const double r = std::exp(lw1 - lw0);
      if (r < 1.0) scan.log_tail = logaddexp(scan.log_tail, lw1 - std::log1p(-r));
    }
    return scan;
  }

  const double log_eps = std::log(eps_axis);
  const long long max_span = 4'000'000;
  scan.lo = scan.hi = center;
  double prev = log_w(center);
  scan.log_mass = prev;
  for (int dir : {+1, -1}) {
    double prev_lw = prev;
    long long k = center + dir;
    for (;;) {
      if (dir < 0 && k < lo_bound) break;
      if (dir > 0 && hi_bound && k > *hi_bound) break;
      if (std::llabs(k - center) > max_span)
        fail(ErrorKind::Resource, "truncation radius exceeds the enumeration cap");
      const double lw = log_w(k);
      const double r = std::exp(lw - prev_lw);
      if (r < 1.0 && std::isfinite(lw)) {
        // remaining tail from k on is bounded by w(k)/(1-r) for the
        // log-concave profiles in this library
        const double log_tail = lw - std::log1p(-r);
        if (log_tail <= log_eps + scan.log_mass) {
          scan.log_tail = logaddexp(scan.log_tail, log_tail);
          break;
        }
      }
      scan.log_mass = logaddexp(scan.log_mass, lw);
      if (dir > 0) scan.hi = k;
      else scan.lo = k;
      prev_lw = lw;
      k += dir;
    }
  }
  return scan;
}

} // namespace

WindowSum windowed_sum(const WindowSpec& spec, const TruncationPolicy& policy, bool collect) {
  const int m = spec.m;
  std::vector<long long> center = spec.center;

  // Clamp the center into the lattice bounds axis by axis.
  for (int j = 0; j < m; ++j) {
    long long lo = 0;
    std::optional<long long> hi;
    if (spec.axis_bounds) {
      auto r = spec.axis_bounds(j);
      lo = r.lo;
      hi = r.hi;
    }
    center[j] = std::max(center[j], lo);
    if (hi) center[j] = std::min(center[j], *hi);
  }

  const double eps_axis = policy.epsilon / (2.0 * m);
  WindowSum out;
  out.lo.resize(m);
  out.hi.resize(m);
  double log_tail_total = kNegInf;
  double log_mass_min = 0.0;
  std::vector<long long> probe = center;
  for (int j = 0; j < m; ++j) {
    long long lo = 0;
    std::optional<long long> hi;
    if (spec.axis_bounds) {
      auto r = spec.axis_bounds(j);
      lo = r.lo;
      hi = r.hi;
    }
    auto profile = [&](long long k) {
      probe[j] = k;
      const double v = spec.log_weight(probe);
      return v;
    };
    AxisScan scan = expand_axis(profile, center[j], lo, hi, eps_axis, policy);
    probe[j] = center[j];
    out.lo[j] = scan.lo;
    out.hi[j] = scan.hi;
    log_tail_total = logaddexp(log_tail_total, scan.log_tail - scan.log_mass);
    log_mass_min = std::min(log_mass_min, 0.0);
  }
  out.tail_rel = std::exp(log_tail_total);

  long long total = 1;
  for (int j = 0; j < m; ++j) {
    const long long span = out.hi[j] - out.lo[j] + 1;
    if (span <= 0) fail(ErrorKind::Numeric, "empty lattice window");
    if (total > policy.max_terms / span)
      fail(ErrorKind::Resource, "lattice window exceeds max_terms");
    total *= span;
  }

  std::vector<double> lws;
  std::vector<double> fvals;
  lws.reserve(static_cast<std::size_t>(total));
  if (spec.f_value) fvals.reserve(static_cast<std::size_t>(total));
  std::vector<std::vector<long long>> alphas;
  if (collect) alphas.reserve(static_cast<std::size_t>(total));

  std::vector<long long> alpha = out.lo;
  Vec arg(m);
  for (;;) {
    const bool member = !spec.member || spec.member(alpha);
    if (member) {
      const double lw = spec.log_weight(alpha);
      lws.push_back(lw);
      if (spec.f_value) {
        const double fv = spec.f_value(alpha);
        fvals.push_back(fv);
        out.max_abs_f = std::max(out.max_abs_f, std::fabs(fv));
      }
      if (collect) alphas.push_back(alpha);
    }
    int j = 0;
    while (j < m && alpha[j] == out.hi[j]) {
      alpha[j] = out.lo[j];
      ++j;
    }
    if (j == m) break;
    ++alpha[j];
  }

  out.terms = static_cast<long long>(lws.size());
  out.log_max = kNegInf;
  for (double lw : lws) out.log_max = std::max(out.log_max, lw);
  if (!std::isfinite(out.log_max))
    fail(ErrorKind::Numeric, "all lattice weights vanished inside the window");
  std::vector<double> w(lws.size());
  for (std::size_t i = 0; i < lws.size(); ++i) w[i] = std::exp(lws[i] - out.log_max);
  out.sum_w = pairwise_sum(w);
  if (spec.f_value) {
    std::vector<double> fw(lws.size());
    for (std::size_t i = 0; i < lws.size(); ++i) fw[i] = fvals[i] * w[i];
    out.sum_fw = pairwise_sum(fw);
  } else {
    out.sum_fw = out.sum_w;
    out.max_abs_f = 1.0;
  }
  if (collect) {
    out.entries.resize(lws.size());
    for (std::size_t i = 0; i < lws.size(); ++i)
      out.entries[i] = WeightEntry{std::move(alphas[i]), lws[i]};
  }
  return out;
}

} // namespace detail

namespace {

std::vector<long long> round_center(int N, std::span<const double> x) {
  std::vector<long long> c(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    c[j] = static_cast<long long>(std::llround(static_cast<double>(N) * x[j]));
  return c;
}

Vec lattice_arg(int N, std::span<const long long> alpha) {
  Vec a(alpha.size());
  for (std::size_t j = 0; j < alpha.size(); ++j)
    a[j] = static_cast<double>(alpha[j]) / static_cast<double>(N);
  return a;
}

} // namespace

OperatorResult szasz_classical(const TestFunction& f, int N, std::span<const double> x,
                               const TruncationPolicy& policy) {
  const int m = static_cast<int>(x.size());
  if (N < 1) fail(ErrorKind::Usage, "szasz_classical needs N >= 1");
  if (f.arity() != m) fail(ErrorKind::Usage, "test function arity mismatch");
  for (double xj : x)
    if (!(xj > 0.0)) fail(ErrorKind::Domain, "szasz_classical needs x_j > 0, got " + format_vec(x));

  double norm_x = 0.0;
  for (double xj : x) norm_x += xj;
  Vec log_nx(m);
  for (int j = 0; j < m; ++j) log_nx[j] = std::log(static_cast<double>(N) * x[j]);

  detail::WindowSpec spec;
  spec.m = m;
  spec.center = round_center(N, x);
  spec.log_weight = [&](std::span<const long long> a) {
    double lw = -static_cast<double>(N) * norm_x;
    for (int j = 0; j < m; ++j)
      lw += static_cast<double>(a[j]) * log_nx[j] - log_factorial(a[j]);
    return lw;
  };
  spec.f_value = [&](std::span<const long long> a) { return f(lattice_arg(N, a)); };
  detail::WindowSum s = detail::windowed_sum(spec, policy, false);

  OperatorResult r;
  r.value = std::exp(s.log_max) * s.sum_fw;
  r.tail_bound = s.tail_rel * std::max(1.0, s.max_abs_f);
  r.window_lo = s.lo;
  r.window_hi = s.hi;
  r.terms = s.terms;
  return r;
}

double bernstein(const TestFunction& f, int N, std::span<const double> x) {
  const int m = static_cast<int>(x.size());
  if (N < 1) fail(ErrorKind::Usage, "bernstein needs N >= 1");
  if (f.arity() != m) fail(ErrorKind::Usage, "test function arity mismatch");
  for (double xj : x)
    if (xj < 0.0 || xj > 1.0)
      fail(ErrorKind::Domain, "bernstein needs x in [0,1]^m, got " + format_vec(x));

  std::vector<long long> k(m, 0);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(std::pow(N + 1.0, m)));
  Vec arg(m);
  for (;;) {
    double lw = 0.0;
    for (int j = 0; j < m; ++j) {
      lw += log_binomial(N, k[j]);
      lw += (k[j] == 0) ? 0.0 : static_cast<double>(k[j]) * std::log(x[j]);
      lw += (k[j] == N) ? 0.0 : static_cast<double>(N - k[j]) * std::log1p(-x[j]);
    }
    for (int j = 0; j < m; ++j) arg[j] = static_cast<double>(k[j]) / N;
    const double fv = f(arg);
    terms.push_back(fv == 0.0 ? 0.0 : fv * std::exp(lw));
    int j = 0;
    while (j < m && k[j] == N) {
      k[j] = 0;
      ++j;
    }
    if (j == m) break;
    ++k[j];
  }
  return pairwise_sum(terms);
}

OperatorResult pascal_disk(const TestFunction& f, int N, double x, const TruncationPolicy& policy,
                           PascalNormalization normalization) {
  if (N < 2) fail(ErrorKind::Usage, "pascal_disk needs N >= 2");
  if (!(x > 0.0)) fail(ErrorKind::Domain, "pascal_disk needs x > 0");
  if (f.arity() != 1) fail(ErrorKind::Usage, "pascal_disk is one-dimensional");

  const double log_q = std::log(x) - std::log1p(x);
  const double log_pref = -static_cast<double>(N) * std::log1p(x);
  const double lgN = std::lgamma(static_cast<double>(N));

  detail::WindowSpec spec;
  spec.m = 1;
  spec.center = {static_cast<long long>(std::llround(static_cast<double>(N) * x))};
  spec.log_weight = [&](std::span<const long long> a) {
    const double j = static_cast<double>(a[0]);
    return log_pref + std::lgamma(static_cast<double>(N) + j) - lgN - log_factorial(a[0]) +
           j * log_q;
  };
  spec.f_value = [&](std::span<const long long> a) { return f(lattice_arg(N, a)); };
  detail::WindowSum s = detail::windowed_sum(spec, policy, false);

  OperatorResult r;
  r.value = s.sum_fw / s.sum_w;
  if (normalization == PascalNormalization::PaperPrefactor)
    r.value *= (static_cast<double>(N) - 1.0) / (static_cast<double>(N) + 1.0);
  r.tail_bound = 2.0 * s.tail_rel * std::max(1.0, s.max_abs_f);
  r.window_lo = s.lo;
  r.window_hi = s.hi;
  r.terms = s.terms;
  return r;
}

namespace {

struct DualCache {
  double u;
  Vec rho;
  double n_u;        // N * u(x)
  Vec shift;         // -N x
};

double generalized_lw(const DualCache& d, const NormSource& norms, int N,
                      std::span<const long long> alpha) {
  double lw = d.n_u;
  for (std::size_t j = 0; j < d.rho.size(); ++j)
    lw += (static_cast<double>(alpha[j]) + d.shift[j]) * d.rho[j];
  return lw - norms.log_norm(alpha, N);
}

bool has_coupled_facets(const Polytope& p) {
  for (const auto& fct : p.facets()) {
    int nz = 0;
    for (long long v : fct.normal) nz += (v != 0);
    if (nz > 1) return true;
  }
  return false;
}

} // namespace

double generalized_log_weight(const ToricModel& model, const NormSource& norms, int N,
                              std::span<const double> x, std::span<const long long> alpha) {
  if (N < model.min_level())
    fail(ErrorKind::Usage, "model '" + model.name() + "' needs N >= " +
                               std::to_string(model.min_level()));
  if (!model.polytope().strictly_inside(x))
    fail(ErrorKind::Domain, "x must be strictly inside the polytope");
  if (!model.polytope().lattice_contains(N, alpha))
    fail(ErrorKind::Domain, "alpha outside N*P");
  auto [u, rho] = dual_potential(model, x);
  DualCache d{u, rho, static_cast<double>(N) * u, Vec(x.size())};
  for (std::size_t j = 0; j < x.size(); ++j) d.shift[j] = -static_cast<double>(N) * x[j];
  return generalized_lw(d, norms, N, alpha);
}

GeneralizedResult generalized_operator(const ToricModel& model, const TestFunction& f, int N,
                                       std::span<const double> x, const TruncationPolicy& policy,
                                       const NormSource* norms) {
  const int m = model.dimension();
  if (static_cast<int>(x.size()) != m) fail(ErrorKind::Usage, "x dimension mismatch");
  if (f.arity() != m) fail(ErrorKind::Usage, "test function arity mismatch");
  if (N < model.min_level())
    fail(ErrorKind::Usage, "model '" + model.name() + "' needs N >= " +
                               std::to_string(model.min_level()));
  if (!model.polytope().strictly_inside(x))
    fail(ErrorKind::Domain,
         "x = " + format_vec(x) + " must be strictly inside the polytope of '" + model.name() + "'");

  std::optional<ClosedFormNorms> closed;
  if (!norms) {
    if (!model.has_closed_norms())
      fail(ErrorKind::Dependency, "model '" + model.name() +
                                      "' has no closed-form norms; pass a quadrature norm source");
    closed.emplace(model);
    norms = &*closed;
  }

  auto [u, rho] = dual_potential(model, x);
  DualCache d{u, rho, static_cast<double>(N) * u, Vec(x.size())};
  for (std::size_t j = 0; j < x.size(); ++j) d.shift[j] = -static_cast<double>(N) * x[j];

  detail::WindowSpec spec;
  spec.m = m;
  spec.center = round_center(N, x);
  std::vector<long long> center_copy = spec.center;
  spec.axis_bounds = [&model, N, &center_copy](int axis) {
    return model.polytope().lattice_axis_range(N, center_copy, axis);
  };
  spec.log_weight = [&](std::span<const long long> a) { return generalized_lw(d, *norms, N, a); };
  spec.f_value = [&](std::span<const long long> a) { return f(lattice_arg(N, a)); };
  if (has_coupled_facets(model.polytope()))
    spec.member = [&model, N](std::span<const long long> a) {
      return model.polytope().lattice_contains(N, a);
    };

  detail::WindowSum s = detail::windowed_sum(spec, policy, true);

  GeneralizedResult r;
  r.value = s.sum_fw / s.sum_w;
  r.tail_bound = 2.0 * s.tail_rel * std::max(1.0, s.max_abs_f);
  r.table.model = model.name();
  r.table.N = N;
  r.table.x.assign(x.begin(), x.end());
  r.table.entries = std::move(s.entries);
  r.table.normalizer = std::exp(s.log_max) * s.sum_w;
  r.table.window_lo = s.lo;
  r.table.window_hi = s.hi;
  r.table.tail_bound = s.tail_rel;
  return r;
}

std::string LatticeWeightTable::to_csv() const {
  nlohmann::json header;
  header["model"] = model;
  header["N"] = N;
  header["x"] = x;
  header["normalizer"] = normalizer;
  header["truncation_radius"] = nlohmann::json::array();
  for (std::size_t j = 0; j < window_lo.size(); ++j)
    header["truncation_radius"].push_back(window_hi[j] - window_lo[j]);
  header["tail_bound"] = tail_bound;

  std::ostringstream os;
  os << "# " << header.dump() << "\n";
  for (std::size_t j = 0; j < window_lo.size(); ++j) os << "alpha" << (j + 1) << ",";
  os << "log_weight\n";
  os.precision(17);
  for (const auto& e : entries) {
    for (long long a : e.alpha) os << a << ",";
    os << e.log_weight << "\n";
  }
  return os.str();
}

} // namespace szaszlab
