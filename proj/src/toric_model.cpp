#include "toric_model.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "error.hpp"
#include "expr.hpp"
#include "logspace.hpp"

namespace szaszlab {

namespace {

double xlogx(double x) { return x > 0 ? x * std::log(x) : 0.0; }

// Stable softplus pieces for the Fubini-Study potential.
double softplus(double r) { return r > 36 ? r + std::log1p(std::exp(-r)) : std::log1p(std::exp(r)); }
double sigmoid(double r) { return r > 0 ? 1.0 / (1.0 + std::exp(-r)) : std::exp(r) / (1.0 + std::exp(r)); }

} // namespace

struct ToricModel::Builder {
  std::shared_ptr<ToricModel> m = std::make_shared<ToricModel>();
  ModelPtr done() { return m; }
};

bool ToricModel::rho_in_domain(std::span<const double> rho) const {
  if (static_cast<int>(rho.size()) != dim_) fail(ErrorKind::Usage, "rho dimension mismatch");
  return domain_check_ ? domain_check_(rho) : true;
}

std::string ToricModel::rho_domain_violation(std::span<const double> rho) const {
  if (domain_kind_ == RhoDomainKind::UnitBallExp) {
    double s = 0.0;
    for (double r : rho) s += std::exp(r);
    std::ostringstream os;
    os << "sum(exp(rho_j)) = " << s << " must be < 1";
    return os.str();
  }
  if (domain_kind_ == RhoDomainKind::PerFactor) return "a factor's rho-domain constraint fails";
  return "unconstrained";
}

double ToricModel::phi(std::span<const double> rho) const { return phi_(rho); }
Vec ToricModel::grad_phi(std::span<const double> rho) const { return grad_phi_(rho); }
Mat ToricModel::hess_phi(std::span<const double> rho) const { return hess_phi_(rho); }

double ToricModel::closed_log_norm(std::span<const long long> alpha, int N) const {
  if (!closed_log_norm_) fail(ErrorKind::Dependency, "model '" + name_ + "' has no closed-form norms");
  return closed_log_norm_(alpha, N);
}

std::optional<double> ToricModel::closed_kernel_diag(int N) const {
  if (!closed_kernel_) return std::nullopt;
  return closed_kernel_(N);
}

std::optional<double> ToricModel::stated_kernel_diag(int N) const {
  if (!stated_kernel_) return std::nullopt;
  return stated_kernel_(N);
}

double ToricModel::closed_u(std::span<const double> x) const {
  if (!closed_u_) fail(ErrorKind::Dependency, "model '" + name_ + "' has no closed symplectic potential");
  return closed_u_(x);
}

Vec ToricModel::closed_grad_u(std::span<const double> x) const { return closed_grad_u_(x); }
Mat ToricModel::closed_hess_u(std::span<const double> x) const { return closed_hess_u_(x); }

std::optional<Vec> ToricModel::initial_rho_guess(std::span<const double> x) const {
  if (!init_guess_) return std::nullopt;
  return init_guess_(x);
}

// Built-in models ------------------------------------------------------------

ModelPtr ToricModel::bargmann_fock() {
  Builder b;
  ToricModel& m = *b.m;
  m.name_ = "bargmann-fock";
  m.dim_ = 1;
  m.polytope_ = Polytope::orthant(1);
  m.domain_kind_ = RhoDomainKind::AllSpace;
  m.phi_ = [](std::span<const double> r) { return std::exp(r[0]); };
  m.grad_phi_ = [](std::span<const double> r) { return Vec{std::exp(r[0])}; };
  m.hess_phi_ = [](std::span<const double> r) {
    Mat h(1, 1);
    h(0, 0) = std::exp(r[0]);
    return h;
  };
  m.closed_log_norm_ = [](std::span<const long long> a, int N) {
    return log_factorial(a[0]) - (1.0 + static_cast<double>(a[0])) * std::log(static_cast<double>(N));
  };
  m.closed_kernel_ = [](int N) { return static_cast<double>(N); };
  m.closed_u_ = [](std::span<const double> x) { return xlogx(x[0]) - x[0]; };
  m.closed_grad_u_ = [](std::span<const double> x) { return Vec{std::log(x[0])}; };
  m.closed_hess_u_ = [](std::span<const double> x) {
    Mat g(1, 1);
    g(0, 0) = 1.0 / x[0];
    return g;
  };
  m.init_guess_ = [](std::span<const double> x) { return Vec{std::log(x[0])}; };
  return b.done();
}

ModelPtr ToricModel::fubini_study_cp1() {
  Builder b;
  ToricModel& m = *b.m;
  m.name_ = "fubini-study-cp1";
  m.dim_ = 1;
  m.polytope_ = Polytope::unit_interval();
  m.domain_kind_ = RhoDomainKind::AllSpace;
  m.phi_ = [](std::span<const double> r) { return softplus(r[0]); };
  m.grad_phi_ = [](std::span<const double> r) { return Vec{sigmoid(r[0])}; };
  m.hess_phi_ = [](std::span<const double> r) {
    const double s = sigmoid(r[0]);
    Mat h(1, 1);
    h(0, 0) = s * (1.0 - s);
    return h;
  };
  m.closed_log_norm_ = [](std::span<const long long> a, int N) {
    if (a[0] < 0 || a[0] > N) fail(ErrorKind::Usage, "monomial outside N*P for fubini-study-cp1");
    return log_factorial(a[0]) + log_factorial(N - a[0]) - log_factorial(N + 1);
  };
  m.closed_kernel_ = [](int N) { return static_cast<double>(N) + 1.0; };
  m.closed_u_ = [](std::span<const double> x) {
    return xlogx(x[0]) + (1.0 - x[0]) * std::log1p(-x[0]);
  };
  m.closed_grad_u_ = [](std::span<const double> x) {
    return Vec{std::log(x[0]) - std::log1p(-x[0])};
  };
  m.closed_hess_u_ = [](std::span<const double> x) {
    Mat g(1, 1);
    g(0, 0) = 1.0 / (x[0] * (1.0 - x[0]));
    return g;
  };
  m.init_guess_ = [](std::span<const double> x) {
    return Vec{std::log(x[0]) - std::log1p(-x[0])};
  };
  return b.done();
}

ModelPtr ToricModel::bergman_ball_1() {
  Builder b;
  ToricModel& m = *b.m;
  m.name_ = "bergman-ball-1";
  m.dim_ = 1;
  m.polytope_ = Polytope::orthant(1);
  m.domain_kind_ = RhoDomainKind::UnitBallExp;
  m.min_level_ = 2;
  m.domain_check_ = [](std::span<const double> r) { return std::exp(r[0]) < 1.0; };
  m.phi_ = [](std::span<const double> r) { return -std::log1p(-std::exp(r[0])); };
  m.grad_phi_ = [](std::span<const double> r) {
    const double t = std::exp(r[0]);
    return Vec{t / (1.0 - t)};
  };
  m.hess_phi_ = [](std::span<const double> r) {
    const double t = std::exp(r[0]);
    Mat h(1, 1);
    h(0, 0) = t / ((1.0 - t) * (1.0 - t));
    return h;
  };
  m.closed_log_norm_ = [](std::span<const long long> a, int N) {
    if (N < 2) fail(ErrorKind::Usage, "bergman-ball-1 needs N >= 2");
    return log_factorial(a[0]) + std::lgamma(static_cast<double>(N) - 1.0) -
           std::lgamma(static_cast<double>(N) + static_cast<double>(a[0]));
  };
  // The kernel sum consistent with these norms is N - 1; the symmetric-space
  // value (N+m)!/N! = N + 1 is kept as the stated alternative and the two are
  // reported side by side wherever the kernel diagonal appears.
  m.closed_kernel_ = [](int N) { return static_cast<double>(N) - 1.0; };
  m.stated_kernel_ = [](int N) { return static_cast<double>(N) + 1.0; };
  m.closed_u_ = [](std::span<const double> x) {
    return xlogx(x[0]) - (1.0 + x[0]) * std::log1p(x[0]);
  };
  m.closed_grad_u_ = [](std::span<const double> x) {
    return Vec{std::log(x[0]) - std::log1p(x[0])};
  };
  m.closed_hess_u_ = [](std::span<const double> x) {
    Mat g(1, 1);
    g(0, 0) = 1.0 / x[0] - 1.0 / (1.0 + x[0]);
    return g;
  };
  m.init_guess_ = [](std::span<const double> x) {
    return Vec{std::log(x[0]) - std::log1p(x[0])};
  };
  return b.done();
}

ModelPtr ToricModel::product_of(ModelPtr a, ModelPtr b) {
  if (!a || !b) fail(ErrorKind::Usage, "product of null models");
  Builder bl;
  ToricModel& m = *bl.m;
  const int da = a->dimension(), db = b->dimension();
  m.name_ = "product:" + a->name() + "x" + b->name();
  m.dim_ = da + db;
  m.polytope_ = Polytope::product(a->polytope(), b->polytope());
  m.domain_kind_ = RhoDomainKind::PerFactor;
  m.min_level_ = std::max(a->min_level(), b->min_level());
  m.factors_ = {a, b};
  m.domain_check_ = [a, b, da, db](std::span<const double> r) {
    return a->rho_in_domain(r.subspan(0, da)) && b->rho_in_domain(r.subspan(da, db));
  };
  m.phi_ = [a, b, da, db](std::span<const double> r) {
    return a->phi(r.subspan(0, da)) + b->phi(r.subspan(da, db));
  };
  m.grad_phi_ = [a, b, da, db](std::span<const double> r) {
    Vec ga = a->grad_phi(r.subspan(0, da));
    Vec gb = b->grad_phi(r.subspan(da, db));
    ga.insert(ga.end(), gb.begin(), gb.end());
    return ga;
  };
  m.hess_phi_ = [a, b, da, db](std::span<const double> r) {
    Mat ha = a->hess_phi(r.subspan(0, da));
    Mat hb = b->hess_phi(r.subspan(da, db));
    Mat h(da + db, da + db, 0.0);
    for (int i = 0; i < da; ++i)
      for (int j = 0; j < da; ++j) h(i, j) = ha(i, j);
    for (int i = 0; i < db; ++i)
      for (int j = 0; j < db; ++j) h(da + i, da + j) = hb(i, j);
    return h;
  };
  if (a->has_closed_norms() && b->has_closed_norms()) {
    m.closed_log_norm_ = [a, b, da, db](std::span<const long long> al, int N) {
      return a->closed_log_norm(al.subspan(0, da), N) + b->closed_log_norm(al.subspan(da, db), N);
    };
  }
  if (a->closed_kernel_diag(2) && b->closed_kernel_diag(2)) {
    m.closed_kernel_ = [a, b](int N) { return *a->closed_kernel_diag(N) * *b->closed_kernel_diag(N); };
  }
  if (a->has_closed_dual() && b->has_closed_dual()) {
    m.closed_u_ = [a, b, da, db](std::span<const double> x) {
      return a->closed_u(x.subspan(0, da)) + b->closed_u(x.subspan(da, db));
    };
    m.closed_grad_u_ = [a, b, da, db](std::span<const double> x) {
      Vec ga = a->closed_grad_u(x.subspan(0, da));
      Vec gb = b->closed_grad_u(x.subspan(da, db));
      ga.insert(ga.end(), gb.begin(), gb.end());
      return ga;
    };
    m.closed_hess_u_ = [a, b, da, db](std::span<const double> x) {
      Mat ga = a->closed_hess_u(x.subspan(0, da));
      Mat gb = b->closed_hess_u(x.subspan(da, db));
      Mat g(da + db, da + db, 0.0);
      for (int i = 0; i < da; ++i)
        for (int j = 0; j < da; ++j) g(i, j) = ga(i, j);
      for (int i = 0; i < db; ++i)
        for (int j = 0; j < db; ++j) g(da + i, da + j) = gb(i, j);
      return g;
    };
  }
  m.init_guess_ = [a, b, da, db](std::span<const double> x) {
    Vec ra = a->initial_rho_guess(x.subspan(0, da)).value_or(Vec(da, 0.0));
    Vec rb = b->initial_rho_guess(x.subspan(da, db)).value_or(Vec(db, 0.0));
    ra.insert(ra.end(), rb.begin(), rb.end());
    return ra;
  };
  return bl.done();
}

ModelPtr ToricModel::from_json(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    fail(ErrorKind::Usage, std::string("invalid model JSON: ") + e.what());
  }
  if (!doc.contains("dimension") || !doc.contains("phi") || !doc.contains("facets"))
    fail(ErrorKind::Usage, "model JSON needs 'dimension', 'phi' and 'facets'");
  const int dim = doc.at("dimension").get<int>();
  if (dim < 1 || dim > 3) fail(ErrorKind::Usage, "custom models support dimension 1..3");

  std::vector<std::string> vars;
  for (int j = 0; j < dim; ++j) vars.push_back("rho" + std::to_string(j + 1));
  std::string phi_text = doc.at("phi").get<std::string>();
  if (dim == 1) {
    // allow the bare name "rho" in one dimension
    std::string canon;
    std::size_t i = 0;
    while (i < phi_text.size()) {
      if (std::isalpha(static_cast<unsigned char>(phi_text[i]))) {
        std::size_t s = i;
        while (i < phi_text.size() && (std::isalnum(static_cast<unsigned char>(phi_text[i])) || phi_text[i] == '_')) ++i;
        std::string name = phi_text.substr(s, i - s);
        canon += (name == "rho") ? "rho1" : name;
      } else {
        canon += phi_text[i++];
      }
    }
    phi_text = canon;
  }
  expr::Expression phi = expr::Expression::parse(phi_text, vars);
  auto grads = std::make_shared<std::vector<expr::Expression>>();
  auto hesses = std::make_shared<std::vector<expr::Expression>>(); // row major dim x dim
  for (int i = 0; i < dim; ++i) grads->push_back(phi.derivative(i));
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) hesses->push_back((*grads)[i].derivative(j));

  std::vector<Facet> facets;
  for (const auto& f : doc.at("facets")) {
    Facet fc;
    for (const auto& v : f.at("normal")) fc.normal.push_back(v.get<long long>());
    fc.offset = f.at("offset").get<double>();
    facets.push_back(std::move(fc));
  }
  Polytope  poly(dim, std::move(facets));
  if (doc.contains("unbounded") && doc.at("unbounded").get<bool>() != poly.is_unbounded())
    fail(ErrorKind::Usage, "model JSON 'unbounded' flag disagrees with the facet system");

  std::string domain = doc.value("rho_domain", std::string("all"));
  Builder b;
  ToricModel& m = *b.m;
  m.name_ = doc.value("name", std::string("custom"));
  m.dim_ = dim;
  m.polytope_ = std::move(poly);
  m.min_level_ = doc.value("min_level", 1);
  if (domain == "all") {
    m.domain_kind_ = RhoDomainKind::AllSpace;
  } else if (domain == "ball") {
    m.domain_kind_ = RhoDomainKind::UnitBallExp;
    m.domain_check_ = [dim](std::span<const double> r) {
      double s = 0.0;
      for (double v : r) s += std::exp(v);
      return s < 1.0;
    };
  } else {
    fail(ErrorKind::Usage, "rho_domain must be 'all' or 'ball'");
  }
  m.phi_ = [phi](std::span<const double> r) { return phi.eval(r); };
  m.grad_phi_ = [grads, dim](std::span<const double> r) {
    Vec g(dim);
    for (int i = 0; i < dim; ++i) g[i] = (*grads)[i].eval(r);
    return g;
  };
  m.hess_phi_ = [hesses, dim](std::span<const double> r) {
    Mat h(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) h(i, j) = (*hesses)[i * dim + j].eval(r);
    return h;
  };
  return b.done();
}

namespace {

bool is_atomic_name(const std::string& n) {
  return n == "bargmann-fock" || n == "fubini-study-cp1" || n == "bergman-ball-1";
}

ModelPtr open_atomic(const std::string& n) {
  if (n == "bargmann-fock") return ToricModel::bargmann_fock();
  if (n == "fubini-study-cp1") return ToricModel::fubini_study_cp1();
  if (n == "bergman-ball-1") return ToricModel::bergman_ball_1();
  return nullptr;
}

} // namespace

ModelPtr ToricModel::open(const std::string& name) {
  if (ModelPtr m = open_atomic(name)) return m;
  if (name.rfind("product:", 0) == 0) {
    const std::string body = name.substr(8);
    // split at the first 'x' that makes the left part a valid atomic name
    for (std::size_t i = 1; i + 1 < body.size(); ++i) {
      if (body[i] != 'x') continue;
      const std::string left = body.substr(0, i);
      if (!is_atomic_name(left)) continue;
      const std::string right = body.substr(i + 1);
      ModelPtr a = open_atomic(left);
      ModelPtr b;
      try {
        b = open(right);
      } catch (const Error&) {
        continue;
      }
      return product_of(a, b);
    }
    fail(ErrorKind::Usage, "cannot parse product model name '" + name + "'");
  }
  fail(ErrorKind::Usage, "unknown model '" + name + "'; see `models` for the registry");
}

std::vector<std::string> ToricModel::registry_names() {
  return {"bargmann-fock", "fubini-study-cp1", "bergman-ball-1", "product:<a>x<b>"};
}

// Operations -----------------------------------------------------------------

Vec moment_map(const ToricModel& model, std::span<const double> rho) {
  if (!model.rho_in_domain(rho))
    fail(ErrorKind::Domain,
         "rho outside rho-domain of '" + model.name() + "': " + model.rho_domain_violation(rho));
  return model.grad_phi(rho);
}

namespace {

double residual_norm(const Vec& f) {
  double m = 0.0;
  for (double v : f) m = std::max(m, std::fabs(v));
  return m;
}

// Core Newton solve for grad_phi(rho) = x; returns rho only.
Vec newton_solve(const ToricModel& model, std::span<const double> x, const LegendreOptions& opt) {
  const int m = model.dimension();
  if (!model.polytope().strictly_inside(x))
    fail(ErrorKind::Domain, "point " + format_vec(x) + " is not strictly inside the polytope of '" +
                                model.name() + "'");
  Vec rho;
  if (opt.initial_rho) rho = *opt.initial_rho;
  else if (auto g = model.initial_rho_guess(x)) rho = *g;
  else {
    // centroid-shifted start; for ball-type domains begin well inside
    rho.assign(m, model.rho_domain_kind() == ToricModel::RhoDomainKind::UnitBallExp
                      ? std::log(0.5 / m)
                      : 0.0);
  }
  if (!model.rho_in_domain(rho)) fail(ErrorKind::Domain, "initial rho outside rho-domain");

  auto scaled_ok = [&](const Vec& f) {
    for (int j = 0; j < m; ++j)
      if (std::fabs(f[j]) > opt.tol * std::max(1.0, std::fabs(x[j]))) return false;
    return true;
  };

  Vec f = model.grad_phi(rho);
  for (int j = 0; j < m; ++j) f[j] -= x[j];
  double fn = residual_norm(f);
  for (int it = 0; it < opt.max_iter; ++it) {
    if (scaled_ok(f)) {
      // one polishing step; keep it only if it improves the residual
      Mat h = model.hess_phi(rho);
      Vec neg(f.size());
      for (std::size_t j = 0; j < f.size(); ++j) neg[j] = -f[j];
      Vec step = h.solve(neg);
      Vec trial = rho;
      for (int j = 0; j < m; ++j) trial[j] += step[j];
      if (model.rho_in_domain(trial)) {
        Vec ft = model.grad_phi(trial);
        for (int j = 0; j < m; ++j) ft[j] -= x[j];
        if (residual_norm(ft) < fn) rho = trial;
      }
      return rho;
    }
    Mat h = model.hess_phi(rho);
    Vec neg(f.size());
    for (std::size_t j = 0; j < f.size(); ++j) neg[j] = -f[j];
    Vec step = h.solve(neg);
    double damping = 1.0;
    bool moved = false;
    for (int halve = 0; halve < 60; ++halve) {
      Vec trial = rho;
      for (int j = 0; j < m; ++j) trial[j] += damping * step[j];
      if (model.rho_in_domain(trial)) {
        Vec ft = model.grad_phi(trial);
        for (int j = 0; j < m; ++j) ft[j] -= x[j];
        const double fnt = residual_norm(ft);
        if (fnt < fn || damping < 1e-12) {
          rho = std::move(trial);
          f = std::move(ft);
          fn = fnt;
          moved = true;
          break;
        }
      }
      damping *= 0.5;
    }
    if (!moved)
      fail(ErrorKind::Convergence, "Newton step stalled for '" + model.name() + "' at x = " +
                                       format_vec(x) + ", residual " + std::to_string(fn));
  }
  fail(ErrorKind::Convergence, "Newton did not converge for '" + model.name() + "' at x = " +
                                   format_vec(x) + " after max iterations; last residual " +
                                   std::to_string(fn));
}

// Central differences of rho(x) with one Richardson refinement; rho is the
// gradient of u, so this is the Hessian of u without second differencing.
Mat numeric_hess_u(const ToricModel& model, std::span<const double> x) {
  const int m = model.dimension();
  const Polytope& p = model.polytope();
  auto rho_at = [&](const Vec& pt) { return newton_solve(model, pt, LegendreOptions{}); };
  auto diff_at = [&](double delta) {
    Mat g(m, m);
    for (int j = 0; j < m; ++j) {
      Vec xp(x.begin(), x.end()), xm(x.begin(), x.end());
      xp[j] += delta;
      xm[j] -= delta;
      if (!p.strictly_inside(xp) || !p.strictly_inside(xm))
        fail(ErrorKind::Domain, "Hessian stencil leaves the polytope at " + format_vec(x));
      Vec rp = rho_at(xp), rm = rho_at(xm);
      for (int i = 0; i < m; ++i) g(i, j) = (rp[i] - rm[i]) / (2 * delta);
    }
    return g;
  };
  double delta = 1e-5;
  for (int j = 0; j < m; ++j) delta = std::max(delta, 1e-5 * std::fabs(x[j]));
  for (std::size_t r = 0; r < p.facets().size(); ++r) {
    const double lr = p.facet_value(r, x);
    double nn = 0.0;
    for (long long v : p.facets()[r].normal) nn = std::max(nn, std::fabs(static_cast<double>(v)));
    if (nn > 0) delta = std::min(delta, 0.25 * lr / nn);
  }
  Mat d1 = diff_at(delta), d2 = diff_at(delta / 2);
  Mat g(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) g(i, j) = (4 * d2(i, j) - d1(i, j)) / 3.0;
  // symmetrize; the differencing breaks exact symmetry at roundoff level
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const double v = 0.5 * (g(i, j) + g(j, i));
      g(i, j) = g(j, i) = v;
    }
  return g;
}

} // namespace

DualPoint legendre_invert(const ToricModel& model, std::span<const double> x,
                          const LegendreOptions& options) {
  DualPoint d;
  d.x.assign(x.begin(), x.end());
  d.rho = newton_solve(model, x, options);
  d.u_value = -model.phi(d.rho);
  for (std::size_t j = 0; j < d.rho.size(); ++j) d.u_value += x[j] * d.rho[j];
  d.grad_u = d.rho;
  d.hessian_G = model.has_closed_dual() ? model.closed_hess_u(x) : numeric_hess_u(model, x);
  d.hessian_H = model.hess_phi(d.rho);
  if (!d.hessian_G.is_positive_definite() || !d.hessian_H.is_positive_definite())
    fail(ErrorKind::Numeric, "indefinite numerical Hessian at x = " + format_vec(x));
  return d;
}

double symplectic_potential(const ToricModel& model, std::span<const double> x) {
  Vec rho = newton_solve(model, x, LegendreOptions{});
  double u = -model.phi(rho);
  for (std::size_t j = 0; j < rho.size(); ++j) u += x[j] * rho[j];
  return u;
}

double canonical_potential(const Polytope& polytope, std::span<const double> x) {
  double u0 = 0.0;
  for (std::size_t r = 0; r < polytope.facets().size(); ++r) {
    const double l = polytope.facet_value(r, x);
    if (l <= 0.0)
      fail(ErrorKind::Domain, "facet " + std::to_string(r) + " violated: ell_r(x) = " +
                                  std::to_string(l) + " at x = " + format_vec(x));
    u0 += l * std::log(l);
  }
  return u0;
}

std::pair<double, Vec> dual_potential(const ToricModel& model, std::span<const double> x) {
  if (model.has_closed_dual()) return {model.closed_u(x), model.closed_grad_u(x)};
  Vec rho = newton_solve(model, x, LegendreOptions{});
  double u = -model.phi(rho);
  for (std::size_t j = 0; j < rho.size(); ++j) u += x[j] * rho[j];
  return {u, std::move(rho)};
}

std::pair<Mat, Mat> hessians(const ToricModel& model, std::span<const double> x) {
  Mat g = model.has_closed_dual() ? model.closed_hess_u(x) : numeric_hess_u(model, x);
  Vec rho = newton_solve(model, x, LegendreOptions{});
  Mat h = model.hess_phi(rho);
  if (!g.is_positive_definite() || !h.is_positive_definite())
    fail(ErrorKind::Numeric, "indefinite numerical Hessian at x = " + format_vec(x));
  return {std::move(g), std::move(h)};
}

SmoothRemainder smooth_remainder(const ToricModel& model) {
  const int m = model.dimension();
  auto h_eval = [&model](std::span<const double> x) {
    auto [u, rho] = dual_potential(model, x);
    double s = u;
    for (double xi : x) s -= xlogx(xi);
    return s;
  };

  SmoothRemainder out;
  out.h = [model_name = model.name(), h_eval](std::span<const double> x) { return h_eval(x); };

  // Product models assemble block-diagonally from their factors.
  if (!model.factors().empty()) {
    const auto& fs = model.factors();
    SmoothRemainder a = smooth_remainder(*fs[0]);
    SmoothRemainder b = smooth_remainder(*fs[1]);
    const int da = fs[0]->dimension(), db = fs[1]->dimension();
    out.h0 = a.h0 + b.h0;
    out.grad0 = a.grad0;
    out.grad0.insert(out.grad0.end(), b.grad0.begin(), b.grad0.end());
    out.hess0 = Mat(m, m, 0.0);
    for (int i = 0; i < da; ++i)
      for (int j = 0; j < da; ++j) out.hess0(i, j) = a.hess0(i, j);
    for (int i = 0; i < db; ++i)
      for (int j = 0; j < db; ++j) out.hess0(da + i, da + j) = b.hess0(i, j);
    return out;
  }

  // One-sided limits at the vertex: per-axis cubic fits through the nodes
  // {delta, 2 delta} taken over delta in {1e-2, 5e-3, 2.5e-3} (union
  // {2.5e-3, 5e-3, 1e-2, 2e-2}); mixed entries use cross differences over
  // {delta, 2 delta}^2 with two Richardson eliminations.
  const double d0 = 2.5e-3;
  const Vec scales{1.0, 2.0, 4.0, 8.0};
  // Off-axis coordinates sit at d0 so every stencil point stays interior;
  // product models never reach this path, so the O(d0) anchor bias only
  // affects custom non-product models.
  const double anchor = (m > 1) ? d0 : 0.0;

  auto point = [&](int axis, double t, int axis2 = -1, double t2 = 0.0) {
    Vec x(m, anchor);
    x[axis] = t;
    if (axis2 >= 0) x[axis2] = t2;
    if (!model.polytope().strictly_inside(x))
      fail(ErrorKind::Domain, "smooth-remainder stencil leaves the polytope at " + format_vec(x));
    return x;
  };

  out.grad0.assign(m, 0.0);
  out.hess0 = Mat(m, m, 0.0);
  double h0_acc = 0.0;
  for (int axis = 0; axis < m; ++axis) {
    Mat v(4, 4);
    Vec y(4);
    for (int i = 0; i < 4; ++i) {
      const double s = scales[i];
      v(i, 0) = 1.0;
      v(i, 1) = s;
      v(i, 2) = s * s;
      v(i, 3) = s * s * s;
      y[i] = h_eval(point(axis, s * d0));
    }
    Vec c = v.solve(y);
    h0_acc += c[0];
    out.grad0[axis] = c[1] / d0;
    out.hess0(axis, axis) = 2.0 * c[2] / (d0 * d0);
  }
  out.h0 = h0_acc / m;

  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      auto cross = [&](double delta) {
        const double h11 = h_eval(point(i, delta, j, delta));
        const double h12 = h_eval(point(i, delta, j, 2 * delta));
        const double h21 = h_eval(point(i, 2 * delta, j, delta));
        const double h22 = h_eval(point(i, 2 * delta, j, 2 * delta));
        return (h11 - h12 - h21 + h22) / (delta * delta);
      };
      const double c1 = cross(1e-2), c2 = cross(5e-3), c3 = cross(2.5e-3);
      const double a1 = 2 * c2 - c1, a2 = 2 * c3 - c2;
      const double value = (4 * a2 - a1) / 3.0;
      out.hess0(i, j) = out.hess0(j, i) = value;
    }
  }
  return out;
}

} // namespace szaszlab
