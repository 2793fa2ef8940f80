#include "test_function.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>

#include "error.hpp"
#include "expr.hpp"

namespace szaszlab {

struct TestFunction::Impl {
  int arity = 0;
  std::string tag;
  std::optional<SupportBox> support;
  std::function<double(std::span<const double>)> eval; // raw, inside support
  std::function<double(std::span<const int>, std::span<const double>)> deriv; // may be empty
};

namespace {

bool in_box(const SupportBox& box, std::span<const double> t) {
  for (std::size_t j = 0; j < t.size(); ++j)
    if (t[j] < box.lo[j] || t[j] > box.hi[j]) return false;
  return true;
}

int total_order(std::span<const int> multi) {
  int s = 0;
  for (int k : multi) s += k;
  return s;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> axis_vars(int arity) {
  // t1..tm always; in 1-D "t" aliases t1, in 2-D (s, t) alias (t1, t2).
  std::vector<std::string> vars;
  for (int j = 0; j < arity; ++j) vars.push_back("t" + std::to_string(j + 1));
  return vars;
}

struct ExprSet {
  // All partial derivatives up to total order 4, keyed by multi-index.
  std::map<std::vector<int>, expr::Expression> table;
};

std::shared_ptr<ExprSet> build_derivatives(const expr::Expression& f, int arity) {
  auto set = std::make_shared<ExprSet>();
  std::vector<int> zero(arity, 0);
  set->table[zero] = f;
  // Breadth-first differentiation; each level adds one derivative order.
  std::vector<std::vector<int>> frontier{zero};
  for (int order = 1; order <= 4; ++order) {
    std::vector<std::vector<int>> next;
    for (const auto& m : frontier) {
      for (int j = 0; j < arity; ++j) {
        std::vector<int> key = m;
        key[j] += 1;
        if (set->table.count(key)) continue;
        set->table[key] = set->table.at(m).derivative(j);
        next.push_back(key);
      }
    }
    frontier = std::move(next);
  }
  return set;
}

// Rewrites common aliases into canonical t1.. names before parsing.
std::string canonicalize_vars(const std::string& text, int arity) {
  std::string out;
  out.reserve(text.size() + 8);
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = i;
      while (i < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_'))
        ++i;
      std::string name = text.substr(start, i - start);
      if (name == "t" && arity == 1) name = "t1";
      else if (name == "x" && arity == 1) name = "t1";
      else if (name == "s" && arity == 2) name = "t1";
      else if (name == "t" && arity == 2) name = "t2";
      out += name;
    } else {
      out += c;
      ++i;
    }
  }
  return out;
}

} // namespace

int TestFunction::arity() const { return impl_ ? impl_->arity : 0; }
const std::string& TestFunction::tag() const {
  static const std::string empty;
  return impl_ ? impl_->tag : empty;
}
const std::optional<SupportBox>& TestFunction::support() const {
  static const std::optional<SupportBox> none;
  return impl_ ? impl_->support : none;
}
bool TestFunction::has_derivatives() const { return impl_ && static_cast<bool>(impl_->deriv); }
bool TestFunction::valid() const { return static_cast<bool>(impl_); }

double TestFunction::operator()(std::span<const double> t) const {
  if (!impl_) fail(ErrorKind::Usage, "empty test function");
  if (static_cast<int>(t.size()) != impl_->arity)
    fail(ErrorKind::Usage, "test function arity mismatch");
  if (impl_->support && !in_box(*impl_->support, t)) return 0.0;
  return impl_->eval(t);
}

double TestFunction::derivative(std::span<const int> multi, std::span<const double> t) const {
  if (!impl_) fail(ErrorKind::Usage, "empty test function");
  if (!impl_->deriv)
    fail(ErrorKind::Dependency, "test function '" + impl_->tag + "' has no derivative data");
  if (static_cast<int>(multi.size()) != impl_->arity)
    fail(ErrorKind::Usage, "derivative multi-index arity mismatch");
  if (total_order(multi) > 4)
    fail(ErrorKind::Usage, "derivative order above 4 is not supported");
  if (impl_->support && !in_box(*impl_->support, t)) return 0.0;
  return impl_->deriv(multi, t);
}

namespace {

// Central-difference self check of the supplied derivatives (orders 1 and 2).
void self_check(const TestFunction::Impl& impl) {
  if (!impl.deriv) return;
  Vec probe(impl.arity, 1.0);
  if (impl.support) {
    for (int j = 0; j < impl.arity; ++j)
      probe[j] = 0.5 * (impl.support->lo[j] + impl.support->hi[j]);
  }
  auto eval_at = [&](const Vec& p) { return impl.eval(p); };
  for (int j = 0; j < impl.arity; ++j) {
    const double h = 1e-4 * std::max(1.0, std::fabs(probe[j]));
    Vec pp = probe, pm = probe;
    pp[j] += h;
    pm[j] -= h;
    if (impl.support && (!in_box(*impl.support, pp) || !in_box(*impl.support, pm))) continue;
    double f0, fp, fm;
    try {
      f0 = eval_at(probe);
      fp = eval_at(pp);
      fm = eval_at(pm);
    } catch (const Error&) {
      continue; // probe outside the expression's natural domain
    }
    std::vector<int> m1(impl.arity, 0), m2(impl.arity, 0);
    m1[j] = 1;
    m2[j] = 2;
    const double d1 = impl.deriv(m1, probe);
    const double d2 = impl.deriv(m2, probe);
    const double fd1 = (fp - fm) / (2 * h);
    const double fd2 = (fp - 2 * f0 + fm) / (h * h);
    const double s1 = std::max({1.0, std::fabs(d1), std::fabs(fd1)});
    const double s2 = std::max({1.0, std::fabs(d2), std::fabs(fd2)});
    if (std::fabs(d1 - fd1) > 1e-5 * s1 || std::fabs(d2 - fd2) > 1e-5 * s2)
      fail(ErrorKind::Numeric,
           "derivative self-check failed for test function '" + impl.tag + "' on axis " +
               std::to_string(j + 1));
  }
}

TestFunction finish(std::shared_ptr<TestFunction::Impl> impl) {
  self_check(*impl);
  struct Access : TestFunction {
    explicit Access(std::shared_ptr<const Impl> i) : TestFunction(std::move(i)) {}
  };
  return Access(std::move(impl));
}

} // namespace

TestFunction TestFunction::constant(int arity, double value) {
  auto impl = std::make_shared<Impl>();
  impl->arity = arity;
  impl->tag = "constant";
  impl->eval = [value](std::span<const double>) { return value; };
  impl->deriv = [value](std::span<const int> multi, std::span<const double>) {
    return total_order(multi) == 0 ? value : 0.0;
  };
  return finish(std::move(impl));
}

TestFunction TestFunction::from_expression(const std::string& text, int arity,
                                           std::optional<SupportBox> support) {
  if (arity < 1 || arity > 3)
    fail(ErrorKind::Usage, "expression test functions support arity 1..3");
  const std::string canon = canonicalize_vars(text, arity);
  expr::Expression f = expr::Expression::parse(canon, axis_vars(arity));
  auto derivs = build_derivatives(f, arity);
  auto impl = std::make_shared<Impl>();
  impl->arity = arity;
  impl->tag = text;
  impl->support = std::move(support);
  impl->eval = [f](std::span<const double> t) { return f.eval(t); };
  impl->deriv = [derivs](std::span<const int> multi, std::span<const double> t) {
    std::vector<int> key(multi.begin(), multi.end());
    return derivs->table.at(key).eval(t);
  };
  return finish(std::move(impl));
}

TestFunction TestFunction::monomial(int power) {
  if (power < 0) fail(ErrorKind::Usage, "monomial power must be nonnegative");
  return from_expression("t^" + std::to_string(power), 1);
}

TestFunction TestFunction::gaussian_bump(int arity, Vec center, Vec radius) {
  if (static_cast<int>(center.size()) != arity || static_cast<int>(radius.size()) != arity)
    fail(ErrorKind::Usage, "gaussian bump parameter sizes must match arity");
  // exp(-r^2 / (1 - r^2)) on r < 1, r^2 = sum ((t_j - c_j)/R_j)^2; identically
  // zero outside. All derivatives vanish at the support boundary.
  std::ostringstream r2;
  for (int j = 0; j < arity; ++j) {
    if (j) r2 << " + ";
    r2 << "((t" << (j + 1) << " - " << fmt(center[j]) << ")/" << fmt(radius[j]) << ")^2";
  }
  const std::string r2s = "(" + r2.str() + ")";
  const std::string body = "exp(-" + r2s + "/(1 - " + r2s + "))";
  expr::Expression f = expr::Expression::parse(body, axis_vars(arity));
  auto derivs = build_derivatives(f, arity);

  SupportBox box;
  box.lo.resize(arity);
  box.hi.resize(arity);
  for (int j = 0; j < arity; ++j) {
    box.lo[j] = center[j] - radius[j];
    box.hi[j] = center[j] + radius[j];
  }
  auto r2_of = [center, radius](std::span<const double> t) {
    double s = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) {
      const double u = (t[j] - center[j]) / radius[j];
      s += u * u;
    }
    return s;
  };
  auto impl = std::make_shared<Impl>();
  impl->arity = arity;
  impl->tag = "gaussian-bump";
  impl->support = box;
  impl->eval = [f, r2_of](std::span<const double> t) {
    if (r2_of(t) >= 1.0 - 1e-12) return 0.0;
    return f.eval(t);
  };
  impl->deriv = [derivs, r2_of](std::span<const int> multi, std::span<const double> t) {
    if (r2_of(t) >= 1.0 - 1e-12) return 0.0;
    std::vector<int> key(multi.begin(), multi.end());
    return derivs->table.at(key).eval(t);
  };
  return finish(std::move(impl));
}

namespace {

// k-th derivative of cos(a u)^4 in u, via cos^4 = (3 + 4 cos 2u + cos 4u)/8.
double cos4_deriv(double u, double a, int k) {
  const double shift = k * std::numbers::pi / 2.0;
  const double p2 = std::pow(2.0 * a, k);
  const double p4 = std::pow(4.0 * a, k);
  return (4.0 * p2 * std::cos(2.0 * a * u + shift) + p4 * std::cos(4.0 * a * u + shift)) / 8.0 +
         (k == 0 ? 3.0 / 8.0 : 0.0);
}

} // namespace

TestFunction TestFunction::cosine_window(int arity, Vec center, Vec radius) {
  if (static_cast<int>(center.size()) != arity || static_cast<int>(radius.size()) != arity)
    fail(ErrorKind::Usage, "cosine window parameter sizes must match arity");
  SupportBox box;
  box.lo.resize(arity);
  box.hi.resize(arity);
  for (int j = 0; j < arity; ++j) {
    box.lo[j] = center[j] - radius[j];
    box.hi[j] = center[j] + radius[j];
  }
  auto impl = std::make_shared<Impl>();
  impl->arity = arity;
  impl->tag = "cosine-window";
  impl->support = box;
  // Product of cos^4(pi u_j / 2) windows, u_j = (t_j - c_j)/R_j.
  impl->eval = [center, radius](std::span<const double> t) {
    double v = 1.0;
    for (std::size_t j = 0; j < t.size(); ++j) {
      const double u = (t[j] - center[j]) / radius[j];
      v *= cos4_deriv(u, std::numbers::pi / 2.0, 0);
    }
    return v;
  };
  impl->deriv = [center, radius](std::span<const int> multi, std::span<const double> t) {
    double v = 1.0;
    for (std::size_t j = 0; j < t.size(); ++j) {
      const double u = (t[j] - center[j]) / radius[j];
      const double scale = std::pow(1.0 / radius[j], multi[j]);
      v *= scale * cos4_deriv(u, std::numbers::pi / 2.0, multi[j]);
    }
    return v;
  };
  return finish(std::move(impl));
}

TestFunction TestFunction::from_tag(const std::string& tag, int arity) {
  if (tag == "1" || tag == "constant") return constant(arity, 1.0);
  if (tag.rfind("monomial-", 0) == 0) {
    if (arity != 1) fail(ErrorKind::Usage, "monomial tags are one-dimensional");
    return monomial(std::stoi(tag.substr(9)));
  }
  if (tag == "gaussian-bump") return gaussian_bump(arity, Vec(arity, 1.0), Vec(arity, 1.0));
  if (tag == "cosine-window") return cosine_window(arity, Vec(arity, 1.0), Vec(arity, 1.0));
  return from_expression(tag, arity);
}

TestFunction TestFunction::from_callable(int arity,
                                         std::function<double(std::span<const double>)> f,
                                         std::optional<SupportBox> support, std::string tag) {
  auto impl = std::make_shared<Impl>();
  impl->arity = arity;
  impl->tag = std::move(tag);
  impl->support = std::move(support);
  impl->eval = std::move(f);
  return finish(std::move(impl));
}

TestFunction TestFunction::product(const TestFunction& a, const TestFunction& b) {
  if (!a.impl_ || !b.impl_) fail(ErrorKind::Usage, "product of empty test functions");
  auto ia = a.impl_, ib = b.impl_;
  const int na = ia->arity, nb = ib->arity;
  auto impl = std::make_shared<Impl>();
  impl->arity = na + nb;
  impl->tag = ia->tag + "*" + ib->tag;
  if (ia->support && ib->support) {
    SupportBox box;
    box.lo = ia->support->lo;
    box.hi = ia->support->hi;
    box.lo.insert(box.lo.end(), ib->support->lo.begin(), ib->support->lo.end());
    box.hi.insert(box.hi.end(), ib->support->hi.begin(), ib->support->hi.end());
    impl->support = box;
  }
  auto split_eval = [ia, ib, na, nb](std::span<const double> t) {
    std::span<const double> ta = t.subspan(0, na), tb = t.subspan(na, nb);
    double va = (ia->support && !in_box(*ia->support, ta)) ? 0.0 : ia->eval(ta);
    if (va == 0.0) return 0.0;
    double vb = (ib->support && !in_box(*ib->support, tb)) ? 0.0 : ib->eval(tb);
    return va * vb;
  };
  impl->eval = split_eval;
  if (ia->deriv && ib->deriv) {
    impl->deriv = [ia, ib, na, nb](std::span<const int> multi, std::span<const double> t) {
      std::span<const double> ta = t.subspan(0, na), tb = t.subspan(na, nb);
      if (ia->support && !in_box(*ia->support, ta)) return 0.0;
      if (ib->support && !in_box(*ib->support, tb)) return 0.0;
      std::span<const int> ma = multi.subspan(0, na), mb = multi.subspan(na, nb);
      return ia->deriv(ma, ta) * ib->deriv(mb, tb);
    };
  }
  return finish(std::move(impl));
}

TestFunction TestFunction::dilate(double scale) const {
  return dilate_axes(scale, arity());
}

TestFunction TestFunction::dilate_axes(double scale, int k) const {
  if (!impl_) fail(ErrorKind::Usage, "dilating empty test function");
  if (k < 0 || k > impl_->arity) fail(ErrorKind::Usage, "dilation axis count out of range");
  auto base = impl_;
  auto impl = std::make_shared<Impl>();
  impl->arity = base->arity;
  impl->tag = base->tag + "@dilated";
  if (base->support) {
    SupportBox box = *base->support;
    for (int j = 0; j < k; ++j) {
      box.lo[j] /= scale;
      box.hi[j] /= scale;
      if (box.lo[j] > box.hi[j]) std::swap(box.lo[j], box.hi[j]);
    }
    impl->support = box;
  }
  auto map_point = [base, scale, k](std::span<const double> t) {
    Vec p(t.begin(), t.end());
    for (int j = 0; j < k; ++j) p[j] *= scale;
    return p;
  };
  impl->eval = [base, map_point](std::span<const double> t) {
    Vec p = map_point(t);
    if (base->support && !in_box(*base->support, p)) return 0.0;
    return base->eval(p);
  };
  if (base->deriv) {
    impl->deriv = [base, map_point, scale, k](std::span<const int> multi,
                                              std::span<const double> t) {
      Vec p = map_point(t);
      if (base->support && !in_box(*base->support, p)) return 0.0;
      double factor = 1.0;
      for (int j = 0; j < k; ++j) factor *= std::pow(scale, multi[j]);
      return factor * base->deriv(multi, p);
    };
  }
  return finish(std::move(impl));
}

TestFunction TestFunction::slice_tail(Vec fixed_tail) const {
  if (!impl_) fail(ErrorKind::Usage, "slicing empty test function");
  const int m = impl_->arity;
  const int k = m - static_cast<int>(fixed_tail.size());
  if (k < 1) fail(ErrorKind::Usage, "slice leaves no free variables");
  auto base = impl_;
  auto impl = std::make_shared<Impl>();
  impl->arity = k;
  impl->tag = base->tag + "@slice";
  if (base->support) {
    SupportBox box;
    box.lo.assign(base->support->lo.begin(), base->support->lo.begin() + k);
    box.hi.assign(base->support->hi.begin(), base->support->hi.begin() + k);
    impl->support = box;
  }
  auto assemble = [base, fixed_tail, k](std::span<const double> s) {
    Vec p(base->arity);
    for (int j = 0; j < k; ++j) p[j] = s[j];
    for (std::size_t j = 0; j < fixed_tail.size(); ++j) p[k + j] = fixed_tail[j];
    return p;
  };
  impl->eval = [base, assemble](std::span<const double> s) {
    Vec p = assemble(s);
    if (base->support && !in_box(*base->support, p)) return 0.0;
    return base->eval(p);
  };
  if (base->deriv) {
    impl->deriv = [base, assemble, k](std::span<const int> multi, std::span<const double> s) {
      Vec p = assemble(s);
      if (base->support && !in_box(*base->support, p)) return 0.0;
      std::vector<int> full(base->arity, 0);
      for (int j = 0; j < k; ++j) full[j] = multi[j];
      return base->deriv(full, p);
    };
  }
  return finish(std::move(impl));
}

TestFunction TestFunction::second_partial(int i, int j) const {
  if (!impl_) fail(ErrorKind::Usage, "empty test function");
  if (!impl_->deriv)
    fail(ErrorKind::Dependency, "second_partial needs derivative data");
  auto base = impl_;
  std::vector<int> multi(base->arity, 0);
  multi[i] += 1;
  multi[j] += 1;
  auto impl = std::make_shared<Impl>();
  impl->arity = base->arity;
  impl->tag = base->tag + "_d" + std::to_string(i + 1) + std::to_string(j + 1);
  impl->support = base->support;
  impl->eval = [base, multi](std::span<const double> t) { return base->deriv(multi, t); };
  impl->deriv = [base, multi](std::span<const int> extra, std::span<const double> t) {
    std::vector<int> full = multi;
    for (std::size_t a = 0; a < full.size(); ++a) full[a] += extra[a];
    if (total_order(full) > 4)
      fail(ErrorKind::Usage, "derivative order above 4 is not supported");
    return base->deriv(full, t);
  };
  // Skip the finite-difference self check: differentiating near the support
  // boundary of a windowed base function is legitimately noisy.
  struct Access : TestFunction {
    explicit Access(std::shared_ptr<const Impl> im) : TestFunction(std::move(im)) {}
  };
  return Access(std::move(impl));
}

} // namespace szaszlab
