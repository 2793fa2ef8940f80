#include "polytope.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "error.hpp"

namespace szaszlab {

namespace {

long long gcd_abs(const std::vector<long long>& v) {
  long long g = 0;
  for (long long e : v) g = std::gcd(g, std::llabs(e));
  return g;
}

// Probe for a nonzero lattice direction d with <d, v_r> >= 0 for all facets;
// such a direction lies in the recession cone, so P is unbounded. The probe
// covers {-1,0,1}^m, which detects every axis-aligned and diagonal cone in
// this library's model family.
bool probe_unbounded(int dim, const std::vector<Facet>& facets) {
  std::vector<int> d(dim, -1);
  for (;;) {
    bool nonzero = false;
    for (int v : d) nonzero |= (v != 0);
    if (nonzero) {
      bool ok = true;
      for (const auto& f : facets) {
        long long dot = 0;
        for (int j = 0; j < dim; ++j) dot += d[j] * f.normal[j];
        if (dot < 0) { ok = false; break; }
      }
      if (ok) return true;
    }
    int j = 0;
    while (j < dim && d[j] == 1) d[j++] = -1;
    if (j == dim) return false;
    ++d[j];
  }
}

} // namespace

Polytope::Polytope(int dimension, std::vector<Facet> facets)
    : dim_(dimension), facets_(std::move(facets)) {
  if (dim_ < 1) fail(ErrorKind::Usage, "polytope dimension must be positive");
  if (facets_.empty()) fail(ErrorKind::Usage, "polytope needs at least one facet");
  for (std::size_t r = 0; r < facets_.size(); ++r) {
    if (static_cast<int>(facets_[r].normal.size()) != dim_)
      fail(ErrorKind::Usage, "facet normal dimension mismatch");
    if (gcd_abs(facets_[r].normal) != 1)
      fail(ErrorKind::Usage, "facet " + std::to_string(r) + " normal is not primitive");
  }
  unbounded_ = probe_unbounded(dim_, facets_);
}

Polytope Polytope::orthant(int m) {
  std::vector<Facet> fs;
  for (int j = 0; j < m; ++j) {
    Facet f;
    f.normal.assign(m, 0);
    f.normal[j] = 1;
    f.offset = 0.0;
    fs.push_back(std::move(f));
  }
  return Polytope(m, std::move(fs));
}

Polytope Polytope::unit_interval() {
  Facet lo{{1}, 0.0}, hi{{-1}, -1.0};
  return Polytope(1, {lo, hi});
}

Polytope Polytope::product(const Polytope& a, const Polytope& b) {
  const int m = a.dim_ + b.dim_;
  std::vector<Facet> fs;
  for (const auto& f : a.facets_) {
    Facet g;
    g.normal = f.normal;
    g.normal.resize(m, 0);
    g.offset = f.offset;
    fs.push_back(std::move(g));
  }
  for (const auto& f : b.facets_) {
    Facet g;
    g.normal.assign(m, 0);
    for (int j = 0; j < b.dim_; ++j) g.normal[a.dim_ + j] = f.normal[j];
    g.offset = f.offset;
    fs.push_back(std::move(g));
  }
  return Polytope(m, std::move(fs));
}

double Polytope::facet_value(std::size_t r, std::span<const double> x) const {
  const Facet& f = facets_[r];
  double s = -f.offset;
  for (int j = 0; j < dim_; ++j) s += x[j] * static_cast<double>(f.normal[j]);
  return s;
}

bool Polytope::contains(std::span<const double> x, double slack) const {
  for (std::size_t r = 0; r < facets_.size(); ++r)
    if (facet_value(r, x) < -slack) return false;
  return true;
}

bool Polytope::strictly_inside(std::span<const double> x, double margin) const {
  for (std::size_t r = 0; r < facets_.size(); ++r)
    if (facet_value(r, x) <= margin) return false;
  return true;
}

Polytope::AxisRange Polytope::lattice_axis_range(int N, std::span<const long long> alpha,
                                                 int axis) const {
  AxisRange range;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (const auto& f : facets_) {
    const long long vj = f.normal[axis];
    if (vj == 0) continue;
    double rest = N * f.offset;
    for (int j = 0; j < dim_; ++j)
      if (j != axis) rest -= static_cast<double>(alpha[j]) * static_cast<double>(f.normal[j]);
    const double bound = rest / static_cast<double>(vj);
    if (vj > 0) lo = std::max(lo, bound);
    else hi = std::min(hi, bound);
  }
  range.lo = static_cast<long long>(std::ceil(lo - 1e-9));
  if (std::isfinite(hi)) range.hi = static_cast<long long>(std::floor(hi + 1e-9));
  return range;
}

bool Polytope::lattice_contains(int N, std::span<const long long> alpha) const {
  for (const auto& f : facets_) {
    double s = -N * f.offset;
    for (int j = 0; j < dim_; ++j)
      s += static_cast<double>(alpha[j]) * static_cast<double>(f.normal[j]);
    if (s < -1e-9) return false;
  }
  return true;
}

Vec Polytope::clamp_inside(std::span<const double> x, double margin) const {
  Vec y(x.begin(), x.end());
  // Push along each violating facet's normal until the margin holds; the
  // model polytopes here are axis-aligned products, so one pass per facet
  // suffices.
  for (int pass = 0; pass < 4; ++pass) {
    bool done = true;
    for (std::size_t r = 0; r < facets_.size(); ++r) {
      const double v = facet_value(r, y);
      if (v < margin) {
        done = false;
        double nn = 0.0;
        for (int j = 0; j < dim_; ++j)
          nn += static_cast<double>(facets_[r].normal[j]) * facets_[r].normal[j];
        const double step = (margin - v) / nn;
        for (int j = 0; j < dim_; ++j) y[j] += step * static_cast<double>(facets_[r].normal[j]);
      }
    }
    if (done) break;
  }
  return y;
}

} // namespace szaszlab
