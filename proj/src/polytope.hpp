#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace szaszlab {

struct Facet {
  std::vector<long long> normal; // primitive integer inward normal
  double offset = 0.0;           // <x, normal> >= offset
};

// Moment polyhedral set: intersection of half spaces <x, v_r> >= lambda_r.
class Polytope {
public:
  Polytope() = default;
  Polytope(int dimension, std::vector<Facet> facets);

  static Polytope orthant(int m);       // x_j >= 0, unbounded
  static Polytope unit_interval();      // [0, 1]
  static Polytope product(const Polytope& a, const Polytope& b);

  int dimension() const { return dim_; }
  const std::vector<Facet>& facets() const { return facets_; }
  bool is_unbounded() const { return unbounded_; }

  double facet_value(std::size_t r, std::span<const double> x) const; // ell_r(x)
  bool contains(std::span<const double> x, double slack = 0.0) const;
  bool strictly_inside(std::span<const double> x, double margin = 0.0) const;

  // Integer range of alpha_j inside N*P with the other coordinates fixed;
  // hi is empty on axes unbounded above.
  struct AxisRange {
    long long lo = 0;
    std::optional<long long> hi;
  };
  AxisRange lattice_axis_range(int N, std::span<const long long> alpha, int axis) const;

  bool lattice_contains(int N, std::span<const long long> alpha) const;

  // Nudges x to be strictly inside every facet by at least margin.
  Vec clamp_inside(std::span<const double> x, double margin) const;

private:
  int dim_ = 0;
  std::vector<Facet> facets_;
  bool unbounded_ = false;
};

} // namespace szaszlab
