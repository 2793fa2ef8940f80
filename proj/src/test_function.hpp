#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace szaszlab {

struct SupportBox {
  Vec lo, hi; // closed box; eval is 0 outside
};

// Smooth test function with optional analytic derivatives (orders <= 4) and
// optional compact support. Instances are immutable and cheap to copy.
class TestFunction {
public:
  TestFunction() = default;

  static TestFunction constant(int arity, double value);
  static TestFunction from_expression(const std::string& text, int arity,
                                      std::optional<SupportBox> support = {});
  static TestFunction monomial(int power); // 1-D t^k
  static TestFunction gaussian_bump(int arity, Vec center, Vec radius);
  static TestFunction cosine_window(int arity, Vec center, Vec radius);
  // "monomial-k", "gaussian-bump", "cosine-window", "1", or an expression.
  static TestFunction from_tag(const std::string& tag, int arity);
  // Eval-only helper for programmatic functions (no derivative data).
  static TestFunction from_callable(int arity, std::function<double(std::span<const double>)> f,
                                    std::optional<SupportBox> support = {},
                                    std::string tag = "callable");
  static TestFunction product(const TestFunction& a, const TestFunction& b);

  int arity() const;
  const std::string& tag() const;
  const std::optional<SupportBox>& support() const;
  bool has_derivatives() const;

  double operator()(std::span<const double> t) const;
  // multi holds a per-axis derivative order; total order <= 4.
  double derivative(std::span<const int> multi, std::span<const double> t) const;

  TestFunction dilate(double scale) const;               // t -> f(scale * t)
  TestFunction dilate_axes(double scale, int k) const;   // first k axes only
  TestFunction slice_tail(Vec fixed_tail) const;         // fix trailing coords
  TestFunction second_partial(int i, int j) const;

  bool valid() const;

private:
  struct Impl;
  explicit TestFunction(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

} // namespace szaszlab
