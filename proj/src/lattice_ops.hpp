#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "test_function.hpp"
#include "toric_model.hpp"

namespace szaszlab {

struct TruncationPolicy {
  enum class Mode { TailBound, FixedRadius };
  Mode mode = Mode::TailBound;
  double epsilon = 1e-14;          // bound on the missed relative weight mass
  long long max_terms = 20'000'000; // safety cap on the enumerated window
  long long fixed_radius = 32;      // FixedRadius mode only
};

// Provider of log ||z^alpha||^2_{h^N}. Implemented by closed forms and by
// quadrature tables; the generalized operator is agnostic to the source.
class NormSource {
public:
  virtual ~NormSource() = default;
  virtual double log_norm(std::span<const long long> alpha, int N) const = 0;
};

class ClosedFormNorms final : public NormSource {
public:
  explicit ClosedFormNorms(ModelPtr model);          // keeps the model alive
  explicit ClosedFormNorms(const ToricModel& model); // non-owning view
  double log_norm(std::span<const long long> alpha, int N) const override;

private:
  ModelPtr owner_;
  const ToricModel* model_;
};

// Wraps a source with a constant factor c > 0 on every norm; the operator
// output is invariant under this scaling.
class ScaledNorms final : public NormSource {
public:
  ScaledNorms(const NormSource& base, double scale);
  double log_norm(std::span<const long long> alpha, int N) const override;

private:
  const NormSource& base_;
  double log_scale_;
};

struct WeightEntry {
  std::vector<long long> alpha;
  double log_weight;
};

struct LatticeWeightTable {
  std::string model;
  int N = 0;
  Vec x;
  std::vector<WeightEntry> entries;
  double normalizer = 0.0; // kernel diagonal sum at x
  std::vector<long long> window_lo, window_hi;
  double tail_bound = 0.0;
  std::string to_csv() const; // '#'-prefixed JSON header line, then CSV rows
};

struct OperatorResult {
  double value = 0.0;
  double tail_bound = 0.0; // bound on the truncation error of `value`
  std::vector<long long> window_lo, window_hi;
  long long terms = 0;
};

enum class PascalNormalization { KernelSum, PaperPrefactor };

// Classical operator: exp(-N|x|) sum f(alpha/N) (Nx)^alpha / alpha!.
OperatorResult szasz_classical(const TestFunction& f, int N, std::span<const double> x,
                               const TruncationPolicy& policy = {});

// Exact finite tensor sum over {0..N}^m.
double bernstein(const TestFunction& f, int N, std::span<const double> x);

// Disk operator (1+x)^-N sum (N)_j f(j/N) (x/(1+x))^j / j!, either normalized
// by its own weight sum or carrying the (N-1)/(N+1) prefactor.
OperatorResult pascal_disk(const TestFunction& f, int N, double x,
                           const TruncationPolicy& policy = {},
                           PascalNormalization normalization = PascalNormalization::KernelSum);

// log weight N(u(x) + <alpha/N - x, grad u(x)>) - log||z^alpha||^2.
double generalized_log_weight(const ToricModel& model, const NormSource& norms, int N,
                              std::span<const double> x, std::span<const long long> alpha);

struct GeneralizedResult {
  double value = 0.0;
  double tail_bound = 0.0;
  LatticeWeightTable table;
};

// Normalized lattice sum sum f(alpha/N) w_alpha / sum w_alpha over N*P.
// Uses the model's closed-form norms when `norms` is null.
GeneralizedResult generalized_operator(const ToricModel& model, const TestFunction& f, int N,
                                       std::span<const double> x,
                                       const TruncationPolicy& policy = {},
                                       const NormSource* norms = nullptr);

namespace detail {

// Shared window machinery: centers a product window at `center`, expands each
// axis until the geometric tail bound drops below policy.epsilon/(2m) per
// side (log-concave weight profiles), then accumulates pairwise sums.
struct WindowSpec {
  int m = 1;
  std::vector<long long> center;
  std::function<Polytope::AxisRange(int axis)> axis_bounds; // may be null (Z_+)
  std::function<double(std::span<const long long>)> log_weight;
  std::function<double(std::span<const long long>)> f_value; // null = f == 1
  std::function<bool(std::span<const long long>)> member;    // null = all in window
};

struct WindowSum {
  double log_max = 0.0;
  double sum_w = 0.0;  // sum of exp(log_w - log_max)
  double sum_fw = 0.0; // sum of f * exp(log_w - log_max)
  double max_abs_f = 0.0;
  std::vector<long long> lo, hi;
  double tail_rel = 0.0;
  long long terms = 0;
  std::vector<WeightEntry> entries; // filled when collect is set
};

WindowSum windowed_sum(const WindowSpec& spec, const TruncationPolicy& policy, bool collect);

} // namespace detail

} // namespace szaszlab
