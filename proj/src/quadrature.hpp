#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lattice_ops.hpp"
#include "toric_model.hpp"

namespace szaszlab {

struct QuadratureSpec {
  int nodes_per_axis = 64;   // Gauss-Legendre order per panel
  double rel_tol = 1e-10;
  // Global measure constant; 0 means auto: pin the alpha = 0 norm to the
  // model's closed form when one exists, else 1. The generalized operator is
  // invariant under this constant.
  double calibration_constant = 0.0;
  // Explicit per-axis rho windows; bypasses the Laplace mode search.
  std::optional<std::vector<std::pair<double, double>>> window;
};

struct NormEntry {
  std::vector<long long> alpha;
  double log_norm;
  double est_error; // relative, from the final window/panel doubling
};

struct NormTable {
  std::string model;
  int N = 0;
  QuadratureSpec spec;
  std::vector<NormEntry> entries;

  double log_norm(std::span<const long long> alpha) const;
  std::string to_csv() const; // '#'-prefixed JSON header, then CSV rows
};

// Calibrated log of integral_{rho} e^{<rho,alpha>} e^{-N phi} det H dm(rho).
double monomial_log_norm(const ToricModel& model, int N, std::span<const long long> alpha,
                         const QuadratureSpec& spec, double* est_error = nullptr);

NormTable build_norm_table(const ToricModel& model, int N, long long alpha_max,
                           const QuadratureSpec& spec, int jobs = 1);

class TableNorms final : public NormSource {
public:
  explicit TableNorms(const NormTable& table) : table_(table) {}
  double log_norm(std::span<const long long> alpha, int N) const override;

private:
  const NormTable& table_;
};

// On-demand quadrature norms with a thread-safe cache.
class QuadratureNorms final : public NormSource {
public:
  QuadratureNorms(ModelPtr model, QuadratureSpec spec)
      : model_(std::move(model)), spec_(spec) {}
  double log_norm(std::span<const long long> alpha, int N) const override;

private:
  ModelPtr model_;
  QuadratureSpec spec_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<int, std::vector<long long>>, double> cache_;
};

struct KernelDiagResult {
  double B = 0.0;
  std::vector<double> partial_sums; // cumulative over expanding window rings
  double tail_bound = 0.0;          // relative missed weight mass
  std::optional<double> closed_value; // closed form consistent with the norms
  std::optional<double> stated_value; // differing textbook normalization, if any
};

// Diagonal kernel sum B = sum |z^alpha|^2 e^{-N phi} / ||z^alpha||^2 at
// z = mu^{-1}(x), computed through phi (not through u).
KernelDiagResult kernel_diag(const ToricModel& model, const NormSource& norms, int N,
                             std::span<const double> x, const TruncationPolicy& policy = {});

struct TyzRatioResult {
  std::vector<int> N_list;
  Vec ratios; // B(N) / N^m
  double fitted_a1 = 0.0;
};

TyzRatioResult tyz_ratio(const ToricModel& model, const NormSource& norms,
                         std::vector<int> N_list, std::span<const double> x,
                         const TruncationPolicy& policy = {});

} // namespace szaszlab
