#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "polytope.hpp"

namespace szaszlab {

class ToricModel;
using ModelPtr = std::shared_ptr<const ToricModel>;

// Legendre-dual data at an interior point x of the moment polytope.
struct DualPoint {
  Vec x;
  Vec rho;          // solves grad_phi(rho) = x
  double u_value;   // <x, rho> - phi(rho)
  Vec grad_u;       // = rho
  Mat hessian_G;    // Hessian of u at x
  Mat hessian_H;    // Hessian of phi at rho; H * G = I
};

struct LegendreOptions {
  double tol = 1e-12; // on |grad_phi(rho) - x| per component, relative to max(1, |x_j|)
  int max_iter = 100;
  std::optional<Vec> initial_rho;
};

// A toric Kahler model: a strictly convex potential phi(rho) on its
// rho-domain, the moment polytope, and optional closed forms (monomial
// norms, kernel diagonal, symplectic potential). Immutable after build.
class ToricModel {
public:
  enum class RhoDomainKind { AllSpace, UnitBallExp, PerFactor };

  const std::string& name() const { return name_; }
  int dimension() const { return dim_; }
  const Polytope& polytope() const { return polytope_; }
  RhoDomainKind rho_domain_kind() const { return domain_kind_; }
  bool rho_in_domain(std::span<const double> rho) const;
  std::string rho_domain_violation(std::span<const double> rho) const;
  int min_level() const { return min_level_; } // smallest admissible N

  double phi(std::span<const double> rho) const;
  Vec grad_phi(std::span<const double> rho) const;
  Mat hess_phi(std::span<const double> rho) const;

  bool has_closed_norms() const { return static_cast<bool>(closed_log_norm_); }
  double closed_log_norm(std::span<const long long> alpha, int N) const;
  std::optional<double> closed_kernel_diag(int N) const;  // consistent with the norms
  std::optional<double> stated_kernel_diag(int N) const;  // differing textbook value, if any

  bool has_closed_dual() const { return static_cast<bool>(closed_u_); }
  double closed_u(std::span<const double> x) const;
  Vec closed_grad_u(std::span<const double> x) const;
  Mat closed_hess_u(std::span<const double> x) const;
  std::optional<Vec> initial_rho_guess(std::span<const double> x) const;

  const std::vector<ModelPtr>& factors() const { return factors_; } // empty if atomic

  static ModelPtr bargmann_fock();
  static ModelPtr fubini_study_cp1();
  static ModelPtr bergman_ball_1();
  static ModelPtr product_of(ModelPtr a, ModelPtr b);
  static ModelPtr from_json(const std::string& json_text);
  // Registry lookup: "bargmann-fock", "fubini-study-cp1", "bergman-ball-1",
  // "product:<a>x<b>".
  static ModelPtr open(const std::string& name);
  static std::vector<std::string> registry_names();

  struct Builder;

private:
  friend struct Builder;
  std::string name_;
  int dim_ = 0;
  Polytope polytope_;
  RhoDomainKind domain_kind_ = RhoDomainKind::AllSpace;
  int min_level_ = 1;
  std::function<double(std::span<const double>)> phi_;
  std::function<Vec(std::span<const double>)> grad_phi_;
  std::function<Mat(std::span<const double>)> hess_phi_;
  std::function<double(std::span<const long long>, int)> closed_log_norm_;
  std::function<double(int)> closed_kernel_;
  std::function<double(int)> stated_kernel_;
  std::function<double(std::span<const double>)> closed_u_;
  std::function<Vec(std::span<const double>)> closed_grad_u_;
  std::function<Mat(std::span<const double>)> closed_hess_u_;
  std::function<Vec(std::span<const double>)> init_guess_;
  std::function<bool(std::span<const double>)> domain_check_;
  std::vector<ModelPtr> factors_;
};

// Operations ---------------------------------------------------------------

Vec moment_map(const ToricModel& model, std::span<const double> rho);

// Damped Newton inversion of the moment map; fills the full dual data.
DualPoint legendre_invert(const ToricModel& model, std::span<const double> x,
                          const LegendreOptions& options = {});

// Newton-route value <x, rho(x)> - phi(rho(x)).
double symplectic_potential(const ToricModel& model, std::span<const double> x);

// Canonical potential sum of ell_r log ell_r over the facets.
double canonical_potential(const Polytope& polytope, std::span<const double> x);

// u(x) = sum x_j log x_j + h(x) near the vertex at the origin; h0 / grad0 /
// hess0 are one-sided limits extracted on a shrinking interior stencil.
struct SmoothRemainder {
  double h0;
  Vec grad0;
  Mat hess0;
  std::function<double(std::span<const double>)> h;
};
SmoothRemainder smooth_remainder(const ToricModel& model);

// (G_u(x), H_phi(rho(x))): closed forms where the model has them, otherwise
// central differences of rho(x) (for G) and of grad_phi (for H).
std::pair<Mat, Mat> hessians(const ToricModel& model, std::span<const double> x);

// Fast dual access used by the operator modules: closed forms when present,
// Newton otherwise. Returns (u, grad_u=rho).
std::pair<double, Vec> dual_potential(const ToricModel& model, std::span<const double> x);

} // namespace szaszlab
