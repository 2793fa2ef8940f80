#include "probability.hpp"

#include <cmath>
#include <limits>

#include "error.hpp"
#include "lattice_ops.hpp"
#include "logspace.hpp"

namespace szaszlab {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

LatticeDistribution LatticeDistribution::binomial(int N, double p) {
  if (N < 1 || p < 0.0 || p > 1.0) fail(ErrorKind::Usage, "binomial needs N >= 1, p in [0,1]");
  LatticeDistribution d;
  d.kind_ = DistKind::Binomial;
  d.n_ = N;
  d.p_ = p;
  return d;
}

LatticeDistribution LatticeDistribution::poisson(double lambda) {
  if (lambda < 0.0) fail(ErrorKind::Usage, "poisson needs lambda >= 0");
  LatticeDistribution d;
  d.kind_ = DistKind::Poisson;
  d.lambda_ = lambda;
  return d;
}

LatticeDistribution LatticeDistribution::negbinomial_failures(int N, double p) {
  if (N < 1 || !(p > 0.0) || !(p <= 1.0))
    fail(ErrorKind::Usage, "negbinomial needs N >= 1, p in (0,1]");
  LatticeDistribution d;
  d.kind_ = DistKind::NegBinomialFailures;
  d.n_ = N;
  d.p_ = p;
  return d;
}

LatticeDistribution LatticeDistribution::pascal_trials(int N, double p) {
  LatticeDistribution d = negbinomial_failures(N, p);
  d.kind_ = DistKind::PascalTrials;
  return d;
}

double LatticeDistribution::log_pmf(long long j) const {
  switch (kind_) {
    case DistKind::Binomial: {
      if (j < 0 || j > n_) return kNegInf;
      double lw = log_binomial(n_, j);
      if (j > 0) {
        if (p_ == 0.0) return kNegInf;
        lw += static_cast<double>(j) * std::log(p_);
      }
      if (j < n_) {
        if (p_ == 1.0) return kNegInf;
        lw += static_cast<double>(n_ - j) * std::log1p(-p_);
      }
      return lw;
    }
    case DistKind::Poisson: {
      if (j < 0) return kNegInf;
      if (lambda_ == 0.0) return j == 0 ? 0.0 : kNegInf;
      return -lambda_ + static_cast<double>(j) * std::log(lambda_) - log_factorial(j);
    }
    case DistKind::NegBinomialFailures: {
      if (j < 0) return kNegInf;
      return log_binomial(n_ + j - 1, j) + static_cast<double>(n_) * std::log(p_) +
             (j > 0 ? static_cast<double>(j) * std::log1p(-p_) : 0.0);
    }
    case DistKind::PascalTrials: {
      if (j < n_) return kNegInf;
      return log_binomial(j - 1, n_ - 1) + static_cast<double>(n_) * std::log(p_) +
             (j > n_ ? static_cast<double>(j - n_) * std::log1p(-p_) : 0.0);
    }
  }
  return kNegInf;
}

double LatticeDistribution::pmf(long long j) const { return std::exp(log_pmf(j)); }

long long LatticeDistribution::support_lo() const {
  return kind_ == DistKind::PascalTrials ? n_ : 0;
}

std::optional<long long> LatticeDistribution::support_hi() const {
  if (kind_ == DistKind::Binomial) return n_;
  return std::nullopt;
}

double LatticeDistribution::mean() const {
  switch (kind_) {
    case DistKind::Binomial: return n_ * p_;
    case DistKind::Poisson: return lambda_;
    case DistKind::NegBinomialFailures: return n_ * (1.0 - p_) / p_;
    case DistKind::PascalTrials: return n_ / p_;
  }
  return 0.0;
}

std::string LatticeDistribution::describe() const {
  switch (kind_) {
    case DistKind::Binomial:
      return "binomial(" + std::to_string(n_) + ", " + std::to_string(p_) + ")";
    case DistKind::Poisson: return "poisson(" + std::to_string(lambda_) + ")";
    case DistKind::NegBinomialFailures:
      return "negbinomial-failures(" + std::to_string(n_) + ", " + std::to_string(p_) + ")";
    case DistKind::PascalTrials:
      return "pascal-trials(" + std::to_string(n_) + ", " + std::to_string(p_) + ")";
  }
  return "?";
}

ExpectationResult expectation(const LatticeDistribution& dist,
                              const std::function<double(long long)>& g, double epsilon) {
  detail::WindowSpec spec;
  spec.m = 1;
  long long center = static_cast<long long>(std::llround(dist.mean()));
  center = std::max(center, dist.support_lo());
  if (auto hi = dist.support_hi()) center = std::min(center, *hi);
  spec.center = {center};
  const long long lo = dist.support_lo();
  const std::optional<long long> hi = dist.support_hi();
  spec.axis_bounds = [lo, hi](int) {
    Polytope::AxisRange r;
    r.lo = lo;
    r.hi = hi;
    return r;
  };
  spec.log_weight = [&dist](std::span<const long long> a) { return dist.log_pmf(a[0]); };
  spec.f_value = [&g](std::span<const long long> a) { return g(a[0]); };
  TruncationPolicy policy;
  policy.epsilon = epsilon;
  detail::WindowSum s = detail::windowed_sum(spec, policy, false);
  ExpectationResult r;
  r.value = std::exp(s.log_max) * s.sum_fw;
  r.tail_bound = s.tail_rel * std::max(1.0, s.max_abs_f);
  r.lo = s.lo[0];
  r.hi = s.hi[0];
  r.terms = s.terms;
  return r;
}

PascalCheckRecord pascal_theorem_check(const TestFunction& f, int N, double x, double epsilon) {
  if (N < 2) fail(ErrorKind::Usage, "pascal_theorem_check needs N >= 2");
  if (!(x > 0.0)) fail(ErrorKind::Domain, "pascal_theorem_check needs x > 0");
  const double p = 1.0 / (1.0 + x);
  auto g = [&f, N](long long j) {
    Vec arg{static_cast<double>(j) / static_cast<double>(N)};
    return f(arg);
  };
  PascalCheckRecord rec;
  rec.N = N;
  rec.x = x;
  rec.trials_reading = expectation(LatticeDistribution::pascal_trials(N, p), g, epsilon).value;
  rec.reindexed_reading =
      expectation(LatticeDistribution::negbinomial_failures(N, p), g, epsilon).value;
  TruncationPolicy policy;
  policy.epsilon = epsilon;
  rec.op_kernel_sum = pascal_disk(f, N, x, policy, PascalNormalization::KernelSum).value;
  rec.op_paper_prefactor =
      pascal_disk(f, N, x, policy, PascalNormalization::PaperPrefactor).value;
  rec.dist_trials_kernel = std::fabs(rec.trials_reading - rec.op_kernel_sum);
  rec.dist_trials_paper = std::fabs(rec.trials_reading - rec.op_paper_prefactor);
  rec.dist_reindexed_kernel = std::fabs(rec.reindexed_reading - rec.op_kernel_sum);
  rec.dist_reindexed_paper = std::fabs(rec.reindexed_reading - rec.op_paper_prefactor);
  return rec;
}

// RNG ------------------------------------------------------------------------

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

} // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : base_(mix64(seed + kGolden) ^ mix64(stream * 0xD1342543DE82EF95ull + 1)) {}

std::uint64_t CounterRng::next_u64() { return mix64(base_ + (++counter_) * kGolden); }

double CounterRng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::next_normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 kept away from zero.
  const double u1 = std::max(next_double(), 0x1.0p-60);
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  have_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

long long poisson_inversion(double lambda, CounterRng& rng) {
  const double u = rng.next_double();
  double p = std::exp(-lambda);
  double cum = p;
  long long k = 0;
  while (u > cum && k < 4000) {
    ++k;
    p *= lambda / static_cast<double>(k);
    cum += p;
  }
  return k;
}

// Hormann's PTRS transformed-rejection sampler, exact for lambda > ~10.
long long poisson_ptrs(double lambda, CounterRng& rng) {
  const double log_lam = std::log(lambda);
  const double b = 0.931 + 2.53 * std::sqrt(lambda);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.next_double() - 0.5;
    double v = rng.next_double();
    const double us = 0.5 - std::fabs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<long long>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    const long long k = static_cast<long long>(kf);
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        kf * log_lam - lambda - log_factorial(k))
      return k;
  }
}

long long sample_poisson(double lambda, CounterRng& rng) {
  if (lambda <= 0.0) return 0;
  return lambda <= 30.0 ? poisson_inversion(lambda, rng) : poisson_ptrs(lambda, rng);
}

long long binomial_inversion(int n, double p, CounterRng& rng) {
  const double u = rng.next_double();
  const double odds = p / (1.0 - p);
  double term = std::pow(1.0 - p, n);
  double cum = term;
  long long k = 0;
  while (u > cum && k < n) {
    term *= odds * static_cast<double>(n - k) / static_cast<double>(k + 1);
    ++k;
    cum += term;
  }
  return k;
}

double stirling_tail(long long k) {
  static const double table[] = {0.0810614667953272,  0.0413406959554092,
                                 0.0276779256849983,  0.02079067210376509,
                                 0.0166446911898211,  0.0138761288230707,
                                 0.0118967099458917,  0.0104112652619720,
                                 0.00925546218271273, 0.00833056343336287};
  if (k < 10) return table[k];
  const double kp1sq = static_cast<double>(k + 1) * static_cast<double>(k + 1);
  return (1.0 / 12 - (1.0 / 360 - 1.0 / 1260 / kp1sq) / kp1sq) / static_cast<double>(k + 1);
}

// Hormann's BTRS transformed-rejection sampler for p <= 0.5, n p >= 10.
long long binomial_btrs(int n, double p, CounterRng& rng) {
  const double q = 1.0 - p;
  const double spq = std::sqrt(n * p * q);
  const double b = 1.15 + 2.53 * spq;
  const double a = -0.0873 + 0.0248 * b + 0.01 * p;
  const double c = n * p + 0.5;
  const double v_r = 0.92 - 4.2 / b;
  const double alpha = (2.83 + 5.1 / b) * spq;
  const double lpq = std::log(p / q);
  const long long mode = static_cast<long long>(std::floor((n + 1) * p));
  for (;;) {
    double u = rng.next_double() - 0.5;
    double v = rng.next_double();
    const double us = 0.5 - std::fabs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + c);
    if (kf < 0.0 || kf > static_cast<double>(n)) continue;
    const long long k = static_cast<long long>(kf);
    if (us >= 0.07 && v <= v_r) return k;
    v = std::log(v * alpha / (a / (us * us) + b));
    // v <= log(pmf(k)/pmf(mode)), Stirling with exact tail corrections
    const double bound =
        static_cast<double>(k - mode) * lpq +
        (static_cast<double>(n) + 1.0) *
            std::log(static_cast<double>(n - mode + 1) / static_cast<double>(n - k + 1)) +
        (static_cast<double>(mode) + 0.5) *
            std::log((mode + 1.0) / (static_cast<double>(n - mode + 1))) -
        (static_cast<double>(k) + 0.5) * std::log((k + 1.0) / (static_cast<double>(n - k + 1))) +
        stirling_tail(mode) + stirling_tail(n - mode) - stirling_tail(k) - stirling_tail(n - k);
    if (v <= bound) return k;
  }
}

long long sample_binomial(int n, double p, CounterRng& rng) {
  if (p <= 0.0) return 0;
  if (p >= 1.0) return n;
  if (p > 0.5) return n - sample_binomial(n, 1.0 - p, rng);
  if (n <= 64 || n * p <= 30.0) return binomial_inversion(n, p, rng);
  return binomial_btrs(n, p, rng);
}

// Marsaglia-Tsang gamma with integer shape >= 1, unit scale.
double sample_gamma(int shape, CounterRng& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double xn = rng.next_normal();
    const double t = 1.0 + c * xn;
    if (t <= 0.0) continue;
    const double v = t * t * t;
    const double u = rng.next_double();
    if (u < 1.0 - 0.0331 * xn * xn * xn * xn) return d * v;
    if (std::log(std::max(u, 0x1.0p-60)) < 0.5 * xn * xn + d * (1.0 - v + std::log(v)))
      return d * v;
  }
}

} // namespace

long long sample_one(const LatticeDistribution& dist, CounterRng& rng) {
  switch (dist.kind()) {
    case DistKind::Binomial: return sample_binomial(dist.n(), dist.p(), rng);
    case DistKind::Poisson: return sample_poisson(dist.lambda(), rng);
    case DistKind::NegBinomialFailures: {
      // Poisson-gamma mixture: lambda ~ Gamma(N, q/p), then Poisson(lambda).
      const double scale = (1.0 - dist.p()) / dist.p();
      const double lam = sample_gamma(dist.n(), rng) * scale;
      return sample_poisson(lam, rng);
    }
    case DistKind::PascalTrials: {
      const double scale = (1.0 - dist.p()) / dist.p();
      const double lam = sample_gamma(dist.n(), rng) * scale;
      return dist.n() + sample_poisson(lam, rng);
    }
  }
  return 0;
}

std::vector<long long> sample(const LatticeDistribution& dist, std::size_t count,
                              std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<long long> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = sample_one(dist, rng);
  return out;
}

MonteCarloResult monte_carlo_expectation(const LatticeDistribution& dist,
                                         const std::function<double(long long)>& g,
                                         std::size_t count, std::uint64_t seed) {
  if (count < 1) fail(ErrorKind::Usage, "monte carlo needs count >= 1");
  CounterRng rng(seed);
  std::vector<double> vals(count);
  for (std::size_t i = 0; i < count; ++i) vals[i] = g(sample_one(dist, rng));
  MonteCarloResult r;
  r.count = count;
  r.seed = seed;
  r.mean = pairwise_sum(vals) / static_cast<double>(count);
  std::vector<double> sq(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double d = vals[i] - r.mean;
    sq[i] = d * d;
  }
  const double var = count > 1 ? pairwise_sum(sq) / static_cast<double>(count - 1) : 0.0;
  r.stderr_ = std::sqrt(var / static_cast<double>(count));
  return r;
}

} // namespace szaszlab
