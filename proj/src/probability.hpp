#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "test_function.hpp"

namespace szaszlab {

enum class DistKind { Binomial, Poisson, NegBinomialFailures, PascalTrials };

// Lattice distributions backing the operator identities: binomial (Bernstein),
// Poisson (classical Szasz), negative binomial / Pascal (disk operator).
class LatticeDistribution {
public:
  static LatticeDistribution binomial(int N, double p);
  static LatticeDistribution poisson(double lambda);
  static LatticeDistribution negbinomial_failures(int N, double p);
  static LatticeDistribution pascal_trials(int N, double p);

  DistKind kind() const { return kind_; }
  double log_pmf(long long j) const;
  double pmf(long long j) const;
  long long support_lo() const;
  std::optional<long long> support_hi() const;
  double mean() const;
  std::string describe() const;

  int n() const { return n_; }
  double p() const { return p_; }
  double lambda() const { return lambda_; }

private:
  DistKind kind_ = DistKind::Poisson;
  int n_ = 0;
  double p_ = 0.0;
  double lambda_ = 0.0;
};

struct ExpectationResult {
  double value = 0.0;
  double tail_bound = 0.0;
  long long lo = 0, hi = 0;
  long long terms = 0;
};

// Exact truncated sum of g(j) pmf(j); |error| <= epsilon * sup|g| on the
// truncation set.
ExpectationResult expectation(const LatticeDistribution& dist,
                              const std::function<double(long long)>& g, double epsilon);

struct PascalCheckRecord {
  int N = 0;
  double x = 0.0;
  double trials_reading = 0.0;    // E f(X/N), X on {N, N+1, ...}
  double reindexed_reading = 0.0; // sum_{j>=0} f(j/N) (N)_j p^N q^j / j!
  double op_kernel_sum = 0.0;
  double op_paper_prefactor = 0.0;
  double dist_trials_kernel = 0.0;
  double dist_trials_paper = 0.0;
  double dist_reindexed_kernel = 0.0;
  double dist_reindexed_paper = 0.0;
};

// Evaluates both readings of the Pascal expectation against both disk
// operator normalizations; the reindexing shift is reported, not resolved.
PascalCheckRecord pascal_theorem_check(const TestFunction& f, int N, double x, double epsilon);

// SplitMix64 run in counter mode: output_i = mix64(seed_base + i * GOLDEN).
// Streams derive independent bases from (seed, stream); bit-reproducible
// across platforms.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);
  std::uint64_t next_u64();
  double next_double(); // [0, 1)
  double next_normal();

private:
  std::uint64_t base_ = 0;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

long long sample_one(const LatticeDistribution& dist, CounterRng& rng);
std::vector<long long> sample(const LatticeDistribution& dist, std::size_t count,
                              std::uint64_t seed);

struct MonteCarloResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t count = 0;
  std::uint64_t seed = 0;
};

MonteCarloResult monte_carlo_expectation(const LatticeDistribution& dist,
                                         const std::function<double(long long)>& g,
                                         std::size_t count, std::uint64_t seed);

} // namespace szaszlab
