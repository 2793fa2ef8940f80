#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace szaszlab {

// Deterministic pairwise summation; the reduction tree depends only on the
// element order, so results are run-to-run identical.
double pairwise_sum(std::span<const double> v);

// log(sum(exp(logs))) with max-shift; -inf entries are legal.
double log_sum_exp(std::span<const double> logs);

double log_factorial(long long n);            // log n!
double log_binomial(long long n, long long k); // log C(n, k)
double log_pochhammer(double a, long long j);  // log a(a+1)...(a+j-1)

} // namespace szaszlab
