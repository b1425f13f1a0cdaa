#include "qaguide/significance.hpp"

#include <cmath>
#include <random>

#include "qaguide/error.hpp"

namespace qaguide {

SignificanceResult significance_test(const std::vector<double>& scores_a,
                                     const std::vector<double>& scores_b,
                                     std::size_t n_permutations, std::uint64_t seed) {
  if (scores_a.size() != scores_b.size()) {
    throw Error(ErrorKind::kLengthMismatch, "paired score lists differ in length");
  }
  if (scores_a.empty()) throw Error(ErrorKind::kLengthMismatch, "paired score lists are empty");

  const auto n = static_cast<double>(scores_a.size());
  std::vector<double> diffs(scores_a.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    diffs[i] = scores_a[i] - scores_b[i];
    sum += diffs[i];
  }
  const double mean_diff = sum / n;
  const double observed = std::abs(mean_diff);
  // Tolerate summation-order rounding when deciding ties.
  const double tie_eps = 1e-12 * std::max(1.0, observed);

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution flip(0.5);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n_permutations; ++k) {
    double s = 0.0;
    for (double d : diffs) s += flip(rng) ? -d : d;
    if (std::abs(s / n) >= observed - tie_eps) ++hits;
  }

  SignificanceResult r;
  r.n_permutations = n_permutations;
  r.observed_diff = mean_diff;
  r.seed = seed;
  r.p_value = static_cast<double>(hits + 1) / static_cast<double>(n_permutations + 1);
  return r;
}

}  // namespace qaguide
