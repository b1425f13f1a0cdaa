#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace qaguide {

struct SignificanceResult {
  double p_value = 1.0;
  std::size_t n_permutations = 0;
  /// mean(a - b); the test itself is on its magnitude.
  double observed_diff = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr double kSignificanceAlpha = 0.05;
inline constexpr std::size_t kDefaultPermutations = 10000;

/// Two-sided paired approximate randomization test. Each permutation swaps
/// every pair with probability 1/2; p = (hits + 1) / (n + 1) where a hit is
/// a permuted |mean difference| at least the observed one.
SignificanceResult significance_test(const std::vector<double>& scores_a,
                                     const std::vector<double>& scores_b,
                                     std::size_t n_permutations = kDefaultPermutations,
                                     std::uint64_t seed = 0);

inline bool is_significant(const SignificanceResult& r, double alpha = kSignificanceAlpha) {
  return r.p_value < alpha;
}

}  // namespace qaguide
