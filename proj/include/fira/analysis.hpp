#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fira {

// A ranking of n items: a permutation of 1..n.
class RankSequence {
 public:
  // Throws ParameterError unless `values` is a permutation of 1..n.
  explicit RankSequence(std::vector<int> values);

  const std::vector<int>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  bool operator==(const RankSequence&) const = default;

 private:
  std::vector<int> values_;
};

enum class CorrelationMethod { Kendall, Spearman };

std::string to_string(CorrelationMethod method);

struct CorrelationResult {
  double coefficient = 0.0;
  double p_value = 1.0;  // two-sided
  CorrelationMethod method = CorrelationMethod::Kendall;
};

// Largest n for which the Kendall p-value uses the exact null distribution.
inline constexpr std::size_t kKendallExactLimit = 12;

// tau = (C - D) / (n (n - 1) / 2). The p-value is exact for
// n <= kKendallExactLimit (inversion-count distribution) and uses the
// normal approximation of C - D above that.
CorrelationResult kendall_tau(const RankSequence& a, const RankSequence& b);

// rho = 1 - 6 sum d^2 / (n (n^2 - 1)); p-value from the t statistic
// rho * sqrt((n - 2) / (1 - rho^2)) with n - 2 degrees of freedom.
CorrelationResult spearman_rho(const RankSequence& a, const RankSequence& b);

// Number of permutations of n items with exactly k inversions, for k in
// [0, n(n-1)/2].
std::vector<double> inversion_count_distribution(std::size_t n);

// Rank 1 goes to the largest average; ties keep index order. Throws
// ParameterError on NaN.
RankSequence trace_to_ranking(const std::vector<double>& averages);

// Monte-Carlo model of the adaptive learning rate psi and the pooled
// scaling factor phi over n parameters with N(0, sigma^2) gradients:
//   psi_i^2 = (1 - b^h) / ((1 - b) * sum_j b^(h-j) g_j^2)
//   phi^2   = sum_i w_i psi_i^2,  w_i = g_t^(i)^2 / sum_k g_t^(k)^2
// where the history h is the first t - 1 gradients when exclude_current is
// set and all t otherwise.
struct VarianceSimConfig {
  std::size_t rank = 10;
  std::size_t history_length = 100;
  std::size_t trials = 100000;
  double beta2 = 0.999;
  double sigma = 1.0;
  std::uint64_t seed = 42;
  bool exclude_current = true;

  void validate() const;
};

struct VarianceSimResult {
  double var_phi = 0.0;
  double var_psi = 0.0;
  double var_phi_sq = 0.0;
  double var_psi_sq = 0.0;
  double mean_phi_sq = 0.0;
  double mean_psi_sq = 0.0;
};

// Trials are grouped in fixed-size blocks, each drawn from its own stream
// keyed by (seed, trial index) and reduced in block order, so the result
// does not depend on `threads`. threads == 0 uses the hardware count.
VarianceSimResult simulate_variance(const VarianceSimConfig& config, unsigned threads = 0);

}  // namespace fira
