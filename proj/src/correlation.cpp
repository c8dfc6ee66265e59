#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "fira/analysis.hpp"
#include "fira/error.hpp"

namespace fira {

namespace {

void require_comparable(const RankSequence& a, const RankSequence& b) {
  if (a.size() != b.size()) throw ParameterError("rank correlation: length mismatch");
  if (a.size() < 2) throw ParameterError("rank correlation: need at least two items");
}

}  // namespace

RankSequence::RankSequence(std::vector<int> values) : values_(std::move(values)) {
  std::vector<bool> seen(values_.size() + 1, false);
  for (int v : values_) {
    if (v < 1 || static_cast<std::size_t>(v) > values_.size() || seen[v]) {
      throw ParameterError("RankSequence: not a permutation of 1.." +
                           std::to_string(values_.size()));
    }
    seen[v] = true;
  }
}

std::string to_string(CorrelationMethod method) {
  return method == CorrelationMethod::Kendall ? "kendall" : "spearman";
}

std::vector<double> inversion_count_distribution(std::size_t n) {
  // Adding the k-th item contributes 0..k-1 new inversions.
  std::vector<double> counts{1.0};
  for (std::size_t k = 2; k <= n; ++k) {
    std::vector<double> next(counts.size() + k - 1, 0.0);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      for (std::size_t j = 0; j < k; ++j) next[i + j] += counts[i];
    }
    counts = std::move(next);
  }
  return counts;
}

CorrelationResult kendall_tau(const RankSequence& a, const RankSequence& b) {
  require_comparable(a, b);
  const std::size_t n = a.size();
  const auto& x = a.values();
  const auto& y = b.values();
  std::int64_t concordant = 0;
  std::int64_t discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::int64_t s = static_cast<std::int64_t>(x[i] - x[j]) * (y[i] - y[j]);
      if (s > 0) ++concordant;
      if (s < 0) ++discordant;
    }
  }
  const auto pairs = static_cast<std::int64_t>(n * (n - 1) / 2);
  const double tau = static_cast<double>(concordant - discordant) / static_cast<double>(pairs);

  double p = 1.0;
  if (n <= kKendallExactLimit) {
    // Under independence the discordant count has the inversion-count law,
    // which is symmetric about pairs / 2.
    const std::vector<double> counts = inversion_count_distribution(n);
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const std::int64_t tail = std::min(discordant, pairs - discordant);
    double mass = 0.0;
    for (std::int64_t k = 0; k <= tail; ++k) mass += counts[static_cast<std::size_t>(k)];
    p = std::min(1.0, 2.0 * mass / total);
  } else {
    const double nd = static_cast<double>(n);
    const double var = nd * (nd - 1.0) * (2.0 * nd + 5.0) / 18.0;
    const double z = static_cast<double>(concordant - discordant) / std::sqrt(var);
    p = std::erfc(std::abs(z) / std::sqrt(2.0));
  }
  return {tau, p, CorrelationMethod::Kendall};
}

CorrelationResult spearman_rho(const RankSequence& a, const RankSequence& b) {
  require_comparable(a, b);
  const std::size_t n = a.size();
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.values()[i] - b.values()[i];
    sum_sq += d * d;
  }
  const double nd = static_cast<double>(n);
  const double rho = 1.0 - 6.0 * sum_sq / (nd * (nd * nd - 1.0));

  double p = 1.0;
  if (n > 2) {
    if (std::abs(rho) >= 1.0) {
      p = 0.0;
    } else {
      const double dof = nd - 2.0;
      const double t = rho * std::sqrt(dof / (1.0 - rho * rho));
      boost::math::students_t_distribution<double> dist(dof);
      p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    }
  }
  return {rho, p, CorrelationMethod::Spearman};
}

RankSequence trace_to_ranking(const std::vector<double>& averages) {
  for (double v : averages) {
    if (std::isnan(v)) throw ParameterError("trace_to_ranking: NaN average");
  }
  std::vector<std::size_t> order(averages.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return averages[i] > averages[j]; });
  std::vector<int> ranks(averages.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    ranks[order[pos]] = static_cast<int>(pos + 1);
  }
  return RankSequence(std::move(ranks));
}

}  // namespace fira
