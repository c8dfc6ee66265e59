#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fira/analysis.hpp"
#include "fira/error.hpp"
#include "fira/random.hpp"
#include "oracles.hpp"

using fira::RankSequence;

namespace {

const RankSequence R1({7, 6, 1, 2, 4, 8, 5, 10, 9, 3});
const RankSequence R2({7, 8, 2, 1, 5, 4, 6, 10, 9, 3});
const RankSequence R3({6, 8, 2, 1, 5, 4, 7, 10, 9, 3});

double brute_tau(const std::vector<int>& x, const std::vector<int>& y) {
  int c = 0, d = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (i == j) continue;
      if ((x[i] < x[j]) == (y[i] < y[j])) ++c; else ++d;
    }
  return static_cast<double>(c - d) / static_cast<double>(c + d);
}

// Two-sided permutation p-value of tau by enumerating every permutation.
double enumerate_tau_p(const std::vector<int>& x, const std::vector<int>& y) {
  const double observed = std::abs(brute_tau(x, y));
  std::vector<int> perm(y.size());
  std::iota(perm.begin(), perm.end(), 1);
  long extreme = 0, total = 0;
  do {
    ++total;
    if (std::abs(brute_tau(x, perm)) >= observed - 1e-12) ++extreme;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(extreme) / static_cast<double>(total);
}

std::vector<int> random_permutation(fira::Rng& rng, std::size_t n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 1);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(v[i], v[rng.below(i + 1)]);
  return v;
}

}  // namespace

TEST_CASE("rank sequences must be permutations") {
  CHECK_THROWS_AS(RankSequence({1, 1, 2}), fira::ParameterError);
  CHECK_THROWS_AS(RankSequence({0, 1}), fira::ParameterError);
  CHECK_THROWS_AS(fira::kendall_tau(RankSequence({1, 2}), RankSequence({1, 2, 3})),
                  fira::ParameterError);
  CHECK_THROWS_AS(fira::kendall_tau(RankSequence({1}), RankSequence({1})),
                  fira::ParameterError);
}

TEST_CASE("kendall tau coefficients") {
  CHECK(fira::kendall_tau(R1, R1).coefficient == 1.0);
  CHECK(std::abs(fira::kendall_tau(R1, R2).coefficient - 0.7333) <= 1e-4);
  CHECK(std::abs(fira::kendall_tau(R1, R3).coefficient - 0.6889) <= 1e-4);
  CHECK(std::abs(fira::kendall_tau(R2, R3).coefficient - 0.9556) <= 1e-4);

  fira::Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto x = random_permutation(rng, 9), y = random_permutation(rng, 9);
    CHECK(fira::kendall_tau(RankSequence(x), RankSequence(y)).coefficient ==
          doctest::Approx(brute_tau(x, y)).epsilon(1e-14));
  }
}

TEST_CASE("kendall exact p-values match full enumeration") {
  fira::Rng rng(2);
  for (int i = 0; i < 5; ++i) {
    const auto x = random_permutation(rng, 7), y = random_permutation(rng, 7);
    CHECK(oracle::rel_close(fira::kendall_tau(RankSequence(x), RankSequence(y)).p_value, enumerate_tau_p(x, y), 1e-12));
  }
  CHECK(oracle::rel_close(fira::kendall_tau(R2, R3).p_value, enumerate_tau_p(R2.values(), R3.values()), 1e-12));
}

TEST_CASE("kendall p-values agree with an external reference") {
  // Values from scipy.stats.kendalltau (exact for n = 10).
  CHECK(oracle::rel_close(fira::kendall_tau(R1, R2).p_value, 0.002212852733686067, 1e-9));
  CHECK(oracle::rel_close(fira::kendall_tau(R1, R3).p_value, 0.00468694885361552, 1e-9));
  CHECK(oracle::rel_close(fira::kendall_tau(R2, R3).p_value, 5.5114638447971785e-06, 1e-9));

  // Above the exact limit the normal approximation is used.
  std::vector<int> a(20);
  std::iota(a.begin(), a.end(), 1);
  const std::vector<int> b{5, 10, 7, 6, 15, 18, 19, 2, 3, 16, 11, 4, 13, 8, 14, 1, 17, 12, 9, 20};
  const auto r = fira::kendall_tau(RankSequence(a), RankSequence(b));
  CHECK(r.coefficient == doctest::Approx(0.1473684210526316).epsilon(1e-12));
  CHECK(oracle::rel_close(r.p_value, 0.3636458223803357, 1e-9));
}

TEST_CASE("inversion-count distribution") {
  const auto d3 = fira::inversion_count_distribution(3);
  CHECK(d3 == std::vector<double>{1, 2, 2, 1});
  const auto d10 = fira::inversion_count_distribution(10);
  CHECK(d10.size() == 46);
  CHECK(std::accumulate(d10.begin(), d10.end(), 0.0) == 3628800.0);
  for (std::size_t k = 0; k < d10.size(); ++k) CHECK(d10[k] == d10[d10.size() - 1 - k]);
}

TEST_CASE("spearman rho") {
  std::vector<int> fwd(10), rev(10);
  std::iota(fwd.begin(), fwd.end(), 1);
  std::iota(rev.rbegin(), rev.rend(), 1);
  CHECK(fira::spearman_rho(RankSequence(fwd), RankSequence(rev)).coefficient == -1.0);
  CHECK(fira::spearman_rho(R1, R1).coefficient == 1.0);
  CHECK(std::abs(fira::spearman_rho(R1, R3).coefficient - 0.8303) <= 1e-4);
  CHECK(std::abs(fira::spearman_rho(R1, R2).coefficient - 0.8545) <= 1e-4);
  CHECK(std::abs(fira::spearman_rho(R2, R3).coefficient - 0.9879) <= 1e-4);

  // Values from scipy.stats.spearmanr.
  CHECK(oracle::rel_close(fira::spearman_rho(R1, R2).p_value, 0.0016368033159867143, 1e-9));
  CHECK(oracle::rel_close(fira::spearman_rho(R1, R3).p_value, 0.0029402270232795065, 1e-9));
  CHECK(oracle::rel_close(fira::spearman_rho(R2, R3).p_value, 9.307459988955517e-08, 1e-9));
  CHECK(fira::spearman_rho(RankSequence({1, 2}), RankSequence({2, 1})).p_value == 1.0);
}

TEST_CASE("trace to ranking") {
  CHECK(fira::trace_to_ranking({0.3, 0.1, 0.2}).values() == std::vector<int>{1, 3, 2});
  CHECK(fira::trace_to_ranking({0.5, 0.5, 0.5, 0.5}).values() == std::vector<int>{1, 2, 3, 4});
  CHECK_THROWS_AS(fira::trace_to_ranking({0.1, std::numeric_limits<double>::quiet_NaN()}),
                  fira::ParameterError);
}

TEST_CASE("variance simulation basics") {
  fira::VarianceSimConfig cfg;
  cfg.trials = 3000;
  cfg.rank = 1;
  const auto one = fira::simulate_variance(cfg, 1);
  CHECK(one.var_phi == one.var_psi);
  CHECK(one.var_phi_sq == one.var_psi_sq);

  cfg.rank = 8;
  const auto a = fira::simulate_variance(cfg, 1);
  const auto b = fira::simulate_variance(cfg, 3);
  CHECK(a.var_phi == b.var_phi);
  CHECK(a.var_psi_sq == b.var_psi_sq);
  CHECK(a.var_phi < a.var_psi);

  cfg.trials = 1;
  CHECK_THROWS_AS(fira::simulate_variance(cfg), fira::ParameterError);
  cfg.trials = 100;
  cfg.beta2 = 1.0;
  CHECK_THROWS_AS(fira::simulate_variance(cfg), fira::ParameterError);
}

TEST_CASE("psi moments match the scaled inverse chi-square model") {
  // With beta2 close to 1 the EMA is nearly a plain sum of h squared normals,
  // so psi^2 ~ h / chi^2_h with mean h / (h - 2).
  fira::VarianceSimConfig cfg;
  cfg.rank = 4;
  cfg.history_length = 41;
  cfg.beta2 = 0.999999;
  cfg.trials = 20000;
  const auto r = fira::simulate_variance(cfg, 1);
  const double h = 40.0;
  CHECK(oracle::rel_close(r.mean_psi_sq, h / (h - 2.0), 0.01));
  const double var = 2.0 * h * h / ((h - 2.0) * (h - 2.0) * (h - 4.0));
  CHECK(oracle::rel_close(r.var_psi_sq, var, 0.05));
}
