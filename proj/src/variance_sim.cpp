#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "fira/analysis.hpp"
#include "fira/error.hpp"
#include "fira/random.hpp"

namespace fira {

namespace {

constexpr std::size_t kBlockTrials = 1024;

// Welford accumulator with Chan's merge.
struct Moments {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    count += 1.0;
    const double delta = x - mean;
    mean += delta / count;
    m2 += delta * (x - mean);
  }

  void merge(const Moments& other) {
    if (other.count == 0.0) return;
    const double total = count + other.count;
    const double delta = other.mean - mean;
    mean += delta * other.count / total;
    m2 += other.m2 + delta * delta * count * other.count / total;
    count = total;
  }

  double variance() const { return count > 1.0 ? m2 / (count - 1.0) : 0.0; }
};

struct BlockStats {
  Moments phi, psi, phi_sq, psi_sq;

  void merge(const BlockStats& o) {
    phi.merge(o.phi);
    psi.merge(o.psi);
    phi_sq.merge(o.phi_sq);
    psi_sq.merge(o.psi_sq);
  }
};

BlockStats run_block(const VarianceSimConfig& cfg, std::size_t first, std::size_t last) {
  const Rng root(cfg.seed);
  const std::size_t t = cfg.history_length;
  const std::size_t history = cfg.exclude_current ? t - 1 : t;
  const double numerator = (1.0 - std::pow(cfg.beta2, static_cast<double>(history))) /
                           (1.0 - cfg.beta2);

  std::vector<double> psi_sq(cfg.rank);
  std::vector<double> current_sq(cfg.rank);
  BlockStats stats;
  for (std::size_t trial = first; trial < last; ++trial) {
    Rng rng = root.split(trial);
    double total_current = 0.0;
    do {
      total_current = 0.0;
      for (std::size_t i = 0; i < cfg.rank; ++i) {
        double ema = 0.0;
        double last_sq = 0.0;
        for (std::size_t j = 0; j < t; ++j) {
          const double g = cfg.sigma * rng.normal();
          last_sq = g * g;
          if (j < history) ema = cfg.beta2 * ema + last_sq;
        }
        psi_sq[i] = numerator / ema;
        current_sq[i] = last_sq;
        total_current += last_sq;
      }
    } while (total_current == 0.0);

    double phi_sq = 0.0;
    for (std::size_t i = 0; i < cfg.rank; ++i) {
      phi_sq += (current_sq[i] / total_current) * psi_sq[i];
      stats.psi_sq.add(psi_sq[i]);
      stats.psi.add(std::sqrt(psi_sq[i]));
    }
    stats.phi_sq.add(phi_sq);
    stats.phi.add(std::sqrt(phi_sq));
  }
  return stats;
}

}  // namespace

void VarianceSimConfig::validate() const {
  if (rank < 1) throw ParameterError("variance sim: rank must be >= 1");
  if (history_length < 2) throw ParameterError("variance sim: history length must be >= 2");
  if (trials < 2) throw ParameterError("variance sim: need at least two trials");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ParameterError("variance sim: beta2 must be in (0, 1)");
  if (!(sigma > 0.0)) throw ParameterError("variance sim: sigma must be > 0");
}

VarianceSimResult simulate_variance(const VarianceSimConfig& config, unsigned threads) {
  config.validate();
  const std::size_t blocks = (config.trials + kBlockTrials - 1) / kBlockTrials;
  std::vector<BlockStats> results(blocks);

  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, blocks));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t b = next++; b < blocks; b = next++) {
      const std::size_t first = b * kBlockTrials;
      results[b] = run_block(config, first, std::min(config.trials, first + kBlockTrials));
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
  }

  BlockStats total;
  for (const BlockStats& b : results) total.merge(b);
  return {total.phi.variance(),    total.psi.variance(), total.phi_sq.variance(),
          total.psi_sq.variance(), total.phi_sq.mean,    total.psi_sq.mean};
}

}  // namespace fira
