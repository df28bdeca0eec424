#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "raresim/dynamics.hpp"

namespace raresim {

// Probability estimate with its statistical diagnostics.
struct Estimate {
  double p_hat = 0.0;
  double ci_half_width = 0.0;  // 95% normal half width over per-sample contributions
  double cv = 0.0;             // sample std / mean over all contributions
  double ess = 0.0;            // over successful-trajectory weights
  double ess_ratio_samples = 0.0;    // ESS / M
  double ess_ratio_successes = 0.0;  // ESS / #successes
  double success_rate = 0.0;
  long n_samples = 0;
  long n_success = 0;
  bool degenerate = false;   // zero successes: p_hat and CI are not informative
  long overflow_weights = 0;  // weights beyond exp(700), excluded and flagged
  long diverged = 0;          // biased rollouts that blew up, counted as failures
  double wall_seconds = 0.0;
};

struct WeightSet {
  std::vector<double> weights;  // successful trajectories only
  long total_samples = 0;
};

// (sum W)^2 / sum W^2. Throws UndefinedStatistic when no weight is positive.
double ess(const WeightSet& weights);

// Sample standard deviation (n-1) divided by the sample mean.
// Throws UndefinedStatistic when the mean is zero.
double cv(std::span<const double> contributions);

// Builds the Estimate fields from binomial counts (Monte Carlo bookkeeping).
Estimate estimate_from_counts(long successes, long samples);

// Optional hook receiving the index of every successful sample, so callers
// can replay and persist those trajectories.
using SuccessIndexSink = std::function<void(long index)>;

// Importance-sampling estimate under the biased dynamics: rolls M
// trajectories with per-index streams derived from cfg.seed, weighs each
// success by exp(-log(dQ/dP)) and averages over all M. With a null bias this
// is exactly the Monte Carlo estimator (all weights are one).
Estimate importance_estimate(const PotentialSpec& potential, const BiasPotential* bias,
                             const SimConfig& cfg, long samples, int threads = 0,
                             const SuccessIndexSink& on_success = nullptr);

// Plain Monte Carlo under the original dynamics.
Estimate monte_carlo_estimate(const PotentialSpec& potential, const SimConfig& cfg, long samples,
                              int threads = 0, const SuccessIndexSink& on_success = nullptr);

struct ScalingRow {
  long n = 0;
  double std_p_hat = 0.0;
  double mean_ess = 0.0;
  double mean_seconds = 0.0;
};

struct ScalingStudy {
  std::vector<ScalingRow> rows;
  int replications = 0;
  double slope_std = 0.0;   // log-log slope of std vs n (expect ~ -1/2)
  double slope_ess = 0.0;   // log-log slope of ESS vs n (expect ~ 1)
  double slope_time = 0.0;  // log-log slope of time vs n (expect <= ~1)
};

// For each sample count: `replications` independent estimates; reports the
// spread of p_hat, mean ESS and mean wall time, plus fitted log-log slopes.
ScalingStudy scaling_study(const PotentialSpec& potential, const BiasPotential* bias,
                           const SimConfig& cfg, std::span<const long> sample_counts,
                           int replications = 20, int threads = 0);

}  // namespace raresim
