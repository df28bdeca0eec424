#include "raresim/estimator.hpp"

#include <chrono>
#include <cmath>

#include "raresim/parallel.hpp"

namespace raresim {

namespace {

constexpr double kNormal95 = 1.96;

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

double ess(const WeightSet& set) {
  double sum = 0.0, sum2 = 0.0;
  for (double w : set.weights) {
    if (w < 0 || !std::isfinite(w)) throw ContractViolation("ess: weights must be finite and >= 0");
    sum += w;
    sum2 += w * w;
  }
  if (sum2 == 0.0) throw UndefinedStatistic("ess undefined: all weights are zero");
  return sum * sum / sum2;
}

double cv(std::span<const double> contributions) {
  if (contributions.size() < 2) throw ContractViolation("cv: need at least two contributions");
  double mean = 0.0;
  for (double c : contributions) mean += c;
  mean /= static_cast<double>(contributions.size());
  if (mean == 0.0) throw UndefinedStatistic("cv undefined: zero mean");
  double ss = 0.0;
  for (double c : contributions) ss += (c - mean) * (c - mean);
  const double sd = std::sqrt(ss / static_cast<double>(contributions.size() - 1));
  return sd / mean;
}

Estimate estimate_from_counts(long successes, long samples) {
  if (samples < 1) throw ContractViolation("estimate_from_counts: samples must be >= 1");
  Estimate est;
  est.n_samples = samples;
  est.n_success = successes;
  est.p_hat = static_cast<double>(successes) / static_cast<double>(samples);
  est.success_rate = est.p_hat;
  if (successes == 0) {
    est.degenerate = true;
    return est;
  }
  // Binary contributions: sample variance p(1-p) n/(n-1).
  const double var =
      est.p_hat * (1.0 - est.p_hat) * static_cast<double>(samples) / static_cast<double>(samples - 1);
  const double sd = std::sqrt(var);
  est.ci_half_width = kNormal95 * sd / std::sqrt(static_cast<double>(samples));
  est.cv = sd / est.p_hat;
  est.ess = static_cast<double>(successes);  // unit weights
  est.ess_ratio_samples = est.ess / static_cast<double>(samples);
  est.ess_ratio_successes = 1.0;
  return est;
}

namespace {

struct ChunkAccum {
  double sum_c = 0.0;    // per-sample contributions (0 for failures)
  double sum_c2 = 0.0;
  double sum_w = 0.0;    // successful weights
  double sum_w2 = 0.0;
  long successes = 0;
  long diverged = 0;
  long overflow = 0;
};

}  // namespace

Estimate importance_estimate(const PotentialSpec& potential, const BiasPotential* bias,
                             const SimConfig& cfg, long samples, int threads,
                             const SuccessIndexSink& on_success) {
  if (samples < 1) throw ContractViolation("importance_estimate: samples must be >= 1");
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();

  const double sqrt_dt = std::sqrt(cfg.dt);
  const double two_dt = 2.0 * cfg.dt;
  const double bias_noise_scale = cfg.dt * cfg.inv_mass_damping() / std::sqrt(cfg.epsilon());

  constexpr std::size_t kChunk = 256;
  const std::size_t n = static_cast<std::size_t>(samples);
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<ChunkAccum> partials(n_chunks);
  std::vector<std::vector<long>> chunk_successes(on_success ? n_chunks : 0);

  parallel_for_chunks(n, kChunk, threads, [&](std::size_t begin, std::size_t end) {
    ChunkAccum acc;
    std::vector<long>* succ_list = on_success ? &chunk_successes[begin / kChunk] : nullptr;
    for (std::size_t i = begin; i < end; ++i) {
      RngStream stream(derive_seed(cfg.seed, {kStreamEstimate, i}));
      const Position2 start = stream.uniform_in_disc(cfg.start_center, cfg.effective_start_radius());
      double log_ratio = 0.0;  // log(dQ/dP) accumulated per step
      try {
        const RolloutSummary summary = integrate(
            potential, bias, cfg, start,
            [&](int) { return stream.gaussian_pair() * sqrt_dt; },
            [&](int, Position2 x_prev, Vec2 noise, Position2) {
              if (!bias) return;
              // Recovered noise under U alone: noise - dt/(m gamma sqrt(eps)) grad U_B.
              const Vec2 noise_p = noise - bias->drift_gradient(x_prev) * bias_noise_scale;
              log_ratio += (noise_p.norm2() - noise.norm2()) / two_dt;
            });
        if (summary.success) {
          const double log_w = -log_ratio;
          if (log_w > 700.0) {
            ++acc.overflow;
          } else {
            const double w = std::exp(log_w);
            ++acc.successes;
            acc.sum_c += w;
            acc.sum_c2 += w * w;
            acc.sum_w += w;
            acc.sum_w2 += w * w;
            if (succ_list) succ_list->push_back(static_cast<long>(i));
          }
        }
      } catch (const SimulationDiverged&) {
        ++acc.diverged;
      }
    }
    partials[begin / kChunk] = acc;
  });

  ChunkAccum total;
  for (const ChunkAccum& acc : partials) {
    total.sum_c += acc.sum_c;
    total.sum_c2 += acc.sum_c2;
    total.sum_w += acc.sum_w;
    total.sum_w2 += acc.sum_w2;
    total.successes += acc.successes;
    total.diverged += acc.diverged;
    total.overflow += acc.overflow;
  }
  if (on_success)
    for (const auto& list : chunk_successes)
      for (long idx : list) on_success(idx);

  Estimate est;
  est.n_samples = samples;
  est.n_success = total.successes;
  est.diverged = total.diverged;
  est.overflow_weights = total.overflow;
  est.success_rate = static_cast<double>(total.successes) / static_cast<double>(samples);
  est.p_hat = total.sum_c / static_cast<double>(samples);
  est.wall_seconds = elapsed_seconds(t_start);
  if (total.successes == 0) {
    est.degenerate = true;
    return est;
  }
  if (samples > 1) {
    const double mean = est.p_hat;
    const double var = std::max(
        0.0, (total.sum_c2 - static_cast<double>(samples) * mean * mean) /
                 static_cast<double>(samples - 1));
    const double sd = std::sqrt(var);
    est.ci_half_width = kNormal95 * sd / std::sqrt(static_cast<double>(samples));
    est.cv = mean != 0.0 ? sd / mean : 0.0;
  }
  est.ess = total.sum_w * total.sum_w / total.sum_w2;
  est.ess_ratio_samples = est.ess / static_cast<double>(samples);
  est.ess_ratio_successes = est.ess / static_cast<double>(total.successes);
  est.degenerate = total.overflow > 0;
  est.wall_seconds = elapsed_seconds(t_start);
  return est;
}

Estimate monte_carlo_estimate(const PotentialSpec& potential, const SimConfig& cfg, long samples,
                              int threads, const SuccessIndexSink& on_success) {
  return importance_estimate(potential, nullptr, cfg, samples, threads, on_success);
}

namespace {

double fit_slope(std::span<const double> xs, std::span<const double> ys) {
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  return sxy / sxx;
}

}  // namespace

ScalingStudy scaling_study(const PotentialSpec& potential, const BiasPotential* bias,
                           const SimConfig& cfg, std::span<const long> sample_counts,
                           int replications, int threads) {
  if (sample_counts.empty()) throw ContractViolation("scaling_study: no sample counts");
  for (std::size_t i = 1; i < sample_counts.size(); ++i)
    if (sample_counts[i] <= sample_counts[i - 1])
      throw ContractViolation("scaling_study: sample counts must be increasing");
  if (replications < 2) throw ContractViolation("scaling_study: need at least two replications");

  ScalingStudy study;
  study.replications = replications;

  for (std::size_t ci = 0; ci < sample_counts.size(); ++ci) {
    const long count = sample_counts[ci];
    std::vector<double> p_hats, esses, times;
    p_hats.reserve(replications);
    for (int rep = 0; rep < replications; ++rep) {
      SimConfig rep_cfg = cfg;
      rep_cfg.seed = derive_seed(cfg.seed, {kStreamScaling, ci, static_cast<std::uint64_t>(rep)});
      const Estimate est = importance_estimate(potential, bias, rep_cfg, count, threads);
      p_hats.push_back(est.p_hat);
      esses.push_back(est.ess);
      times.push_back(est.wall_seconds);
    }
    double mean_p = 0.0;
    for (double p : p_hats) mean_p += p;
    mean_p /= p_hats.size();
    double ss = 0.0;
    for (double p : p_hats) ss += (p - mean_p) * (p - mean_p);
    ScalingRow row;
    row.n = count;
    row.std_p_hat = std::sqrt(ss / (p_hats.size() - 1));
    for (double e : esses) row.mean_ess += e;
    row.mean_ess /= esses.size();
    for (double t : times) row.mean_seconds += t;
    row.mean_seconds /= times.size();
    study.rows.push_back(row);
  }

  std::vector<double> log_n, log_std, log_ess, log_time;
  for (const ScalingRow& row : study.rows) {
    log_n.push_back(std::log(static_cast<double>(row.n)));
    log_std.push_back(std::log(row.std_p_hat));
    log_ess.push_back(std::log(row.mean_ess));
    log_time.push_back(std::log(std::max(row.mean_seconds, 1e-9)));
  }
  study.slope_std = fit_slope(log_n, log_std);
  study.slope_ess = fit_slope(log_n, log_ess);
  study.slope_time = fit_slope(log_n, log_time);
  return study;
}

}  // namespace raresim
