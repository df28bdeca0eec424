#include "raresim/objective.hpp"

#include <cmath>

#include "raresim/parallel.hpp"

namespace raresim {

void SmoothIndicatorParams::validate() const {
  if (!(s > 0)) throw ConfigError("smooth indicator scale s must be > 0");
  if (!(r >= 0.05 && r <= 1.0)) throw ConfigError("smooth indicator radius r must be in [0.05, 1]");
}

double f_smooth(Position2 terminal, Position2 target, const SmoothIndicatorParams& ind) {
  const double pad = ind.r + SmoothIndicatorParams::kRadiusPad;
  return ind.s * std::tanh((terminal - target).norm2() - pad * pad);
}

Vec2 f_smooth_gradient(Position2 terminal, Position2 target, const SmoothIndicatorParams& ind) {
  const double pad = ind.r + SmoothIndicatorParams::kRadiusPad;
  const double th = std::tanh((terminal - target).norm2() - pad * pad);
  return (terminal - target) * (2.0 * ind.s * (1.0 - th * th));
}

double log_likelihood_ratio(const Trajectory& traj, const NoiseSeq& noises_P,
                            const SimConfig& cfg) {
  if (noises_P.size() != traj.noises.size())
    throw ContractViolation("log_likelihood_ratio: noise sequence length mismatch");
  double acc = 0.0;
  for (std::size_t t = 0; t < noises_P.size(); ++t)
    acc += noises_P[t].norm2() - traj.noises[t].norm2();
  return acc / (2.0 * cfg.dt);
}

ModeALoss mode_a_loss(std::span<const Trajectory> batch, const PotentialSpec& potential,
                      const SimConfig& cfg, const SmoothIndicatorParams& ind) {
  if (batch.empty()) throw ContractViolation("mode_a_loss: empty batch");
  ind.validate();

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const double inv_md = cfg.inv_mass_damping();
  const double kl_weight = inv_md / std::sqrt(cfg.epsilon());

  ModeALoss out;
  std::size_t n_terms = 0;
  for (const Trajectory& traj : batch) n_terms += traj.noises.size();
  out.terms.reserve(n_terms);

  for (const Trajectory& traj : batch) {
    const NoiseSeq recovered = recover_noises(traj, potential, cfg);
    const double fs = f_smooth(traj.terminal(), cfg.target, ind);
    out.smooth += fs * inv_n;
    if (traj.success) out.kl += log_likelihood_ratio(traj, recovered, cfg) * inv_n;

    // Gradient structure, positions frozen as evaluation points: the step-t
    // bias gradient perturbs the recovered noise (successful paths) and,
    // via the injected drift, the terminal position inside f_smooth.
    const Vec2 fgrad = f_smooth_gradient(traj.terminal(), cfg.target, ind);
    const Vec2 smooth_w = fgrad * (-cfg.dt * inv_md * inv_n);
    for (int t = 0; t < traj.steps(); ++t) {
      LossTerm term;
      term.position = traj.positions[t];
      term.gradient_weight = smooth_w;
      if (traj.success) term.gradient_weight += recovered[t] * (-kl_weight * inv_n);
      out.terms.push_back(term);
    }
  }
  out.loss = out.kl + out.smooth;
  return out;
}

ModeBLoss mode_b_loss(const BiasNetParams& params, std::span<const Trajectory> stored,
                      const PotentialSpec& potential, const SimConfig& cfg, int threads) {
  if (stored.empty()) throw ContractViolation("mode_b_loss: empty dataset");

  const double inv_n = 1.0 / static_cast<double>(stored.size());
  const double inv_md = cfg.inv_mass_damping();
  const double sqrt_eps = std::sqrt(cfg.epsilon());
  const double drift_scale = cfg.dt * inv_md;
  const double term_weight = inv_md / sqrt_eps * inv_n;

  std::size_t n_terms = 0;
  for (const Trajectory& traj : stored) n_terms += traj.positions.size() - 1;

  ModeBLoss out;
  out.terms.assign(n_terms, LossTerm{});
  std::vector<double> path_loss(stored.size(), 0.0);
  std::vector<std::size_t> offsets(stored.size());
  std::size_t off = 0;
  for (std::size_t i = 0; i < stored.size(); ++i) {
    offsets[i] = off;
    off += stored[i].positions.size() - 1;
  }

  parallel_for_chunks(stored.size(), 1, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Trajectory& traj = stored[i];
      double acc = 0.0;
      std::size_t k = offsets[i];
      for (std::size_t t = 1; t < traj.positions.size(); ++t, ++k) {
        const Position2& prev = traj.positions[t - 1];
        const Vec2 g = gradient(potential, prev) + bias_gradient(params, prev);
        const Vec2 noise_q = (traj.positions[t] - prev + g * drift_scale) / sqrt_eps;
        acc += noise_q.norm2();
        out.terms[k].position = prev;
        out.terms[k].gradient_weight = noise_q * term_weight;
      }
      path_loss[i] = acc / (2.0 * cfg.dt);
    }
  });

  for (double v : path_loss) out.loss += v * inv_n;
  return out;
}

}  // namespace raresim
