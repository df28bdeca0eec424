#pragma once

#include <span>
#include <vector>

#include "raresim/dynamics.hpp"
#include "raresim/netbias.hpp"

namespace raresim {

// Smooth stand-in for the hard success indicator:
//   f(x) = s * tanh(|x - B|^2 - (r + 0.02)^2).
// r anneals from 1.0 to 0.05 over training; the 0.02 pad is fixed.
struct SmoothIndicatorParams {
  double s = 10.0;
  double r = 1.0;

  static constexpr double kRadiusPad = 0.02;
  void validate() const;
};

double f_smooth(Position2 terminal, Position2 target, const SmoothIndicatorParams& ind);
Vec2 f_smooth_gradient(Position2 terminal, Position2 target, const SmoothIndicatorParams& ind);

// log(dQ/dP) of a path: sum_t (|noise_P_t|^2 - |noise_t|^2) / (2 dt), where
// traj.noises are the draws under the biased dynamics and noises_P recovers
// the same path under the original potential alone.
double log_likelihood_ratio(const Trajectory& traj, const NoiseSeq& noises_P,
                            const SimConfig& cfg);

struct ModeALoss {
  double loss = 0.0;
  double kl = 0.0;      // indicator-gated likelihood-ratio part
  double smooth = 0.0;  // mean smooth-indicator penalty
  std::vector<LossTerm> terms;
};

// Exploration objective over a batch generated at the current parameters:
//   loss = mean[ log(dQ/dP) 1(success) + f_smooth(terminal) ].
// The loss terms encode the parameter dependence with positions treated as
// fixed evaluation points: the step-t bias gradient enters the recovered
// noise (KL part) and, additively, the terminal position (smooth part), so
// each visited position x_{t-1} carries one combined gradient weight.
ModeALoss mode_a_loss(std::span<const Trajectory> batch, const PotentialSpec& potential,
                      const SimConfig& cfg, const SmoothIndicatorParams& ind);

struct ModeBLoss {
  double loss = 0.0;
  std::vector<LossTerm> terms;
};

// Maximum-likelihood objective on stored successful paths:
//   loss = mean_i sum_t |noise_Q_t|^2 / (2 dt),
//   noise_Q_t = (x_t - x_{t-1} + grad(U + U_B)(x_{t-1}) dt/(m gamma)) / sqrt(eps).
// Minimizing it maximizes the stored paths' likelihood under the biased
// dynamics; only positions are consulted.
ModeBLoss mode_b_loss(const BiasNetParams& params, std::span<const Trajectory> stored,
                      const PotentialSpec& potential, const SimConfig& cfg, int threads = 0);

}  // namespace raresim
