#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "raresim/errors.hpp"
#include "raresim/potentials.hpp"
#include "raresim/rng.hpp"
#include "raresim/vec2.hpp"

namespace raresim {

inline constexpr double kBoltzmann = 8.617e-5;

// Additive bias potential seen by the integrator. Implementations must be
// safe for concurrent read-only use.
class BiasPotential {
 public:
  virtual ~BiasPotential() = default;
  virtual double energy(Position2 p) const = 0;
  virtual Vec2 drift_gradient(Position2 p) const = 0;
};

// Physical and run parameters of the discretized overdamped dynamics
//   dx = -grad(U)/(m*gamma) dt + sqrt(eps) N(0, dt),  eps = 2 kB T/(m gamma).
struct SimConfig {
  double temperature = 1200.0;  // kelvin
  double mass = 1.0;
  double damping = 1.0;
  double dt = 0.01;            // time units
  int max_steps = 500;         // N, the step deadline
  double capture_radius = 0.05;  // delta, length units
  Position2 start_center;      // A
  Position2 target;            // B
  // Start positions are uniform in a disc around A; defaults to
  // capture_radius when negative. Zero pins the start to A exactly.
  double start_radius = -1.0;
  // When false the trajectory always runs the full N steps and success is
  // judged at the terminal position only (used by analytic oracles).
  bool stop_at_capture = true;
  std::uint64_t seed = 0;

  double epsilon() const { return 2.0 * kBoltzmann * temperature / (mass * damping); }
  double inv_mass_damping() const { return 1.0 / (mass * damping); }
  double effective_start_radius() const { return start_radius < 0 ? capture_radius : start_radius; }
  void validate() const;
};

// One sampled path: L+1 positions and the L noise draws that generated it.
struct Trajectory {
  std::vector<Position2> positions;
  std::vector<Vec2> noises;
  std::optional<int> terminated_at;  // step of first capture, if any
  bool success = false;
  std::uint64_t seed = 0;

  int steps() const { return static_cast<int>(noises.size()); }
  Position2 terminal() const { return positions.back(); }
};

using NoiseSeq = std::vector<Vec2>;

enum class Channel { upper, lower, none };

std::string to_string(Channel c);
Channel channel_from_string(const std::string& name);

struct RolloutSummary {
  bool success = false;
  int steps = 0;
  Position2 terminal;
};

// Core integrator, shared by the recording and streaming paths so their
// arithmetic and draw order are identical. noise_fn(t) must return the raw
// N(0, dt) pair for step t (1-based); observe(t, x_prev, noise, x_new) is
// called after each accepted step.
template <class NoiseFn, class Observer>
RolloutSummary integrate(const PotentialSpec& potential, const BiasPotential* bias,
                         const SimConfig& cfg, Position2 start, NoiseFn&& noise_fn,
                         Observer&& observe) {
  const double sqrt_eps = std::sqrt(cfg.epsilon());
  const double drift_scale = cfg.dt * cfg.inv_mass_damping();
  const double delta2 = cfg.capture_radius * cfg.capture_radius;

  RolloutSummary out;
  Position2 x = start;
  out.terminal = x;
  if (cfg.stop_at_capture && (x - cfg.target).norm2() < delta2) {
    out.success = true;
    return out;
  }
  for (int t = 1; t <= cfg.max_steps; ++t) {
    Vec2 g = gradient(potential, x);
    if (bias) g += bias->drift_gradient(x);
    const Vec2 noise = noise_fn(t);
    const Position2 x_new = x - g * drift_scale + noise * sqrt_eps;
    if (!x_new.finite()) throw SimulationDiverged(t);
    observe(t, x, noise, x_new);
    x = x_new;
    out.steps = t;
    out.terminal = x;
    if (cfg.stop_at_capture && (x - cfg.target).norm2() < delta2) {
      out.success = true;
      return out;
    }
  }
  out.success = (out.terminal - cfg.target).norm2() < delta2;
  return out;
}

// Samples a start position and rolls one full trajectory, recording every
// noise draw. Deterministic given the stream seed.
Trajectory rollout(const PotentialSpec& potential, const BiasPotential* bias, const SimConfig& cfg,
                   RngStream& stream);

// Replays a trajectory from explicit noises (tests, replay checks).
Trajectory rollout_with_noises(const PotentialSpec& potential, const BiasPotential* bias,
                               const SimConfig& cfg, Position2 start,
                               const std::vector<Vec2>& noises);

// The noise sequence that would generate this path under `potential` alone:
//   noise_t = (x_t - x_{t-1} + grad(U)(x_{t-1}) dt/(m gamma)) / sqrt(eps).
NoiseSeq recover_noises(const Trajectory& traj, const PotentialSpec& potential,
                        const SimConfig& cfg);

// Transition channel of a successful path: the sign of y, linearly
// interpolated at the first crossing of x = 0. Unsuccessful paths map to none.
Channel classify_channel(const Trajectory& traj);

}  // namespace raresim
