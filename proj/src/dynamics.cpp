#include "raresim/dynamics.hpp"

namespace raresim {

void SimConfig::validate() const {
  if (!(dt > 0)) throw ConfigError("dt must be > 0");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (!(capture_radius > 0)) throw ConfigError("capture_radius must be > 0");
  if (!(temperature > 0)) throw ConfigError("temperature must be > 0");
  if (!(mass > 0) || !(damping > 0)) throw ConfigError("mass and damping must be > 0");
  if (!(epsilon() > 0)) throw ConfigError("epsilon must be > 0");
  if (!start_center.finite() || !target.finite()) throw ConfigError("A and B must be finite");
}

std::string to_string(Channel c) {
  switch (c) {
    case Channel::upper: return "upper";
    case Channel::lower: return "lower";
    case Channel::none: return "none";
  }
  return "none";
}

Channel channel_from_string(const std::string& name) {
  if (name == "upper" || name == "U") return Channel::upper;
  if (name == "lower" || name == "L") return Channel::lower;
  if (name == "none" || name == "-") return Channel::none;
  throw ConfigError("unknown channel '" + name + "'");
}

Trajectory rollout(const PotentialSpec& potential, const BiasPotential* bias, const SimConfig& cfg,
                   RngStream& stream) {
  cfg.validate();
  const double sqrt_dt = std::sqrt(cfg.dt);
  const Position2 start = stream.uniform_in_disc(cfg.start_center, cfg.effective_start_radius());

  Trajectory traj;
  traj.seed = stream.seed();
  traj.positions.reserve(cfg.max_steps + 1);
  traj.noises.reserve(cfg.max_steps);
  traj.positions.push_back(start);

  const RolloutSummary summary = integrate(
      potential, bias, cfg, start,
      [&](int) { return stream.gaussian_pair() * sqrt_dt; },
      [&](int, Position2, Vec2 noise, Position2 x_new) {
        traj.noises.push_back(noise);
        traj.positions.push_back(x_new);
      });

  traj.success = summary.success;
  if (summary.success && cfg.stop_at_capture) traj.terminated_at = summary.steps;
  return traj;
}

Trajectory rollout_with_noises(const PotentialSpec& potential, const BiasPotential* bias,
                               const SimConfig& cfg, Position2 start,
                               const std::vector<Vec2>& noises) {
  cfg.validate();
  if (static_cast<int>(noises.size()) < cfg.max_steps)
    throw ContractViolation("rollout_with_noises: need max_steps noise draws");

  Trajectory traj;
  traj.positions.reserve(cfg.max_steps + 1);
  traj.noises.reserve(cfg.max_steps);
  traj.positions.push_back(start);

  const RolloutSummary summary = integrate(
      potential, bias, cfg, start, [&](int t) { return noises[t - 1]; },
      [&](int, Position2, Vec2 noise, Position2 x_new) {
        traj.noises.push_back(noise);
        traj.positions.push_back(x_new);
      });

  traj.success = summary.success;
  if (summary.success && cfg.stop_at_capture) traj.terminated_at = summary.steps;
  return traj;
}

NoiseSeq recover_noises(const Trajectory& traj, const PotentialSpec& potential,
                        const SimConfig& cfg) {
  const double inv_sqrt_eps = 1.0 / std::sqrt(cfg.epsilon());
  const double drift_scale = cfg.dt * cfg.inv_mass_damping();

  NoiseSeq recovered;
  recovered.reserve(traj.positions.size() - 1);
  for (std::size_t t = 1; t < traj.positions.size(); ++t) {
    const Position2& prev = traj.positions[t - 1];
    if (!prev.finite() || !traj.positions[t].finite())
      throw ContractViolation("recover_noises: non-finite position");
    const Vec2 g = gradient(potential, prev);
    recovered.push_back((traj.positions[t] - prev + g * drift_scale) * inv_sqrt_eps);
  }
  return recovered;
}

Channel classify_channel(const Trajectory& traj) {
  if (!traj.success) return Channel::none;
  for (std::size_t t = 1; t < traj.positions.size(); ++t) {
    const Position2& a = traj.positions[t - 1];
    const Position2& b = traj.positions[t];
    if ((a.x < 0.0 && b.x >= 0.0) || (a.x >= 0.0 && b.x < 0.0)) {
      const double frac = (0.0 - a.x) / (b.x - a.x);
      const double y_cross = a.y + frac * (b.y - a.y);
      return y_cross >= 0.0 ? Channel::upper : Channel::lower;
    }
  }
  return Channel::none;
}

}  // namespace raresim
