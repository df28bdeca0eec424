#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "raresim/dynamics.hpp"
#include "raresim/netbias.hpp"
#include "raresim/objective.hpp"

namespace raresim {

enum class Optimizer { sgd, adam };
enum class RScheduleShape { linear, cosine };

std::string to_string(Optimizer opt);
Optimizer optimizer_from_string(const std::string& name);
std::string to_string(RScheduleShape shape);
RScheduleShape r_shape_from_string(const std::string& name);

struct TrainConfig {
  int batch_size = 512;
  int steps = 300;
  double learning_rate = 1e-3;
  double r_start = 1.0;
  double r_end = 0.05;
  RScheduleShape r_shape = RScheduleShape::linear;
  double smooth_scale = 10.0;  // s
  Optimizer optimizer = Optimizer::sgd;
  int checkpoint_every = 25;
  std::uint64_t seed = 0;
  std::vector<int> hidden_widths = {64, 64, 64, 64};
  FeatureMode feature_mode = FeatureMode::with_control_features;
  // Warm start; when absent, parameters come from init_params(seed, ...).
  std::optional<BiasNetParams> initial_params;

  void validate() const;
};

struct TrainStepRecord {
  int step = 0;
  double loss = 0.0;
  double kl = 0.0;
  double smooth = 0.0;
  double success_rate = 0.0;
  double r = 0.0;
  double seconds = 0.0;
  bool skipped = false;  // a rollout diverged or the gradient was non-finite
};

struct TrainReport {
  std::vector<TrainStepRecord> steps;
  int diverged_steps = 0;
  int skipped_updates = 0;
  double total_seconds = 0.0;

  std::string to_csv() const;  // step,loss,kl,smooth,success_rate,r,seconds
};

// Annealed smooth-indicator radius: r_start at step 0 down to exactly r_end
// at step == steps, monotone non-increasing in between.
double anneal_r(int step, const TrainConfig& cfg);

// Adam moment buffers; zero-initialized lazily to the parameter shape.
struct OptimizerState {
  long t = 0;
  std::optional<ParamGradient> m;
  std::optional<ParamGradient> v;
};

// One parameter update in place. Returns false (and leaves the parameters
// untouched) when the gradient is non-finite.
bool update_params(BiasNetParams& params, const ParamGradient& grad, double learning_rate,
                   Optimizer optimizer, OptimizerState& state);

using CheckpointSink = std::function<void(int step, const BiasNetParams& params)>;

struct TrainResult {
  BiasNetParams params;
  TrainReport report;
};

// Mode A (exploration): per training step, roll a batch under the current
// bias, assemble the exploration loss at the annealed radius, update the
// parameters. Deterministic given the seeds for any thread count. Throws
// TrainingUnstable when more than 10% of steps are lost to divergence.
TrainResult train_explore(const PotentialSpec& potential, const SimConfig& sim_cfg,
                          const TrainConfig& train_cfg, int threads = 0,
                          const CheckpointSink& checkpoint_sink = nullptr);

// Mode B (combine): mini-batch descent of the stored-path likelihood loss;
// no new rollouts. The dataset must be non-empty successful paths.
TrainResult train_combine(std::span<const Trajectory> stored, const PotentialSpec& potential,
                          const SimConfig& sim_cfg, const TrainConfig& train_cfg, int threads = 0,
                          const CheckpointSink& checkpoint_sink = nullptr);

}  // namespace raresim
