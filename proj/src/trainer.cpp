#include "raresim/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "raresim/bias_potential.hpp"
#include "raresim/parallel.hpp"
#include "raresim/text_io.hpp"

namespace raresim {

std::string to_string(Optimizer opt) { return opt == Optimizer::sgd ? "sgd" : "adam"; }

Optimizer optimizer_from_string(const std::string& name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer '" + name + "'");
}

std::string to_string(RScheduleShape shape) {
  return shape == RScheduleShape::linear ? "linear" : "cosine";
}

RScheduleShape r_shape_from_string(const std::string& name) {
  if (name == "linear") return RScheduleShape::linear;
  if (name == "cosine") return RScheduleShape::cosine;
  throw ConfigError("unknown r-schedule shape '" + name + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be > 0");
  if (!(r_start >= r_end && r_end > 0)) throw ConfigError("need r_start >= r_end > 0");
  if (!(r_start <= 1.0 && r_end >= 0.05))
    throw ConfigError("r schedule must stay within [0.05, 1.0]");
  if (!(smooth_scale > 0)) throw ConfigError("smooth scale s must be > 0");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
  for (int w : hidden_widths)
    if (w <= 0) throw ConfigError("hidden widths must be positive");
}

double anneal_r(int step, const TrainConfig& cfg) {
  if (step < 0 || step > cfg.steps) throw ContractViolation("anneal_r: step out of range");
  if (cfg.steps == 0 || step == 0) return cfg.r_start;
  if (step == cfg.steps) return cfg.r_end;
  const double frac = static_cast<double>(step) / static_cast<double>(cfg.steps);
  if (cfg.r_shape == RScheduleShape::linear) return cfg.r_start + (cfg.r_end - cfg.r_start) * frac;
  const double w = 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
  return cfg.r_end + (cfg.r_start - cfg.r_end) * w;
}

bool update_params(BiasNetParams& params, const ParamGradient& grad, double learning_rate,
                   Optimizer optimizer, OptimizerState& state) {
  if (params.layers.size() != grad.layers.size())
    throw ContractViolation("update_params: gradient shape mismatch");
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    if (params.layers[l].w.size() != grad.layers[l].w.size() ||
        params.layers[l].b.size() != grad.layers[l].b.size())
      throw ContractViolation("update_params: gradient shape mismatch");
  if (!grad.finite()) return false;

  if (optimizer == Optimizer::sgd) {
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      DenseLayer& layer = params.layers[l];
      const DenseLayer& g = grad.layers[l];
      for (std::size_t k = 0; k < layer.w.size(); ++k) layer.w[k] -= learning_rate * g.w[k];
      for (std::size_t k = 0; k < layer.b.size(); ++k) layer.b[k] -= learning_rate * g.b[k];
    }
    return true;
  }

  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  if (!state.m) {
    state.m = ParamGradient::zeros_like(params);
    state.v = ParamGradient::zeros_like(params);
    state.t = 0;
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    DenseLayer& layer = params.layers[l];
    const DenseLayer& g = grad.layers[l];
    DenseLayer& m = state.m->layers[l];
    DenseLayer& v = state.v->layers[l];
    auto step_one = [&](double& theta, double& mi, double& vi, double gi) {
      mi = beta1 * mi + (1.0 - beta1) * gi;
      vi = beta2 * vi + (1.0 - beta2) * gi * gi;
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      theta -= learning_rate * m_hat / (std::sqrt(v_hat) + adam_eps);
    };
    for (std::size_t k = 0; k < layer.w.size(); ++k) step_one(layer.w[k], m.w[k], v.w[k], g.w[k]);
    for (std::size_t k = 0; k < layer.b.size(); ++k) step_one(layer.b[k], m.b[k], v.b[k], g.b[k]);
  }
  return true;
}

std::string TrainReport::to_csv() const {
  std::string out = "step,loss,kl,smooth,success_rate,r,seconds\n";
  for (const TrainStepRecord& rec : steps) {
    out += std::to_string(rec.step);
    out += ',';
    out += format_double(rec.loss);
    out += ',';
    out += format_double(rec.kl);
    out += ',';
    out += format_double(rec.smooth);
    out += ',';
    out += format_double(rec.success_rate);
    out += ',';
    out += format_double(rec.r);
    out += ',';
    out += format_double(rec.seconds);
    out += '\n';
  }
  return out;
}

namespace {

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

BiasNetParams make_initial_params(const SimConfig& sim_cfg, const TrainConfig& cfg) {
  if (cfg.initial_params) return *cfg.initial_params;
  return init_params(cfg.seed, cfg.hidden_widths, cfg.feature_mode, sim_cfg.start_center,
                     sim_cfg.target);
}

}  // namespace

TrainResult train_explore(const PotentialSpec& potential, const SimConfig& sim_cfg,
                          const TrainConfig& train_cfg, int threads,
                          const CheckpointSink& checkpoint_sink) {
  sim_cfg.validate();
  train_cfg.validate();
  const auto t_total = std::chrono::steady_clock::now();

  TrainResult result;
  result.params = make_initial_params(sim_cfg, train_cfg);

  OptimizerState opt_state;
  std::vector<Trajectory> batch(train_cfg.batch_size);

  for (int step = 0; step < train_cfg.steps; ++step) {
    const auto t_step = std::chrono::steady_clock::now();
    TrainStepRecord rec;
    rec.step = step;
    rec.r = anneal_r(step, train_cfg);

    const NetBias bias(result.params);
    bool diverged = false;
    try {
      parallel_for_chunks(batch.size(), 4, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          RngStream stream(derive_seed(
              train_cfg.seed, {kStreamTrainRollout, static_cast<std::uint64_t>(step), i}));
          batch[i] = rollout(potential, &bias, sim_cfg, stream);
        }
      });
    } catch (const SimulationDiverged&) {
      diverged = true;
    }

    if (!diverged) {
      int successes = 0;
      for (const Trajectory& traj : batch) successes += traj.success ? 1 : 0;
      rec.success_rate = static_cast<double>(successes) / batch.size();
    }

    if (!diverged) {
      SmoothIndicatorParams ind{train_cfg.smooth_scale, rec.r};
      const ModeALoss loss = mode_a_loss(batch, potential, sim_cfg, ind);
      rec.loss = loss.loss;
      rec.kl = loss.kl;
      rec.smooth = loss.smooth;
      const ParamGradient grad = loss_param_gradient(result.params, loss.terms, threads);
      if (!update_params(result.params, grad, train_cfg.learning_rate, train_cfg.optimizer,
                         opt_state)) {
        rec.skipped = true;
        ++result.report.skipped_updates;
      }
    } else {
      rec.skipped = true;
      ++result.report.diverged_steps;
    }

    rec.seconds = elapsed_seconds(t_step);
    result.report.steps.push_back(rec);
    if (checkpoint_sink && (step + 1) % train_cfg.checkpoint_every == 0)
      checkpoint_sink(step, result.params);
  }

  result.report.total_seconds = elapsed_seconds(t_total);
  const double diverged_frac =
      train_cfg.steps > 0
          ? static_cast<double>(result.report.diverged_steps) / train_cfg.steps
          : 0.0;
  if (diverged_frac > 0.10)
    throw TrainingUnstable("training unstable: " +
                           std::to_string(result.report.diverged_steps) + " of " +
                           std::to_string(train_cfg.steps) + " steps diverged");
  return result;
}

TrainResult train_combine(std::span<const Trajectory> stored, const PotentialSpec& potential,
                          const SimConfig& sim_cfg, const TrainConfig& train_cfg, int threads,
                          const CheckpointSink& checkpoint_sink) {
  sim_cfg.validate();
  train_cfg.validate();
  if (stored.empty()) throw ContractViolation("train_combine: empty dataset");
  for (const Trajectory& traj : stored)
    if (!traj.success) throw ContractViolation("train_combine: dataset must hold successful paths");

  const auto t_total = std::chrono::steady_clock::now();
  TrainResult result;
  result.params = make_initial_params(sim_cfg, train_cfg);

  OptimizerState opt_state;
  RngStream shuffle_stream(derive_seed(train_cfg.seed, {kStreamShuffle}));
  std::vector<std::size_t> order(stored.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // forces a shuffle on first use

  const std::size_t minibatch = std::min<std::size_t>(train_cfg.batch_size, stored.size());
  std::vector<Trajectory> batch(minibatch);

  for (int step = 0; step < train_cfg.steps; ++step) {
    const auto t_step = std::chrono::steady_clock::now();
    TrainStepRecord rec;
    rec.step = step;

    for (std::size_t k = 0; k < minibatch; ++k) {
      if (cursor == order.size()) {
        // Fisher-Yates with the dedicated shuffle stream.
        for (std::size_t i = order.size(); i > 1; --i) {
          const std::size_t j = static_cast<std::size_t>(shuffle_stream.next_u64() % i);
          std::swap(order[i - 1], order[j]);
        }
        cursor = 0;
      }
      batch[k] = stored[order[cursor++]];
    }

    const ModeBLoss loss = mode_b_loss(result.params, batch, potential, sim_cfg, threads);
    rec.loss = loss.loss;
    rec.kl = loss.loss;
    rec.success_rate = 1.0;
    const ParamGradient grad = loss_param_gradient(result.params, loss.terms, threads);
    if (!update_params(result.params, grad, train_cfg.learning_rate, train_cfg.optimizer,
                       opt_state)) {
      rec.skipped = true;
      ++result.report.skipped_updates;
    }

    rec.seconds = elapsed_seconds(t_step);
    result.report.steps.push_back(rec);
    if (checkpoint_sink && (step + 1) % train_cfg.checkpoint_every == 0)
      checkpoint_sink(step, result.params);
  }

  result.report.total_seconds = elapsed_seconds(t_total);
  return result;
}

}  // namespace raresim
