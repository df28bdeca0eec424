#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "raresim/vec2.hpp"

namespace raresim {

enum class FeatureMode { raw, with_control_features };

std::string to_string(FeatureMode mode);
FeatureMode feature_mode_from_string(const std::string& name);

// One dense layer; weights are row-major [rows x cols].
struct DenseLayer {
  int rows = 0;
  int cols = 0;
  std::vector<double> w;
  std::vector<double> b;

  void resize(int rows_, int cols_);
  double& wij(int i, int j) { return w[static_cast<std::size_t>(i) * cols + j]; }
  double wij(int i, int j) const { return w[static_cast<std::size_t>(i) * cols + j]; }
};

// Parameters of the scalar bias potential U_B: a multilayer perceptron with
// tanh hidden activations and a linear output. In feature mode
// with_control_features the network input is
//   (x, y, exp(s*|p - A|), exp(s*|p - B|)),  s = -1 if negative_exponent else +1,
// otherwise just (x, y).
struct BiasNetParams {
  std::vector<int> hidden_widths;  // one entry per hidden layer
  FeatureMode feature_mode = FeatureMode::with_control_features;
  Position2 anchor_a;
  Position2 anchor_b;
  bool negative_exponent = false;
  std::vector<DenseLayer> layers;  // hidden layers then the 1-row output layer

  int input_dim() const { return feature_mode == FeatureMode::raw ? 2 : 4; }
  std::size_t parameter_count() const;
  bool shape_congruent(const BiasNetParams& other) const;
};

// Per-parameter values with the same layer shapes as a BiasNetParams.
struct ParamGradient {
  std::vector<DenseLayer> layers;

  static ParamGradient zeros_like(const BiasNetParams& params);
  void add_scaled(const ParamGradient& other, double scale);
  double squared_norm() const;
  bool finite() const;
};

// One reduced loss contribution: position p, a weight on the bias value
// U_B(p) and a weight vector on the bias input-gradient grad_x U_B(p).
struct LossTerm {
  Position2 position;
  double value_weight = 0.0;
  Vec2 gradient_weight;
};

// Feature vector seen by the first layer (2 or 4 entries).
std::vector<double> input_features(const BiasNetParams& params, Position2 p);

double bias_energy(const BiasNetParams& params, Position2 p);

// Exact reverse-mode derivative of bias_energy with respect to (x, y),
// chained through the control features. The distance gradient at an anchor
// is defined as the zero vector.
Vec2 bias_gradient(const BiasNetParams& params, Position2 p);

// Evaluates bias value and input gradient in one pass.
struct BiasEval {
  double value;
  Vec2 grad;
};
BiasEval bias_value_and_gradient(const BiasNetParams& params, Position2 p);

// Sum over terms of
//   value_weight * d(U_B(p))/dtheta + gradient_weight . d(grad_x U_B(p))/dtheta.
// The second piece is a mixed second derivative, computed exactly by a
// forward tangent pass through the layers followed by reverse mode over the
// augmented computation. Reduction order is fixed (chunked by term index),
// so results do not depend on the thread count.
ParamGradient loss_param_gradient(const BiasNetParams& params, std::span<const LossTerm> terms,
                                  int threads = 0);

// Random parameters: hidden weights uniform in [-s, s] with s = 1/sqrt(fan_in),
// output layer zeroed so the initial bias potential is identically zero,
// all biases zero. Deterministic in the seed. scale_override >= 0 replaces s
// for every layer (0 gives an all-zero network).
BiasNetParams init_params(std::uint64_t seed, const std::vector<int>& hidden_widths,
                          FeatureMode mode, Position2 anchor_a, Position2 anchor_b,
                          double scale_override = -1.0);

// Versioned text checkpoint with shortest round-trip decimals; the
// round trip is bit-exact.
void save_checkpoint(const BiasNetParams& params, const std::filesystem::path& path);
BiasNetParams load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_to_string(const BiasNetParams& params);
BiasNetParams checkpoint_from_string(const std::string& text);

}  // namespace raresim
