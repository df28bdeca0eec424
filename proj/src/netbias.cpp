#include "raresim/netbias.hpp"

#include <cmath>
#include <cstring>

#include "raresim/errors.hpp"
#include "raresim/parallel.hpp"
#include "raresim/rng.hpp"
#include "raresim/text_io.hpp"

namespace raresim {

std::string to_string(FeatureMode mode) {
  return mode == FeatureMode::raw ? "raw" : "control";
}

FeatureMode feature_mode_from_string(const std::string& name) {
  if (name == "raw") return FeatureMode::raw;
  if (name == "control" || name == "with_control_features") return FeatureMode::with_control_features;
  throw ConfigError("unknown feature mode '" + name + "'");
}

void DenseLayer::resize(int rows_, int cols_) {
  rows = rows_;
  cols = cols_;
  w.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  b.assign(rows, 0.0);
}

std::size_t BiasNetParams::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& layer : layers) n += layer.w.size() + layer.b.size();
  return n;
}

bool BiasNetParams::shape_congruent(const BiasNetParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l)
    if (layers[l].rows != other.layers[l].rows || layers[l].cols != other.layers[l].cols)
      return false;
  return true;
}

ParamGradient ParamGradient::zeros_like(const BiasNetParams& params) {
  ParamGradient g;
  g.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    g.layers[l].resize(params.layers[l].rows, params.layers[l].cols);
  return g;
}

void ParamGradient::add_scaled(const ParamGradient& other, double scale) {
  if (layers.size() != other.layers.size()) throw ContractViolation("gradient shape mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    DenseLayer& a = layers[l];
    const DenseLayer& b2 = other.layers[l];
    if (a.w.size() != b2.w.size() || a.b.size() != b2.b.size())
      throw ContractViolation("gradient shape mismatch");
    for (std::size_t k = 0; k < a.w.size(); ++k) a.w[k] += scale * b2.w[k];
    for (std::size_t k = 0; k < a.b.size(); ++k) a.b[k] += scale * b2.b[k];
  }
}

double ParamGradient::squared_norm() const {
  double s = 0.0;
  for (const DenseLayer& layer : layers) {
    for (double v : layer.w) s += v * v;
    for (double v : layer.b) s += v * v;
  }
  return s;
}

bool ParamGradient::finite() const {
  for (const DenseLayer& layer : layers) {
    for (double v : layer.w)
      if (!std::isfinite(v)) return false;
    for (double v : layer.b)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

// Control feature and its spatial Jacobian row: f = exp(s*|p - anchor|),
// df/dp = s * f * (p - anchor)/|p - anchor|, defined as 0 at the anchor.
struct Feature {
  double value;
  Vec2 jac;
};

Feature control_feature(Position2 p, Position2 anchor, bool negative_exponent) {
  const Vec2 d = p - anchor;
  const double dist = d.norm();
  const double sign = negative_exponent ? -1.0 : 1.0;
  const double f = std::exp(sign * dist);
  if (dist == 0.0) return {f, {0.0, 0.0}};
  return {f, d * (sign * f / dist)};
}

// Scratch buffers for one forward/backward evaluation; thread_local so the
// hot paths do not allocate. Sized on demand.
struct Workspace {
  // z[l]: activations entering layer l (z[0] = features); zdot/adot: forward
  // tangent; lam*: adjoints of the scalar objective.
  std::vector<std::vector<double>> z, zdot, adot;
  std::vector<double> lam_z, lam_zdot, lam_a, lam_adot, tmp;

  void prepare(const BiasNetParams& params) {
    const std::size_t n_layers = params.layers.size();
    z.resize(n_layers + 1);
    zdot.resize(n_layers + 1);
    adot.resize(n_layers + 1);
    std::size_t max_width = params.input_dim();
    z[0].resize(params.input_dim());
    zdot[0].resize(params.input_dim());
    for (std::size_t l = 0; l < n_layers; ++l) {
      const int rows = params.layers[l].rows;
      z[l + 1].resize(rows);
      zdot[l + 1].resize(rows);
      adot[l + 1].resize(rows);
      max_width = std::max<std::size_t>(max_width, rows);
    }
    lam_z.resize(max_width);
    lam_zdot.resize(max_width);
    lam_a.resize(max_width);
    lam_adot.resize(max_width);
    tmp.resize(max_width);
  }
};

thread_local Workspace tl_ws;

// Forward pass; z[0] must hold the features. Hidden layers apply tanh, the
// final layer is linear with a single row.
double forward(const BiasNetParams& params, Workspace& ws) {
  const std::size_t n_layers = params.layers.size();
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    const DenseLayer& layer = params.layers[l];
    const std::vector<double>& in = ws.z[l];
    std::vector<double>& out = ws.z[l + 1];
    for (int i = 0; i < layer.rows; ++i) {
      double acc = layer.b[i];
      const double* wrow = layer.w.data() + static_cast<std::size_t>(i) * layer.cols;
      for (int j = 0; j < layer.cols; ++j) acc += wrow[j] * in[j];
      out[i] = std::tanh(acc);
    }
  }
  const DenseLayer& out_layer = params.layers[n_layers - 1];
  const std::vector<double>& in = ws.z[n_layers - 1];
  double acc = out_layer.b[0];
  for (int j = 0; j < out_layer.cols; ++j) acc += out_layer.w[j] * in[j];
  ws.z[n_layers][0] = acc;
  return acc;
}

struct FeatureJacobian {
  Vec2 rows[4];  // d feature_k / d (x, y)
  int count;
};

FeatureJacobian feature_jacobian(const BiasNetParams& params, Position2 p,
                                 std::vector<double>& features) {
  FeatureJacobian jac;
  features[0] = p.x;
  features[1] = p.y;
  jac.rows[0] = {1.0, 0.0};
  jac.rows[1] = {0.0, 1.0};
  if (params.feature_mode == FeatureMode::raw) {
    jac.count = 2;
    return jac;
  }
  const Feature fa = control_feature(p, params.anchor_a, params.negative_exponent);
  const Feature fb = control_feature(p, params.anchor_b, params.negative_exponent);
  features[2] = fa.value;
  features[3] = fb.value;
  jac.rows[2] = fa.jac;
  jac.rows[3] = fb.jac;
  jac.count = 4;
  return jac;
}

}  // namespace

std::vector<double> input_features(const BiasNetParams& params, Position2 p) {
  std::vector<double> features(params.input_dim());
  feature_jacobian(params, p, features);
  return features;
}

double bias_energy(const BiasNetParams& params, Position2 p) {
  if (params.layers.empty()) throw ContractViolation("bias network has no layers");
  Workspace& ws = tl_ws;
  ws.prepare(params);
  feature_jacobian(params, p, ws.z[0]);
  const double value = forward(params, ws);
  if (!std::isfinite(value))
    throw NumericOverflow("bias_energy produced a non-finite value (runaway parameters?)");
  return value;
}

BiasEval bias_value_and_gradient(const BiasNetParams& params, Position2 p) {
  if (params.layers.empty()) throw ContractViolation("bias network has no layers");
  Workspace& ws = tl_ws;
  ws.prepare(params);
  const FeatureJacobian jac = feature_jacobian(params, p, ws.z[0]);
  const double value = forward(params, ws);

  // Reverse sweep: lam_z holds dU/dz for the current layer's input.
  const std::size_t n_layers = params.layers.size();
  const DenseLayer& out_layer = params.layers[n_layers - 1];
  for (int j = 0; j < out_layer.cols; ++j) ws.lam_z[j] = out_layer.w[j];
  for (std::size_t l = n_layers - 1; l-- > 0;) {
    const DenseLayer& layer = params.layers[l];
    const std::vector<double>& zl = ws.z[l + 1];
    // dU/da = dU/dz * (1 - z^2), then dU/dz_prev = W^T dU/da.
    for (int i = 0; i < layer.rows; ++i) ws.lam_a[i] = ws.lam_z[i] * (1.0 - zl[i] * zl[i]);
    for (int j = 0; j < layer.cols; ++j) ws.tmp[j] = 0.0;
    for (int i = 0; i < layer.rows; ++i) {
      const double* wrow = layer.w.data() + static_cast<std::size_t>(i) * layer.cols;
      const double li = ws.lam_a[i];
      for (int j = 0; j < layer.cols; ++j) ws.tmp[j] += wrow[j] * li;
    }
    for (int j = 0; j < layer.cols; ++j) ws.lam_z[j] = ws.tmp[j];
  }

  Vec2 grad{0.0, 0.0};
  for (int k = 0; k < jac.count; ++k) grad += jac.rows[k] * ws.lam_z[k];
  if (!std::isfinite(value) || !grad.finite())
    throw NumericOverflow("bias gradient produced a non-finite value");
  return {value, grad};
}

Vec2 bias_gradient(const BiasNetParams& params, Position2 p) {
  return bias_value_and_gradient(params, p).grad;
}

namespace {

// Accumulates one term's parameter gradient into `grad`. Computes
//   d/dtheta [ value_weight * U_B(p) + gradient_weight . grad_x U_B(p) ]
// via a forward tangent in the direction J_phi * gradient_weight and a
// reverse sweep over the augmented (z, zdot) computation.
void accumulate_term(const BiasNetParams& params, const LossTerm& term, ParamGradient& grad,
                     Workspace& ws) {
  ws.prepare(params);
  const FeatureJacobian jac = feature_jacobian(params, term.position, ws.z[0]);
  const std::size_t n_layers = params.layers.size();

  // Tangent seed: directional derivative of the features along gradient_weight.
  for (int k = 0; k < jac.count; ++k) ws.zdot[0][k] = jac.rows[k].dot(term.gradient_weight);

  // Augmented forward: z (with tanh) and its tangent zdot; adot stores the
  // pre-activation tangents needed by the reverse sweep.
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    const DenseLayer& layer = params.layers[l];
    const std::vector<double>& in = ws.z[l];
    const std::vector<double>& indot = ws.zdot[l];
    for (int i = 0; i < layer.rows; ++i) {
      const double* wrow = layer.w.data() + static_cast<std::size_t>(i) * layer.cols;
      double acc = layer.b[i];
      double accdot = 0.0;
      for (int j = 0; j < layer.cols; ++j) {
        acc += wrow[j] * in[j];
        accdot += wrow[j] * indot[j];
      }
      const double zi = std::tanh(acc);
      ws.z[l + 1][i] = zi;
      ws.adot[l + 1][i] = accdot;
      ws.zdot[l + 1][i] = (1.0 - zi * zi) * accdot;
    }
  }

  const DenseLayer& out_layer = params.layers[n_layers - 1];
  DenseLayer& gout = grad.layers[n_layers - 1];
  const std::vector<double>& zl = ws.z[n_layers - 1];
  const std::vector<double>& zldot = ws.zdot[n_layers - 1];

  // Objective c = value_weight * U + Udot with U = w.z + b, Udot = w.zdot.
  for (int j = 0; j < out_layer.cols; ++j) {
    gout.w[j] += term.value_weight * zl[j] + zldot[j];
    ws.lam_z[j] = term.value_weight * out_layer.w[j];
    ws.lam_zdot[j] = out_layer.w[j];
  }
  gout.b[0] += term.value_weight;

  for (std::size_t l = n_layers - 1; l-- > 0;) {
    const DenseLayer& layer = params.layers[l];
    DenseLayer& glayer = grad.layers[l];
    const std::vector<double>& zi = ws.z[l + 1];
    const std::vector<double>& aidot = ws.adot[l + 1];
    const std::vector<double>& in = ws.z[l];
    const std::vector<double>& indot = ws.zdot[l];

    // zdot_l = (1 - z^2) adot_l contributes to both adot and z adjoints;
    // then z_l = tanh(a_l).
    for (int i = 0; i < layer.rows; ++i) {
      const double one_minus_z2 = 1.0 - zi[i] * zi[i];
      ws.lam_adot[i] = ws.lam_zdot[i] * one_minus_z2;
      const double lam_z_total = ws.lam_z[i] + ws.lam_zdot[i] * (-2.0 * zi[i] * aidot[i]);
      ws.lam_a[i] = lam_z_total * one_minus_z2;
    }
    for (int i = 0; i < layer.rows; ++i) {
      double* gw = glayer.w.data() + static_cast<std::size_t>(i) * layer.cols;
      const double la = ws.lam_a[i];
      const double lad = ws.lam_adot[i];
      for (int j = 0; j < layer.cols; ++j) gw[j] += la * in[j] + lad * indot[j];
      glayer.b[i] += la;
    }
    if (l > 0) {
      for (int j = 0; j < layer.cols; ++j) {
        ws.tmp[j] = 0.0;
        ws.lam_zdot[j] = 0.0;
      }
      for (int i = 0; i < layer.rows; ++i) {
        const double* wrow = layer.w.data() + static_cast<std::size_t>(i) * layer.cols;
        const double la = ws.lam_a[i];
        const double lad = ws.lam_adot[i];
        for (int j = 0; j < layer.cols; ++j) {
          ws.tmp[j] += wrow[j] * la;
          ws.lam_zdot[j] += wrow[j] * lad;
        }
      }
      for (int j = 0; j < layer.cols; ++j) ws.lam_z[j] = ws.tmp[j];
    }
  }
}

}  // namespace

ParamGradient loss_param_gradient(const BiasNetParams& params, std::span<const LossTerm> terms,
                                  int threads) {
  if (params.layers.empty()) throw ContractViolation("bias network has no layers");
  ParamGradient total = ParamGradient::zeros_like(params);
  if (terms.empty()) return total;

  constexpr std::size_t kChunk = 128;
  const std::size_t n_chunks = (terms.size() + kChunk - 1) / kChunk;
  std::vector<ParamGradient> partials(n_chunks);

  parallel_for_chunks(terms.size(), kChunk, threads, [&](std::size_t begin, std::size_t end) {
    ParamGradient part = ParamGradient::zeros_like(params);
    Workspace& ws = tl_ws;
    for (std::size_t k = begin; k < end; ++k) accumulate_term(params, terms[k], part, ws);
    partials[begin / kChunk] = std::move(part);
  });

  // Fixed chunk-order reduction keeps the result independent of threading.
  for (const ParamGradient& part : partials) total.add_scaled(part, 1.0);
  return total;
}

BiasNetParams init_params(std::uint64_t seed, const std::vector<int>& hidden_widths,
                          FeatureMode mode, Position2 anchor_a, Position2 anchor_b,
                          double scale_override) {
  for (int w : hidden_widths)
    if (w <= 0) throw ContractViolation("hidden widths must be positive");

  BiasNetParams params;
  params.hidden_widths = hidden_widths;
  params.feature_mode = mode;
  params.anchor_a = anchor_a;
  params.anchor_b = anchor_b;

  RngStream rng(derive_seed(seed, {kStreamInit}));
  int fan_in = params.input_dim();
  for (int width : hidden_widths) {
    DenseLayer layer;
    layer.resize(width, fan_in);
    const double scale = scale_override >= 0.0 ? scale_override : 1.0 / std::sqrt(fan_in);
    for (double& w : layer.w) w = rng.uniform(-scale, scale);
    params.layers.push_back(std::move(layer));
    fan_in = width;
  }
  DenseLayer out;
  out.resize(1, fan_in);
  if (scale_override > 0.0)
    for (double& w : out.w) w = rng.uniform(-scale_override, scale_override);
  // scale_override < 0 (default) leaves the output layer zeroed: the initial
  // bias potential is identically zero and early dynamics match the
  // unbiased process.
  params.layers.push_back(std::move(out));
  return params;
}

std::string checkpoint_to_string(const BiasNetParams& params) {
  std::string out = "#raresim-bias v1\n";
  out += "feature_mode=" + to_string(params.feature_mode) + "\n";
  out += "negative_exponent=" + std::string(params.negative_exponent ? "1" : "0") + "\n";
  out += "anchor_a=" + format_double(params.anchor_a.x) + "," + format_double(params.anchor_a.y) + "\n";
  out += "anchor_b=" + format_double(params.anchor_b.x) + "," + format_double(params.anchor_b.y) + "\n";
  out += "hidden=";
  for (std::size_t i = 0; i < params.hidden_widths.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(params.hidden_widths[i]);
  }
  out += "\n";
  for (const DenseLayer& layer : params.layers) {
    out += "layer " + std::to_string(layer.rows) + " " + std::to_string(layer.cols) + "\n";
    out += "w";
    for (double v : layer.w) {
      out += ' ';
      out += format_double(v);
    }
    out += "\nb";
    for (double v : layer.b) {
      out += ' ';
      out += format_double(v);
    }
    out += "\n";
  }
  return out;
}

BiasNetParams checkpoint_from_string(const std::string& text) {
  const auto lines = split(text, '\n');
  long n = 0;
  auto next_line = [&]() -> std::string_view {
    while (n < static_cast<long>(lines.size())) {
      std::string_view line = lines[n++];
      if (!line.empty()) return line;
    }
    throw ParseError("unexpected end of checkpoint", n);
  };

  if (next_line() != "#raresim-bias v1") throw ParseError("unsupported checkpoint version", 1);

  BiasNetParams params;
  auto kv = [&](std::string_view line, std::string_view key) {
    if (line.substr(0, key.size()) != key || line.size() <= key.size() ||
        line[key.size()] != '=')
      throw ParseError("expected '" + std::string(key) + "=...'", n);
    return line.substr(key.size() + 1);
  };
  params.feature_mode = feature_mode_from_string(std::string(kv(next_line(), "feature_mode")));
  params.negative_exponent = parse_int(kv(next_line(), "negative_exponent"), n) != 0;
  {
    const auto parts = split(kv(next_line(), "anchor_a"), ',');
    if (parts.size() != 2) throw ParseError("bad anchor_a", n);
    params.anchor_a = {parse_double(parts[0], n), parse_double(parts[1], n)};
  }
  {
    const auto parts = split(kv(next_line(), "anchor_b"), ',');
    if (parts.size() != 2) throw ParseError("bad anchor_b", n);
    params.anchor_b = {parse_double(parts[0], n), parse_double(parts[1], n)};
  }
  {
    const auto value = kv(next_line(), "hidden");
    if (!value.empty())
      for (auto part : split(value, ','))
        params.hidden_widths.push_back(static_cast<int>(parse_int(part, n)));
  }

  const std::size_t n_layers = params.hidden_widths.size() + 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto header = split(next_line(), ' ');
    if (header.size() != 3 || header[0] != "layer") throw ParseError("expected layer header", n);
    DenseLayer layer;
    layer.resize(static_cast<int>(parse_int(header[1], n)), static_cast<int>(parse_int(header[2], n)));
    const auto wline = split(next_line(), ' ');
    if (wline.empty() || wline[0] != "w" ||
        wline.size() != layer.w.size() + 1)
      throw ParseError("bad weight row", n);
    for (std::size_t k = 0; k < layer.w.size(); ++k) layer.w[k] = parse_double(wline[k + 1], n);
    const auto bline = split(next_line(), ' ');
    if (bline.empty() || bline[0] != "b" || bline.size() != layer.b.size() + 1)
      throw ParseError("bad bias row", n);
    for (std::size_t k = 0; k < layer.b.size(); ++k) layer.b[k] = parse_double(bline[k + 1], n);
    params.layers.push_back(std::move(layer));
  }

  // Shape sanity: layer dims must chain from input_dim to a scalar output.
  int expect = params.input_dim();
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (params.layers[l].cols != expect) throw ParseError("layer shape mismatch");
    expect = params.layers[l].rows;
  }
  if (expect != 1) throw ParseError("output layer must have one row");
  return params;
}

void save_checkpoint(const BiasNetParams& params, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_to_string(params));
}

BiasNetParams load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_string(read_file(path));
}

}  // namespace raresim
