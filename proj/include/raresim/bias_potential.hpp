#pragma once

#include <algorithm>
#include <memory>
#include <utility>

#include "raresim/dynamics.hpp"
#include "raresim/grid_field.hpp"
#include "raresim/netbias.hpp"

namespace raresim {

// Network-backed bias; parameters are shared read-only.
class NetBias final : public BiasPotential {
 public:
  explicit NetBias(const BiasNetParams& params) : params_(&params) {}

  double energy(Position2 p) const override { return bias_energy(*params_, p); }
  Vec2 drift_gradient(Position2 p) const override { return bias_gradient(*params_, p); }

  const BiasNetParams& params() const { return *params_; }

 private:
  const BiasNetParams* params_;
};

// Grid-backed bias (bilinear interpolant). Outside the grid the bias is zero,
// so the base potential alone governs excursions past the field's domain.
// The gradient norm is capped: the ground-truth committor bias has a steep
// cliff at the q_min clamp boundary that would otherwise eject the explicit
// integrator; capping only reshapes the sampling process, importance weights
// stay exact because they are computed from the recorded noises.
class GridBias final : public BiasPotential {
 public:
  explicit GridBias(std::shared_ptr<const GridField> field, double max_gradient_norm = 10.0)
      : field_(std::move(field)), max_norm_(max_gradient_norm) {}

  double energy(Position2 p) const override {
    return field_->contains(p) ? field_value(*field_, p) : 0.0;
  }

  Vec2 drift_gradient(Position2 p) const override {
    if (!field_->contains(p)) return {0.0, 0.0};
    Vec2 g = field_drift(*field_, p);
    const double n = g.norm();
    if (n > max_norm_) g = g * (max_norm_ / n);
    return g;
  }

 private:
  std::shared_ptr<const GridField> field_;
  double max_norm_;
};

// Fixed-slope bias U_B = slope . p (constant drift); used by analytic oracles.
class LinearBias final : public BiasPotential {
 public:
  explicit LinearBias(Vec2 slope) : slope_(slope) {}
  double energy(Position2 p) const override { return slope_.dot(p); }
  Vec2 drift_gradient(Position2) const override { return slope_; }

 private:
  Vec2 slope_;
};

}  // namespace raresim
