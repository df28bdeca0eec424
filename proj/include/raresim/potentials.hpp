#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "raresim/grid_field.hpp"
#include "raresim/vec2.hpp"

namespace raresim {

enum class PotentialKind { paper2d, flat, quadratic_well, grid_interpolated };

std::string to_string(PotentialKind kind);
PotentialKind potential_kind_from_string(const std::string& name);

// Declarative description of a potential energy surface. Parameters:
//   paper2d:           tilt (default 0.05)
//   flat:              -
//   quadratic-well:    cx, cy (center, default 0), k (stiffness, default 1)
//   grid-interpolated: bilinear interpolant of `grid` (required)
struct PotentialSpec {
  PotentialKind kind = PotentialKind::paper2d;
  std::map<std::string, double> params;
  std::shared_ptr<const GridField> grid;

  double param(const std::string& name, double fallback) const;
  void validate() const;

  static PotentialSpec paper2d(double tilt = 0.05);
  static PotentialSpec flat();
  static PotentialSpec quadratic_well(Position2 center, double stiffness = 1.0);
  static PotentialSpec grid_interpolated(std::shared_ptr<const GridField> grid);

  // Content hash over the kind, parameters and (if present) grid values;
  // used for dataset/manifest compatibility checks.
  std::uint64_t content_hash() const;
};

double energy(const PotentialSpec& spec, Position2 p);
Vec2 gradient(const PotentialSpec& spec, Position2 p);

struct SearchBox {
  double x0 = -2.0, x1 = 2.0, y0 = -2.0, y1 = 2.0;
};

// Local minima found by gradient descent with backtracking line search from
// a grid_n x grid_n seed lattice. Results are deduplicated (radius 1e-3),
// require gradient norm < tol and a positive-definite finite-difference
// Hessian, and are sorted by (energy, x, y).
std::vector<Position2> find_minima(const PotentialSpec& spec, const SearchBox& box, int grid_n,
                                   double tol);

}  // namespace raresim
