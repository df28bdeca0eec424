#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "raresim/vec2.hpp"

namespace raresim {

// Regular rectangular grid: nx points along x in [x0, x1], ny along y.
struct GridSpec {
  double x0 = -2.0, x1 = 2.0, y0 = -2.0, y1 = 2.0;
  int nx = 201, ny = 201;

  double hx() const { return (x1 - x0) / (nx - 1); }
  double hy() const { return (y1 - y0) / (ny - 1); }
  double x_at(int i) const { return x0 + i * hx(); }
  double y_at(int j) const { return y0 + j * hy(); }
  void validate() const;
};

// Scalar field sampled on a regular grid; values are row-major with x fastest:
// values[j * nx + i] is the sample at (x_at(i), y_at(j)).
struct GridField {
  GridSpec spec;
  std::vector<double> values;

  double at(int i, int j) const { return values[static_cast<std::size_t>(j) * spec.nx + i]; }
  double& at(int i, int j) { return values[static_cast<std::size_t>(j) * spec.nx + i]; }
  bool contains(Position2 p) const;
  std::uint64_t content_hash() const;
};

GridField make_grid_field(const GridSpec& spec, double fill = 0.0);

// Bilinear interpolation of the field at p. Throws OutOfDomain outside the grid.
double field_value(const GridField& field, Position2 p);

// Gradient of the bilinear interpolant at p (exact on each cell's interior;
// on cell edges the right/upper cell is used). Throws OutOfDomain outside.
Vec2 field_drift(const GridField& field, Position2 p);

// CSV matrix (one row per y line) plus a small .meta key=value header file
// with the domain and spacing. Round trip is bit-exact.
void write_grid_field(const GridField& field, const std::filesystem::path& csv_path);
GridField read_grid_field(const std::filesystem::path& csv_path);

}  // namespace raresim
