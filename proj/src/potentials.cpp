#include "raresim/potentials.hpp"

#include <algorithm>
#include <cmath>

#include "raresim/errors.hpp"
#include "raresim/text_io.hpp"

namespace raresim {

std::string to_string(PotentialKind kind) {
  switch (kind) {
    case PotentialKind::paper2d: return "paper2d";
    case PotentialKind::flat: return "flat";
    case PotentialKind::quadratic_well: return "quadratic-well";
    case PotentialKind::grid_interpolated: return "grid-interpolated";
  }
  throw ConfigError("unknown potential kind");
}

PotentialKind potential_kind_from_string(const std::string& name) {
  if (name == "paper2d") return PotentialKind::paper2d;
  if (name == "flat") return PotentialKind::flat;
  if (name == "quadratic-well") return PotentialKind::quadratic_well;
  if (name == "grid-interpolated") return PotentialKind::grid_interpolated;
  throw ConfigError("unknown potential id '" + name + "'");
}

double PotentialSpec::param(const std::string& name, double fallback) const {
  const auto it = params.find(name);
  return it == params.end() ? fallback : it->second;
}

void PotentialSpec::validate() const {
  if (kind == PotentialKind::grid_interpolated && !grid)
    throw ConfigError("grid-interpolated potential needs a grid field");
}

PotentialSpec PotentialSpec::paper2d(double tilt) {
  PotentialSpec spec;
  spec.kind = PotentialKind::paper2d;
  spec.params["tilt"] = tilt;
  return spec;
}

PotentialSpec PotentialSpec::flat() {
  PotentialSpec spec;
  spec.kind = PotentialKind::flat;
  return spec;
}

PotentialSpec PotentialSpec::quadratic_well(Position2 center, double stiffness) {
  PotentialSpec spec;
  spec.kind = PotentialKind::quadratic_well;
  spec.params["cx"] = center.x;
  spec.params["cy"] = center.y;
  spec.params["k"] = stiffness;
  return spec;
}

PotentialSpec PotentialSpec::grid_interpolated(std::shared_ptr<const GridField> grid) {
  PotentialSpec spec;
  spec.kind = PotentialKind::grid_interpolated;
  spec.grid = std::move(grid);
  return spec;
}

std::uint64_t PotentialSpec::content_hash() const {
  std::string canon = to_string(kind);
  for (const auto& [key, value] : params) {
    canon += ';';
    canon += key;
    canon += '=';
    canon += format_double(value);
  }
  std::uint64_t h = fnv1a(canon.data(), canon.size());
  if (grid) {
    const std::uint64_t gh = grid->content_hash();
    h = fnv1a(&gh, sizeof(gh), h);
  }
  return h;
}

namespace {

// The two-well surface. With tilt t:
//   U = t*y + (1/6) * (4(1-x^2-y^2)^2 + 2(x^2-2)^2
//                      + ((x+y)^2-1)^2 + ((x-y)^2-1)^2 - 2)
double paper2d_energy(Position2 p, double tilt) {
  const double x = p.x, y = p.y;
  const double a = 1.0 - x * x - y * y;
  const double b = x * x - 2.0;
  const double c = (x + y) * (x + y) - 1.0;
  const double d = (x - y) * (x - y) - 1.0;
  return tilt * y + (4.0 * a * a + 2.0 * b * b + c * c + d * d - 2.0) / 6.0;
}

Vec2 paper2d_gradient(Position2 p, double tilt) {
  const double x = p.x, y = p.y;
  const double a = 1.0 - x * x - y * y;
  const double b = x * x - 2.0;
  const double sp = x + y;
  const double sm = x - y;
  const double c = sp * sp - 1.0;
  const double d = sm * sm - 1.0;
  const double gx = (-16.0 * x * a + 8.0 * x * b + 4.0 * sp * c + 4.0 * sm * d) / 6.0;
  const double gy = tilt + (-16.0 * y * a + 4.0 * sp * c - 4.0 * sm * d) / 6.0;
  return {gx, gy};
}

}  // namespace

double energy(const PotentialSpec& spec, Position2 p) {
  switch (spec.kind) {
    case PotentialKind::paper2d:
      return paper2d_energy(p, spec.param("tilt", 0.05));
    case PotentialKind::flat:
      return 0.0;
    case PotentialKind::quadratic_well: {
      const Vec2 d = p - Position2{spec.param("cx", 0.0), spec.param("cy", 0.0)};
      return 0.5 * spec.param("k", 1.0) * d.norm2();
    }
    case PotentialKind::grid_interpolated:
      spec.validate();
      return field_value(*spec.grid, p);
  }
  throw ConfigError("unknown potential kind");
}

Vec2 gradient(const PotentialSpec& spec, Position2 p) {
  switch (spec.kind) {
    case PotentialKind::paper2d:
      return paper2d_gradient(p, spec.param("tilt", 0.05));
    case PotentialKind::flat:
      return {0.0, 0.0};
    case PotentialKind::quadratic_well: {
      const Vec2 d = p - Position2{spec.param("cx", 0.0), spec.param("cy", 0.0)};
      return d * spec.param("k", 1.0);
    }
    case PotentialKind::grid_interpolated:
      spec.validate();
      return field_drift(*spec.grid, p);
  }
  throw ConfigError("unknown potential kind");
}

namespace {

// Descends from `start` with backtracking line search. Returns the final
// point; the caller checks the gradient norm.
Position2 descend(const PotentialSpec& spec, Position2 start, double tol, int max_iters) {
  Position2 p = start;
  double e = energy(spec, p);
  double step = 0.1;
  for (int iter = 0; iter < max_iters; ++iter) {
    const Vec2 g = gradient(spec, p);
    const double gn2 = g.norm2();
    if (std::sqrt(gn2) < tol) break;
    bool moved = false;
    for (int k = 0; k < 60; ++k) {
      const Position2 trial = p - g * step;
      const double et = energy(spec, trial);
      // Armijo condition with c1 = 1e-4.
      if (et <= e - 1e-4 * step * gn2) {
        p = trial;
        e = et;
        step *= 1.5;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return p;
}

bool positive_definite_hessian(const PotentialSpec& spec, Position2 p, double h) {
  const auto gx = [&](Position2 q) { return gradient(spec, q); };
  const Vec2 dx = (gx({p.x + h, p.y}) - gx({p.x - h, p.y})) / (2 * h);
  const Vec2 dy = (gx({p.x, p.y + h}) - gx({p.x, p.y - h})) / (2 * h);
  const double hxx = dx.x, hyy = dy.y;
  const double hxy = 0.5 * (dx.y + dy.x);
  return hxx > 0.0 && (hxx * hyy - hxy * hxy) > 0.0;
}

}  // namespace

std::vector<Position2> find_minima(const PotentialSpec& spec, const SearchBox& box, int grid_n,
                                   double tol) {
  if (grid_n < 2) throw ContractViolation("find_minima: grid_n must be >= 2");
  if (!(tol > 0)) throw ContractViolation("find_minima: tol must be > 0");
  spec.validate();

  constexpr double kDedupRadius = 1e-3;
  constexpr int kMaxIters = 2000;

  std::vector<Position2> minima;
  for (int i = 0; i < grid_n; ++i) {
    for (int j = 0; j < grid_n; ++j) {
      const Position2 seed{box.x0 + (box.x1 - box.x0) * (i + 0.5) / grid_n,
                           box.y0 + (box.y1 - box.y0) * (j + 0.5) / grid_n};
      const Position2 p = descend(spec, seed, tol, kMaxIters);
      if (!p.finite()) continue;
      if (gradient(spec, p).norm() >= tol) continue;
      if (!positive_definite_hessian(spec, p, 1e-5)) continue;
      const bool duplicate = std::any_of(minima.begin(), minima.end(), [&](const Position2& m) {
        return (m - p).norm() < kDedupRadius;
      });
      if (!duplicate) minima.push_back(p);
    }
  }
  if (minima.empty())
    throw SearchFailure("find_minima: no minimum converged within the iteration cap");

  std::sort(minima.begin(), minima.end(), [&](const Position2& a, const Position2& b) {
    const double ea = energy(spec, a), eb = energy(spec, b);
    if (ea != eb) return ea < eb;
    if (a.x != b.x) return a.x < b.x;
    return a.y < b.y;
  });
  return minima;
}

}  // namespace raresim
