#include "raresim/committor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "raresim/dynamics.hpp"
#include "raresim/errors.hpp"

namespace raresim {

void CommittorOptions::validate() const {
  if (!(tol > 0)) throw ConfigError("committor tol must be > 0");
  if (max_iters < 1) throw ConfigError("committor max_iters must be >= 1");
}

namespace {

// Pinned cells carry u = -1/2 (A-ball) or +1/2 (B-ball); free cells are
// unknowns of the SPD system A u = rhs.
enum class CellKind : unsigned char { free_cell, pin_a, pin_b };

struct Stencil {
  // Face conductivities east/west/north/south; zero across the outer boundary.
  std::vector<double> ke, kw, kn, ks;
  std::vector<double> diag;
  std::vector<CellKind> kind;
  int nx = 0, ny = 0;

  std::size_t id(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
};

// y = A x on free cells (x given everywhere, pins held at their values).
// The east/west pair is summed first so the result is bitwise symmetric
// under the x mirror.
void apply_operator(const Stencil& st, const std::vector<double>& x, std::vector<double>& y) {
  for (int j = 0; j < st.ny; ++j) {
    for (int i = 0; i < st.nx; ++i) {
      const std::size_t c = st.id(i, j);
      if (st.kind[c] != CellKind::free_cell) {
        y[c] = 0.0;
        continue;
      }
      const double xc = x[c];
      double acc = 0.0;
      const double east = st.ke[c] != 0.0 ? st.ke[c] * (xc - x[c + 1]) : 0.0;
      const double west = st.kw[c] != 0.0 ? st.kw[c] * (xc - x[c - 1]) : 0.0;
      acc = (east + west);
      if (st.kn[c] != 0.0) acc += st.kn[c] * (xc - x[c + st.nx]);
      if (st.ks[c] != 0.0) acc += st.ks[c] * (xc - x[c - st.nx]);
      y[c] = acc;
    }
  }
}

}  // namespace

GridField solve_committor(const PotentialSpec& potential, double temperature, Position2 a,
                          Position2 b, double delta, const GridSpec& grid,
                          const CommittorOptions& opts, CommittorInfo* info) {
  grid.validate();
  opts.validate();
  potential.validate();
  if (!(temperature > 0)) throw ConfigError("temperature must be > 0");
  if (!(delta > 0)) throw ConfigError("delta must be > 0");
  if ((a - b).norm() < 2 * delta) throw ConfigError("delta-balls of A and B must be disjoint");
  const auto inside = [&](Position2 p) {
    return p.x >= grid.x0 && p.x <= grid.x1 && p.y >= grid.y0 && p.y <= grid.y1;
  };
  if (!inside(a) || !inside(b)) throw ConfigError("A and B must lie inside the grid domain");

  const int nx = grid.nx, ny = grid.ny;
  const double beta = 1.0 / (kBoltzmann * temperature);

  Stencil st;
  st.nx = nx;
  st.ny = ny;
  const std::size_t n = static_cast<std::size_t>(nx) * ny;
  st.ke.assign(n, 0.0);
  st.kw.assign(n, 0.0);
  st.kn.assign(n, 0.0);
  st.ks.assign(n, 0.0);
  st.diag.assign(n, 0.0);
  st.kind.assign(n, CellKind::free_cell);

  const double delta2 = delta * delta;
  std::size_t pins_a = 0, pins_b = 0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Position2 p{grid.x_at(i), grid.y_at(j)};
      if ((p - a).norm2() < delta2) {
        st.kind[st.id(i, j)] = CellKind::pin_a;
        ++pins_a;
      } else if ((p - b).norm2() < delta2) {
        st.kind[st.id(i, j)] = CellKind::pin_b;
        ++pins_b;
      }
    }
  }
  if (pins_a == 0 || pins_b == 0)
    throw ConfigError("delta-balls contain no grid cell; refine the grid or enlarge delta");

  // Conductivity shift: exp(-beta (U - U_min)) keeps the largest face at 1.
  double u_min = std::numeric_limits<double>::infinity();
  const auto face_energy = [&](double x, double y) { return energy(potential, {x, y}); };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i)
      u_min = std::min(u_min, face_energy(0.5 * (grid.x_at(i) + grid.x_at(i + 1)), grid.y_at(j)));
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i < nx; ++i)
      u_min = std::min(u_min, face_energy(grid.x_at(i), 0.5 * (grid.y_at(j) + grid.y_at(j + 1))));

  // Faces beyond ~700 kT above the minimum would underflow; they are floored
  // so remote cells stay weakly coupled instead of producing a singular row.
  const auto kappa = [&](double u_face) {
    const double expo = -beta * (u_face - u_min);
    return expo < -690.0 ? std::exp(-690.0) : std::exp(expo);
  };

  const double sx = grid.hy() / grid.hx();  // face area / cell distance, x faces
  const double sy = grid.hx() / grid.hy();
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t c = st.id(i, j);
      if (i + 1 < nx) {
        const double k = sx * kappa(face_energy(0.5 * (grid.x_at(i) + grid.x_at(i + 1)), grid.y_at(j)));
        st.ke[c] = k;
        st.kw[st.id(i + 1, j)] = k;
      }
      if (j + 1 < ny) {
        const double k = sy * kappa(face_energy(grid.x_at(i), 0.5 * (grid.y_at(j) + grid.y_at(j + 1))));
        st.kn[c] = k;
        st.ks[st.id(i, j + 1)] = k;
      }
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    const double east_west = st.ke[c] + st.kw[c];
    st.diag[c] = east_west + st.kn[c] + st.ks[c];
  }

  // Right-hand side from the pinned neighbors: pin values are -1/2 and +1/2
  // in the shifted variable.
  const auto pin_value = [&](CellKind kind) { return kind == CellKind::pin_a ? -0.5 : 0.5; };
  std::vector<double> rhs(n, 0.0), u(n, 0.0);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t c = st.id(i, j);
      if (st.kind[c] != CellKind::free_cell) {
        u[c] = pin_value(st.kind[c]);
        continue;
      }
      double acc = 0.0;
      const double east = (i + 1 < nx && st.kind[c + 1] != CellKind::free_cell)
                              ? st.ke[c] * pin_value(st.kind[c + 1])
                              : 0.0;
      const double west = (i > 0 && st.kind[c - 1] != CellKind::free_cell)
                              ? st.kw[c] * pin_value(st.kind[c - 1])
                              : 0.0;
      acc = east + west;
      if (j + 1 < ny && st.kind[c + st.nx] != CellKind::free_cell)
        acc += st.kn[c] * pin_value(st.kind[c + st.nx]);
      if (j > 0 && st.kind[c - st.nx] != CellKind::free_cell)
        acc += st.ks[c] * pin_value(st.kind[c - st.nx]);
      rhs[c] = acc;
    }
  }

  // The operator must not read pinned cells (their coupling moved to rhs).
  for (std::size_t c = 0; c < n; ++c)
    if (st.kind[c] != CellKind::free_cell) {
      st.ke[c] = st.kw[c] = st.kn[c] = st.ks[c] = 0.0;
    }
  // Free cells must also ignore pinned neighbors inside apply_operator: zero
  // the face from the free side (its effect is already in rhs), but keep the
  // diagonal contribution of that face.
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t c = st.id(i, j);
      if (st.kind[c] != CellKind::free_cell) continue;
      if (i + 1 < nx && st.kind[c + 1] != CellKind::free_cell) st.ke[c] = 0.0;
      if (i > 0 && st.kind[c - 1] != CellKind::free_cell) st.kw[c] = 0.0;
      if (j + 1 < ny && st.kind[c + st.nx] != CellKind::free_cell) st.kn[c] = 0.0;
      if (j > 0 && st.kind[c - st.nx] != CellKind::free_cell) st.ks[c] = 0.0;
    }
  }

  // Jacobi-preconditioned CG on the free cells.
  std::vector<double> r(n, 0.0), z(n, 0.0), p(n, 0.0), ap(n, 0.0);

  const auto apply_with_diag = [&](const std::vector<double>& x, std::vector<double>& y) {
    apply_operator(st, x, y);
    for (std::size_t c = 0; c < n; ++c)
      if (st.kind[c] == CellKind::free_cell) {
        // Re-add the pinned-face diagonal that the zeroed couplings dropped.
        const double missing = st.diag[c] - (st.ke[c] + st.kw[c] + st.kn[c] + st.ks[c]);
        y[c] += missing * x[c];
      }
  };

  double rhs_norm2 = 0.0;
  for (std::size_t c = 0; c < n; ++c) rhs_norm2 += rhs[c] * rhs[c];
  const double rhs_norm = std::sqrt(rhs_norm2);
  if (rhs_norm == 0.0) throw ConfigError("committor system has an empty right-hand side");

  // u starts at zero on free cells, so r = rhs.
  for (std::size_t c = 0; c < n; ++c) r[c] = (st.kind[c] == CellKind::free_cell) ? rhs[c] : 0.0;

  std::vector<double> residual_history;
  double rz = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    if (st.kind[c] != CellKind::free_cell) continue;
    z[c] = r[c] / st.diag[c];
    rz += r[c] * z[c];
  }
  p = z;

  int iter = 0;
  double res = rhs_norm;
  for (; iter < opts.max_iters; ++iter) {
    res = 0.0;
    for (std::size_t c = 0; c < n; ++c) res += r[c] * r[c];
    res = std::sqrt(res);
    if (iter % 16 == 0) residual_history.push_back(res);
    if (res <= opts.tol * rhs_norm) break;

    apply_with_diag(p, ap);
    double pap = 0.0;
    for (std::size_t c = 0; c < n; ++c)
      if (st.kind[c] == CellKind::free_cell) pap += p[c] * ap[c];
    if (!(pap > 0)) throw SolverError("committor CG broke down (non-SPD step)", residual_history);
    const double alpha = rz / pap;
    for (std::size_t c = 0; c < n; ++c) {
      if (st.kind[c] != CellKind::free_cell) continue;
      u[c] += alpha * p[c];
      r[c] -= alpha * ap[c];
    }
    double rz_new = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (st.kind[c] != CellKind::free_cell) continue;
      z[c] = r[c] / st.diag[c];
      rz_new += r[c] * z[c];
    }
    const double beta_cg = rz_new / rz;
    rz = rz_new;
    for (std::size_t c = 0; c < n; ++c)
      if (st.kind[c] == CellKind::free_cell) p[c] = z[c] + beta_cg * p[c];
  }
  if (res > opts.tol * rhs_norm)
    throw SolverError("committor solve did not converge in " + std::to_string(opts.max_iters) +
                          " iterations (residual " + std::to_string(res / rhs_norm) + ")",
                      residual_history);

  if (info) {
    info->iterations = iter;
    info->final_residual = res / rhs_norm;
  }

  GridField q = make_grid_field(grid);
  for (std::size_t c = 0; c < n; ++c) q.values[c] = u[c] + 0.5;
  return q;
}

GridField ground_truth_bias(const GridField& q, double temperature, double q_min) {
  if (!(q_min > 0)) throw ConfigError("q_min must be > 0");
  if (!(temperature > 0)) throw ConfigError("temperature must be > 0");
  GridField bias = make_grid_field(q.spec);
  const double scale = -2.0 * kBoltzmann * temperature;
  for (std::size_t c = 0; c < q.values.size(); ++c)
    bias.values[c] = scale * std::log(std::max(q.values[c], q_min));
  return bias;
}

}  // namespace raresim
