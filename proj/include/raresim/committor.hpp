#pragma once

#include <vector>

#include "raresim/grid_field.hpp"
#include "raresim/potentials.hpp"

namespace raresim {

struct CommittorOptions {
  double tol = 1e-10;       // relative residual target
  int max_iters = 200000;
  void validate() const;
};

struct CommittorInfo {
  int iterations = 0;
  double final_residual = 0.0;
};

// Steady-state committor on a regular grid: solves
//   div( exp(-U/(kB T)) grad q ) = 0
// with a conservative five-point finite-volume stencil, q = 0 on grid cells
// inside the delta-ball of A, q = 1 inside the ball of B, zero flux on the
// outer boundary. Face conductivities are evaluated at face midpoints and
// rescaled by the global minimum of U so low temperatures stay representable.
//
// The linear system is solved in the shifted variable u = q - 1/2 by
// Jacobi-preconditioned conjugate gradients. Both the shift and the Jacobi
// preconditioner are pointwise, so an x-mirror-symmetric problem keeps
// u(0, y) = 0 exactly in floating point, which the symmetric two-well
// cross-checks rely on.
GridField solve_committor(const PotentialSpec& potential, double temperature, Position2 a,
                          Position2 b, double delta, const GridSpec& grid,
                          const CommittorOptions& opts = {}, CommittorInfo* info = nullptr);

// The variance-optimal bias field -2 kB T log(max(q, q_min)).
GridField ground_truth_bias(const GridField& q, double temperature, double q_min = 1e-12);

}  // namespace raresim
