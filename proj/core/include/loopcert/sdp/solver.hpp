#pragma once

#include "loopcert/sdp/problem.hpp"

namespace loopcert {

struct SolverConfig {
  int max_iterations = 200;
  double feasibility_tol = 1e-9;        // relative primal/dual residual target
  double gap_tol = 1e-8;                // relative duality-gap target
  double infeasibility_threshold = 1e9;  // divergence guard on the dual objective
  double ray_tol = 1e-8;                // relative residual for the improving ray
  bool verbose = false;
};

/// Solves the block-diagonal SDP with an infeasible-start primal-dual
/// path-following method (Nesterov-Todd scaling, Mehrotra
/// predictor-corrector). Free variables are handled natively through a
/// regularized quasi-definite KKT system.
///
/// Status:
///  - Optimal: residuals and duality gap within tolerance (for pure
///    feasibility problems: primal residual within tolerance);
///  - Infeasible: a dual improving ray was found (stored in the solution);
///  - NumericalFailure: stall / divergence, diagnostics in `message`.
SdpSolution solve_sdp(const SdpProblem& problem, const SolverConfig& config = {});

}  // namespace loopcert
