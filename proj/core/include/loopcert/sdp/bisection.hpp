#pragma once

#include <functional>
#include <optional>

#include "loopcert/sdp/solver.hpp"

namespace loopcert {

/// Bisection over a scalar parameter whose feasibility set is an interval
/// [0, gamma*] (quasi-convexity assumed, as in level-set maximization).
struct BisectionSpec {
  /// Instantiates the SDP at a given gamma.
  std::function<SdpProblem(double)> family;

  /// Acceptance beyond solver status; defaults to status == Optimal. The
  /// certifiers plug the certificate check in here.
  std::function<bool(double gamma, const SdpSolution&)> accept;

  double lower = 0.0;                  // must be feasible
  std::optional<double> upper;         // grown geometrically when absent
  double tolerance = 1e-2;             // in gamma
  double growth = 2.0;                 // bracket growth factor
  double upper_cap = 1e8;              // growth limit
  SolverConfig solver;
};

struct BisectionResult {
  bool ok = false;
  double gamma = 0.0;              // largest certified-feasible value
  SdpSolution solution;            // solution at gamma
  std::string message;
  int solves = 0;
};

/// Largest certified-feasible gamma with (infeasible upper) - gamma within
/// the tolerance. Fails when the family is infeasible at `lower` or the
/// bracket cap is exceeded while still feasible.
BisectionResult bisect_feasibility(const BisectionSpec& spec);

}  // namespace loopcert
