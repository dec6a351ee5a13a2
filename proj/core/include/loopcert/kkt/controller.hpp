#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "loopcert/kkt/semialgebraic.hpp"
#include "loopcert/poly/polynomial.hpp"

namespace loopcert {

// Canonical block names used by controller data. Controller polynomials are
// written over small spaces with these names; the builders embed them into
// larger spaces by name.
inline constexpr const char* kParamBlock = "s";       // controller parameter
inline constexpr const char* kThetaBlock = "theta";   // decision variables
inline constexpr const char* kLambdaBlock = "lambda"; // projection multipliers
inline constexpr const char* kLambdaABlock = "lambda_a";
inline constexpr const char* kLambdaBBlock = "lambda_b";
inline constexpr const char* kDeltaBlock = "delta";   // inexactness variable

/// u = proj_U(s) with U = {v | g_U(v) >= 0}; g_U over block "theta".
struct ProjectionController {
  PolyVec g_U;
};

/// minimize J(s, theta) s.t. a(s, theta) >= 0, b(s, theta) = 0.
struct GeneralNlpController {
  Polynomial J;
  PolyVec a;
  PolyVec b;
};

/// Finite-horizon optimal control problem solved in receding horizon.
/// Single-stage data (model, stage_cost) is written over blocks
/// ("xh", "uh") and instantiated per stage by the builder; trajectory-wide
/// constraints a, b are written over the stacked blocks
/// ("s", "u_hat", "x_hat", "eps").
struct MpcController {
  int horizon = 1;  // N
  int nx = 0, nu = 0, n_eps = 0;
  PolyVec model;            // f_hat over (xh, uh), nx rows
  PolyVec stage_costs;      // either one polynomial reused for every stage or N entries
  Polynomial terminal_cost; // over (s, xh)
  Polynomial slack_cost;    // over (eps); zero if no soft constraints
  PolyVec ineq;             // a over (s, u_hat, x_hat, eps)
  PolyVec eq;               // b over (s, u_hat, x_hat, eps)
};

/// M iterations of the projected gradient method on a GeneralNlp problem,
/// starting from a fixed polynomial warm start theta0(s) (zero by default).
struct ProjectedGradientChainController {
  GeneralNlpController problem;
  double step = 1.0;  // eta > 0
  int iterations = 1;  // M >= 1
  PolyVec initial_iterate;  // theta0 over block "s"; empty = zero start
};

struct ControllerSpec {
  std::variant<ProjectionController, GeneralNlpController, MpcController,
               ProjectedGradientChainController>
      variant;

  /// u = kappa(theta); empty means the builder's default (identity for
  /// projection/general/chain, first input stage for MPC).
  PolyVec kappa;

  /// Inexactness bound (Delta); when set, the KKT set gains a delta block
  /// with |delta_i| <= Delta and kappa becomes kappa(theta)*(1+delta).
  std::optional<double> inexactness;

  int n_u() const;  // inferred input dimension (kappa rows)
};

/// A controller's KKT system as a semialgebraic set over the parameter block
/// "s" plus the controller-internal blocks, together with the input map.
struct ControllerKkt {
  SemialgebraicSet set;
  std::vector<std::string> internal_blocks;  // every non-"s" block, in order
  PolyVec kappa;                             // over set.space
  std::string theta_block;                   // block kappa reads from
};

}  // namespace loopcert
