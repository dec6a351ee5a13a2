#pragma once

#include "loopcert/kkt/controller.hpp"

namespace loopcert {

struct KktOptions {
  /// When true, the complementarity condition is emitted one row per
  /// constraint (lambda_i * a_i = 0) instead of the aggregated lambda' a = 0.
  /// The aggregated form matches the printed systems; splitting tightens the
  /// relaxation.
  bool split_complementarity = false;

  /// Every emitted row is rescaled to unit max-coefficient. The set is
  /// unchanged as a set; multipliers absorb the scale.
  bool normalize_rows = true;
};

/// KKT system of the Euclidean projection onto {g_U >= 0}, over (s, theta,
/// lambda):
///   theta - s - grad g_U(theta) lambda = 0,  lambda' g_U(theta) = 0,
///   lambda >= 0,  g_U(theta) >= 0.
ControllerKkt build_projection_kkt(const PolyVec& g_U, const KktOptions& opts = {});

/// KKT system of min J(s,th) s.t. a >= 0, b = 0, over (s, theta, lambda_a,
/// lambda_b):
///   grad_th J - grad_th a lambda_a + grad_th b lambda_b = 0,
///   lambda_a' a = 0,  b = 0,  lambda_a >= 0,  a >= 0.
ControllerKkt build_general_kkt(const Polynomial& J, const PolyVec& a, const PolyVec& b,
                                const KktOptions& opts = {});

/// Flattens the finite-horizon problem into GeneralNlp form with
/// theta = (u_hat, x_hat, eps) and the N dynamics rows appended to b, then
/// delegates. kappa defaults to the first input stage u_hat_0.
ControllerKkt build_mpc_kkt(const MpcController& mpc, const KktOptions& opts = {});

/// M coupled per-step KKT systems of the projected gradient method over
/// (s, theta_1..theta_M, lambda^1..lambda^M); theta_0 is the fixed warm
/// start (a polynomial of s), and kappa acts on theta_M.
ControllerKkt build_projected_gradient_chain(const ProjectedGradientChainController& pg,
                                             const KktOptions& opts = {});

/// Adds the inexactness block: a "delta" block of dimension n_u with rows
/// Delta^2 - delta_i^2 >= 0, and kappa'(theta, delta) = kappa(theta)*(1+delta)
/// elementwise. Requires Delta > 0.
ControllerKkt augment_inexactness(const ControllerKkt& kkt, double delta_bound);

/// Dispatch over the variants (+ inexactness augmentation when configured).
ControllerKkt build_controller_kkt(const ControllerSpec& spec, const KktOptions& opts = {});

/// The flattened form of an MPC controller (used by the simulator as well).
GeneralNlpController flatten_mpc(const MpcController& mpc);

}  // namespace loopcert
