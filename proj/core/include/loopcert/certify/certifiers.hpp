#pragma once

#include "loopcert/certify/certificate.hpp"
#include "loopcert/certify/cost.hpp"
#include "loopcert/sdp/bisection.hpp"
#include "loopcert/sim/simulator.hpp"

namespace loopcert {

/// Degree and basis choices for the certificate searches. Defaults follow
/// the low-degree-first guideline: quadratic certified function and SOS
/// multipliers, linear polynomial multipliers.
struct CertifyOptions {
  int v_degree = 2;
  int sos_degree = 2;     // SOS multiplier degree (Gram basis of half that)
  int poly_degree = 1;    // polynomial multiplier degree
  int sigma0_degree = -1;  // -1: same as sos_degree

  /// Blocks allowed in the certified function; empty = (x, z).
  std::vector<std::string> v_blocks;
  /// Blocks allowed in SOS multipliers; empty = (x, z). Controller blocks
  /// listed here are automatically primed for successor-step rows.
  std::vector<std::string> sos_blocks;
  /// Extra blocks for polynomial multipliers beyond (x, z) + the row's
  /// controller blocks; rarely needed.
  std::vector<std::string> poly_extra_blocks;

  /// Newton-polytope reduction of the sigma_0 basis against the identity
  /// support.
  bool sigma0_newton = true;

  /// Performance bounds: single certified function V(x,z) (drops the
  /// projection constraint), as in the saturated-PI example setup.
  bool single_function = true;

  double tradeoff_gamma = 1.0;  // objective weight on alpha_v
  bool iss = false;             // ISS positivity V >= |x|^2 instead of V >= 0
  bool nonneg_multipliers = true;  // allow set multipliers in the positivity identity

  double level_tolerance = 1e-2;  // bisection tolerance in gamma
  double level_bracket_hint = 0.0;  // initial upper bracket; 0 = grow from 1

  AssemblyOptions assembly;
  SolverConfig solver;
  CheckOptions check;
  int check_samples = 25;  // sampled set points per constraint in the check
  uint64_t seed = 1;
};

/// Global asymptotic stability of the state x: searches V with the decrease
/// and positivity identities over K / K-hat. Infeasibility is reported as
/// "no certificate at these degrees", never as instability.
Certificate verify_global_stability(const ClosedLoopModel& model,
                                    const CertifyOptions& options = {});

/// Stability on the given subset X: Lyapunov step over K-bar with V
/// restricted to (x, z), then the largest certified sub-level set by
/// bisection. Returns LocalStability with gamma.
Certificate verify_local_stability(const ClosedLoopModel& model,
                                   const CertifyOptions& options = {});

/// Largest gamma (within tol) with {V <= gamma} inside X, certified by the
/// per-psi identities psi_i = sigma_0i + sigma_1i (gamma - V).
struct LevelSetResult {
  bool ok = false;
  double gamma = 0.0;
  std::string message;
};
LevelSetResult max_level_set(const Polynomial& V, const PolyVec& psis, double tolerance,
                             const CertifyOptions& options = {});

enum class BoundDirection { Upper, Lower };

/// Discounted-cost bound (deterministic): discounted decrease on K-bar, the
/// exit-level condition on the complement via per-psi identities, and (pair
/// mode) the projection inequality on K-hat. Returns PerfUpper / PerfLower.
Certificate bound_performance(const ClosedLoopModel& model, const CostSpec& cost,
                              BoundDirection direction,
                              const CertifyOptions& options = {});

/// Stochastic counterpart: single function, expectation of the composed
/// successor through the moment table, complement condition in (x, z) only.
Certificate bound_performance_stochastic(const ClosedLoopModel& model,
                                         const CostSpec& cost,
                                         const MomentTable& moments,
                                         BoundDirection direction,
                                         const CertifyOptions& options = {});

/// L2-gain / ISS analysis: minimizes alpha_w + gamma * alpha_v subject to
/// the decrease over K_w and positivity over K-hat_w; the zero-at-origin
/// condition is enforced structurally through V's basis.
Certificate bound_l2_gain(const ClosedLoopModel& model,
                          const CertifyOptions& options = {});

/// The assembled SDP of a certification program, for export or inspection.
struct BuiltProgram {
  SosProgram program;
  AssembledProgram assembled;
};
BuiltProgram build_stability_program(const ClosedLoopModel& model,
                                     const CertifyOptions& options = {});
BuiltProgram build_performance_program(const ClosedLoopModel& model, const CostSpec& cost,
                                       BoundDirection direction,
                                       const CertifyOptions& options = {});
BuiltProgram build_stochastic_program(const ClosedLoopModel& model, const CostSpec& cost,
                                      const MomentTable& moments, BoundDirection direction,
                                      const CertifyOptions& options = {});
BuiltProgram build_l2_program(const ClosedLoopModel& model,
                              const CertifyOptions& options = {});

/// Fills in a sampled exit penalty when the cost does not carry one:
/// 1.1 * sup l over sampled states and controller actions, divided by
/// (1 - alpha). Recorded as sampled, not certified.
CostSpec with_exit_penalty(const ClosedLoopModel& model, CostSpec cost,
                           uint64_t seed = 1);

}  // namespace loopcert
