#pragma once

#include "loopcert/kkt/semialgebraic.hpp"
#include "loopcert/sdp/problem.hpp"
#include "loopcert/sos/basis.hpp"
#include "loopcert/sos/decision.hpp"

namespace loopcert {

/// Monomial basis of one multiplier. For SOS multipliers this is the Gram
/// basis beta (the multiplier spans beta' Q beta); for polynomial multipliers
/// it is the coefficient basis. An empty basis pins the multiplier to zero.
struct MultiplierSpec {
  std::vector<Monomial> basis;
  bool empty() const { return basis.empty(); }
};

/// target = sigma_0 + sum_i sigma_i g_i + sum_e p_e h_e, matched
/// coefficientwise over the set's space.
struct SosConstraint {
  std::string label;
  PolyExpr target;
  SemialgebraicSet set;
  MultiplierSpec sigma0;
  std::vector<MultiplierSpec> ineq_multipliers;  // one per set.inequalities row
  std::vector<MultiplierSpec> eq_multipliers;    // one per set.equalities row
};

/// Per-psi sufficient conditions certifying (V_expr >= L) — or (L >= V_expr)
/// for the lower direction — wherever some psi_i <= 0 holds along with the
/// base rows: each emitted identity is
///   (V_expr - L) = sigma_psi (-psi_i) + sigma_0 + sigma' g + p' h.
std::vector<SosConstraint> compile_complement_condition(
    const PolyExpr& V_expr, double L, const PolyVec& psis,
    const SemialgebraicSet& base_set, const std::vector<Monomial>& sigma0_basis,
    const std::vector<Monomial>& sigma_basis, const std::vector<Monomial>& free_basis,
    bool lower_direction = false, const std::string& label_prefix = "complement");

}  // namespace loopcert
