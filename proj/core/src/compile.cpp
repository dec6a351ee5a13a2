#include "loopcert/sos/compile.hpp"

namespace loopcert {

std::vector<SosConstraint> compile_complement_condition(
    const PolyExpr& V_expr, double L, const PolyVec& psis,
    const SemialgebraicSet& base_set, const std::vector<Monomial>& sigma0_basis,
    const std::vector<Monomial>& sigma_basis, const std::vector<Monomial>& free_basis,
    bool lower_direction, const std::string& label_prefix) {
  if (psis.empty())
    throw StructuralError("complement condition needs a nonempty psi list");

  PolyExpr target = V_expr;
  target -= PolyExpr::from(Polynomial::constant(V_expr.space(), L));
  if (lower_direction) target = target * -1.0;

  std::vector<SosConstraint> out;
  for (size_t i = 0; i < psis.size(); ++i) {
    SosConstraint c;
    c.label = label_prefix + "[" + std::to_string(i + 1) + "]";
    c.target = target;
    c.set = base_set;
    // certify on {base rows, psi_i <= 0}: append -psi_i as an inequality
    c.set.add_inequality(-psis[i], RowTag::StateSet);
    c.sigma0.basis = sigma0_basis;
    c.ineq_multipliers.assign(c.set.inequalities.size(), MultiplierSpec{sigma_basis});
    c.eq_multipliers.assign(c.set.equalities.size(), MultiplierSpec{free_basis});
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace loopcert
