#include "loopcert/sdp/bisection.hpp"

namespace loopcert {

BisectionResult bisect_feasibility(const BisectionSpec& spec) {
  BisectionResult result;
  auto accepted = [&](double gamma, SdpSolution& out) {
    SdpProblem prob = spec.family(gamma);
    out = solve_sdp(prob, spec.solver);
    ++result.solves;
    if (!out.optimal()) return false;
    return spec.accept ? spec.accept(gamma, out) : true;
  };

  SdpSolution sol_lo;
  if (!accepted(spec.lower, sol_lo)) {
    result.message = "infeasible at the lower end of the bracket";
    return result;
  }
  double lo = spec.lower;
  result.gamma = lo;
  result.solution = sol_lo;

  double hi;
  if (spec.upper) {
    hi = *spec.upper;
    SdpSolution sol_hi;
    if (accepted(hi, sol_hi)) {
      // user bracket too small: grow anyway
      lo = hi;
      result.gamma = hi;
      result.solution = sol_hi;
      hi = hi > 0 ? hi * spec.growth : 1.0;
    }
  } else {
    hi = lo > 0 ? lo * spec.growth : 1.0;
  }

  // geometric growth until infeasible or cap
  while (true) {
    if (hi > spec.upper_cap) {
      result.message = "bracket cap exceeded while still feasible";
      return result;
    }
    SdpSolution sol_hi;
    if (!accepted(hi, sol_hi)) break;
    lo = hi;
    result.gamma = hi;
    result.solution = sol_hi;
    hi *= spec.growth;
  }

  while (hi - lo > spec.tolerance) {
    double mid = 0.5 * (lo + hi);
    SdpSolution sol_mid;
    if (accepted(mid, sol_mid)) {
      lo = mid;
      result.gamma = mid;
      result.solution = sol_mid;
    } else {
      hi = mid;
    }
  }
  result.ok = true;
  return result;
}

}  // namespace loopcert
