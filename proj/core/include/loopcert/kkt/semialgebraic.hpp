#pragma once

#include <string>
#include <vector>

#include "loopcert/poly/polynomial.hpp"

namespace loopcert {

/// Labels the provenance of each row of an assembled set; used by the
/// certifiers to attach multiplier bases per row family and by tests that
/// count rows.
enum class RowTag {
  KktEq,        // controller KKT equality (stationarity / complementarity / b)
  KktIneq,      // controller KKT inequality (multiplier sign / constraint value)
  DynamicsX,    // x' - f_x(...)
  DynamicsZ,    // z' - f_z(...)
  StateSet,     // psi_i(x, z)
  Disturbance,  // psi_w(x, z, w, v)
  Inexactness,  // bound on the delta block
  Other,
};

/// {xi | h(xi) = 0, g(xi) >= 0}. Rows are polynomials over a shared space.
struct SemialgebraicSet {
  SpacePtr space;
  PolyVec equalities;    // h
  PolyVec inequalities;  // g
  std::vector<RowTag> equality_tags;
  std::vector<RowTag> inequality_tags;
  std::vector<int> equality_step;  // 0 = current, 1 = successor copy
  std::vector<int> inequality_step;

  void add_equality(Polynomial p, RowTag tag = RowTag::Other, int step = 0);
  void add_inequality(Polynomial p, RowTag tag = RowTag::Other, int step = 0);

  struct Membership {
    bool inside = false;
    double max_equality_violation = 0.0;   // max |h_i|
    double max_inequality_violation = 0.0;  // max (-g_i)_+
  };

  /// Numeric membership: all |h_i| <= tol and g_i >= -tol.
  Membership membership(const Point& point, double tol) const;
};

}  // namespace loopcert
