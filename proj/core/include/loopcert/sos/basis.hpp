#pragma once

#include <optional>
#include <string>
#include <vector>

#include "loopcert/poly/polynomial.hpp"

namespace loopcert {

/// Monomial basis selection for decision polynomials and SOS multipliers.
struct BasisSpec {
  enum class Reduction { None, NewtonPolytope };

  /// Blocks whose variables may appear; empty = every block of the space.
  std::vector<std::string> blocks;
  int max_degree = 2;
  Reduction reduction = Reduction::None;

  /// Keep only monomials with at least one variable from these blocks
  /// (used e.g. to force V to vanish when the state is zero).
  std::vector<std::string> require_blocks;
};

/// All monomials of the selected variables up to the degree, graded-lex
/// sorted and duplicate-free. With Reduction::NewtonPolytope and a context
/// polynomial, only exponents inside 1/2 * conv(support(context)) survive.
std::vector<Monomial> candidate_basis(const BasisSpec& spec, const SpacePtr& space,
                                      const Polynomial* context = nullptr);

/// Same, with the context given as a bare support list.
std::vector<Monomial> candidate_basis(const BasisSpec& spec, const SpacePtr& space,
                                      const std::vector<Monomial>& context_support);

/// Exact membership test of point `t` in conv(points) via a phase-1 simplex.
bool in_convex_hull(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& t,
                    double tol = 1e-7);

}  // namespace loopcert
