#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loopcert/poly/variables.hpp"

namespace loopcert {

/// A power product of variables. Zero exponents are never stored; factors are
/// kept sorted by variable key, so equal monomials compare equal bitwise.
class Monomial {
 public:
  struct Factor {
    uint64_t var;  // VarRef key
    int exponent;
    friend bool operator==(const Factor&, const Factor&) = default;
  };

  Monomial() = default;  // the unit monomial

  static Monomial variable(VarRef v, int exponent = 1);

  /// Builds from (possibly unsorted, possibly duplicated) factors.
  static Monomial from_factors(std::vector<std::pair<uint64_t, int>> factors);

  bool is_unit() const { return factors_.empty(); }
  int total_degree() const;
  int exponent_of(VarRef v) const;

  /// Total degree counting only variables selected by `pred(VarRef)`.
  template <typename Pred>
  int degree_where(Pred pred) const {
    int d = 0;
    for (const auto& f : factors_)
      if (pred(VarRef::from_key(f.var))) d += f.exponent;
    return d;
  }

  Monomial times(const Monomial& other) const;

  const std::vector<Factor>& factors() const { return factors_; }

  friend bool operator==(const Monomial&, const Monomial&) = default;

  std::string str(const VariableSpace& space) const;

 private:
  std::vector<Factor> factors_;
};

/// Graded-lexicographic order: first by total degree, ties broken
/// lexicographically on the exponent vector (earlier variables weigh more).
/// This is the canonical term order of the whole toolkit.
struct GradedLexLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

}  // namespace loopcert
