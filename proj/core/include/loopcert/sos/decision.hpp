#pragma once

#include <map>
#include <string>
#include <vector>

#include "loopcert/poly/polynomial.hpp"

namespace loopcert {

/// Registry of scalar decision variables of an SOS program.
class DecisionVars {
 public:
  int add(std::string name);
  int count() const { return static_cast<int>(names_.size()); }
  const std::string& name(int id) const { return names_.at(id); }

 private:
  std::vector<std::string> names_;
};

/// Affine expression in decision variables: constant + sum coeff_i * var_i.
struct LinExpr {
  double constant = 0.0;
  std::map<int, double> coeffs;

  LinExpr() = default;
  explicit LinExpr(double c) : constant(c) {}
  static LinExpr var(int id, double coeff = 1.0);

  LinExpr& operator+=(const LinExpr& other);
  LinExpr& operator-=(const LinExpr& other);
  LinExpr operator*(double s) const;
  LinExpr operator+(const LinExpr& other) const;
  LinExpr operator-(const LinExpr& other) const;

  bool is_constant() const { return coeffs.empty(); }
  double evaluate(const Eigen::VectorXd& values) const;
  void prune(double tol = 1e-15);
};

/// A polynomial whose coefficients are affine in decision variables. This is
/// the currency of the SOS compiler: targets, multipliers and decision
/// polynomials are all PolyExprs; matched identities reduce to one scalar
/// linear equation per monomial.
class PolyExpr {
 public:
  using TermMap = std::map<Monomial, LinExpr, GradedLexLess>;

  PolyExpr() = default;
  explicit PolyExpr(SpacePtr space) : space_(std::move(space)) {}

  static PolyExpr from(const Polynomial& p);
  /// sum_i c_i * basis_i with fresh decision variables c_i.
  static PolyExpr decision(SpacePtr space, const std::vector<Monomial>& basis,
                           DecisionVars& vars, const std::string& name_prefix,
                           std::vector<int>* ids_out = nullptr);

  const SpacePtr& space() const { return space_; }
  const TermMap& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  void add_term(const Monomial& m, const LinExpr& e);

  PolyExpr operator+(const PolyExpr& other) const;
  PolyExpr operator-(const PolyExpr& other) const;
  PolyExpr& operator+=(const PolyExpr& other);
  PolyExpr& operator-=(const PolyExpr& other);
  PolyExpr operator*(double s) const;

  /// Multiply by a numeric polynomial (stays affine in decisions).
  PolyExpr times(const Polynomial& p) const;

  /// Substitute numeric polynomials for variables (affine in decisions).
  PolyExpr compose(const Substitution& subst) const;

  /// Instantiate to a numeric polynomial using solved decision values.
  Polynomial instantiate(const Eigen::VectorXd& values) const;

  /// All monomials with any (decision or constant) content.
  std::vector<Monomial> support() const;

 private:
  SpacePtr space_;
  TermMap terms_;
};

}  // namespace loopcert
