#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "loopcert/poly/monomial.hpp"
#include "loopcert/poly/variables.hpp"

namespace loopcert {

/// Coefficients with |c| <= kCoeffTol are pruned after every operation;
/// below this double-precision arithmetic carries no meaning for us.
inline constexpr double kCoeffTol = 1e-14;

/// Substitution map used by Polynomial::compose. Variables without an image
/// are carried over by name into the target space.
class Substitution;

/// A sparse multivariate polynomial with real coefficients over the scalar
/// variables of a VariableSpace. Terms are kept in graded-lex order and
/// zero coefficients are pruned, so representation is canonical.
///
/// Values are immutable in practice: all operations return new polynomials.
class Polynomial {
 public:
  using TermMap = std::map<Monomial, double, GradedLexLess>;

  Polynomial() = default;  // zero over the empty space
  explicit Polynomial(SpacePtr space) : space_(std::move(space)) {}

  static Polynomial constant(SpacePtr space, double value);
  static Polynomial variable(SpacePtr space, VarRef v);
  static Polynomial variable(SpacePtr space, const std::string& block, int index);
  static Polynomial term(SpacePtr space, const Monomial& m, double coeff);

  const SpacePtr& space() const { return space_; }
  const TermMap& terms() const { return terms_; }

  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const;
  double constant_value() const;  // coefficient of the unit monomial
  int total_degree() const;       // 0 for the zero polynomial

  /// Total degree counting only variables in the given blocks.
  int degree_in_blocks(const std::vector<int>& block_indices) const;

  double coefficient(const Monomial& m) const;

  Polynomial operator-() const;
  Polynomial operator+(const Polynomial& other) const;
  Polynomial operator-(const Polynomial& other) const;
  Polynomial operator*(const Polynomial& other) const;
  Polynomial operator*(double scalar) const;
  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  friend Polynomial operator*(double s, const Polynomial& p) { return p * s; }

  Polynomial pow(int exponent) const;

  double evaluate(const Point& point) const;

  Polynomial differentiate(VarRef v) const;

  /// Exact polynomial composition / renaming into the substitution's target
  /// space. Unmapped variables pass through by block name.
  Polynomial compose(const Substitution& subst) const;

  /// Lists the distinct monomials (the support).
  std::vector<Monomial> support() const;

  /// Largest |coefficient|; 0 for the zero polynomial.
  double max_abs_coeff() const;

  std::string str() const;

 private:
  void add_term(const Monomial& m, double coeff);
  static void check_compatible(const Polynomial& a, const Polynomial& b);

  SpacePtr space_;
  TermMap terms_;
};

class Substitution {
 public:
  explicit Substitution(SpacePtr target) : target_(std::move(target)) {}

  const SpacePtr& target() const { return target_; }

  /// Maps a single scalar variable to a polynomial over the target space.
  void map_var(VarRef v, Polynomial image);

  /// Maps a whole block to a vector of polynomials (one per coordinate).
  void map_block(const VariableSpace& source, const std::string& block,
                 const std::vector<Polynomial>& images);

  /// Maps a block of the source space onto a same-dimension block of the
  /// target space (pure renaming).
  void rename_block(const VariableSpace& source, const std::string& from,
                    const std::string& to);

  bool has(uint64_t var_key) const { return images_.count(var_key) > 0; }
  const Polynomial& image(uint64_t var_key) const { return images_.at(var_key); }

 private:
  SpacePtr target_;
  std::map<uint64_t, Polynomial> images_;
};

using PolyVec = std::vector<Polynomial>;
using PolyMat = std::vector<std::vector<Polynomial>>;

/// Transposed Jacobian of a polynomial vector with respect to one block:
/// result[i][j] = d vec[j] / d block[i] (rows indexed by the block
/// coordinate, columns by the vector entry).
PolyMat jacobian_transpose(const PolyVec& vec, const std::string& block);

/// Sum of squared coordinates of a block, as a polynomial.
Polynomial squared_norm(SpacePtr space, const std::string& block);

/// Applies one substitution to every entry.
PolyVec compose_all(const PolyVec& vec, const Substitution& subst);

double evaluate_all_max_abs(const PolyVec& vec, const Point& point);

}  // namespace loopcert
