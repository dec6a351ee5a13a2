#pragma once

#include <map>
#include <optional>

#include "loopcert/poly/weight.hpp"
#include "loopcert/sos/decision.hpp"

namespace loopcert {

/// Discounted infinite-horizon cost specification: stage cost l(x,u),
/// discount alpha in (0,1), exit penalty L and the weighting measure rho for
/// the bound objective.
struct CostSpec {
  Polynomial stage_cost;  // over (x, u)
  double discount = 0.95;
  std::optional<double> exit_penalty;  // L; estimated by sampling when absent
  bool exit_penalty_sampled = false;   // set when the toolkit estimated L
  WeightMeasure weight;                // rho

  void validate() const;
};

/// Precomputed moments int w^beta v^gamma dP of the iid noise distribution,
/// up to a declared degree. The empty index has moment 1.
class MomentTable {
 public:
  MomentTable() = default;
  MomentTable(int nw, int nv) : nw_(nw), nv_(nv) {}

  int nw() const { return nw_; }
  int nv() const { return nv_; }

  void set(std::vector<int> w_exp, std::vector<int> v_exp, double value);
  std::optional<double> get(const std::vector<int>& w_exp,
                            const std::vector<int>& v_exp) const;

  /// Point mass at zero: every nonconstant moment vanishes (the table is
  /// total up to `degree`).
  static MomentTable zero_noise(int nw, int nv, int degree);

  /// All moments of independent coordinates, from per-coordinate raw moment
  /// sequences m[k] = E t^k (k = 0..degree).
  static MomentTable independent(const std::vector<std::vector<double>>& w_moments,
                                 const std::vector<std::vector<double>>& v_moments,
                                 int degree);

  /// Moment of the (w, v) part of a monomial over `space`. Throws
  /// StructuralError if an index is not tabulated.
  double moment_of(const VariableSpace& space, const Monomial& m) const;

  int max_degree() const { return max_degree_; }

 private:
  int nw_ = 0, nv_ = 0;
  int max_degree_ = 0;
  std::map<std::pair<std::vector<int>, std::vector<int>>, double> moments_;
};

/// Replaces every w^beta v^gamma factor by its tabulated moment, leaving a
/// polynomial in the remaining variables. Linear in the coefficients.
Polynomial apply_expectation(const Polynomial& p, const MomentTable& moments);
PolyExpr apply_expectation(const PolyExpr& p, const MomentTable& moments);

}  // namespace loopcert
