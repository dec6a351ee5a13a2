#pragma once

#include <map>
#include <variant>

#include <Eigen/Dense>

#include "loopcert/poly/polynomial.hpp"

namespace loopcert {

/// Product measure with one factor per block: either Lebesgue measure on a
/// coordinate box or a unit point mass. Monomial moments are closed-form, so
/// integrals of polynomials are exact sums.
class WeightMeasure {
 public:
  struct Box {
    Eigen::VectorXd lower, upper;
  };
  struct PointMass {
    Eigen::VectorXd at;
  };
  using Factor = std::variant<Box, PointMass>;

  WeightMeasure() = default;

  void set_box(const std::string& block, Eigen::VectorXd lower, Eigen::VectorXd upper);
  void set_point_mass(const std::string& block, Eigen::VectorXd at);

  bool covers(const std::string& block) const { return factors_.count(block) > 0; }
  const std::map<std::string, Factor>& factors() const { return factors_; }

  /// Moment of a single monomial, i.e. the integral of the power product
  /// against the full product measure (absent coordinates contribute their
  /// factor's total mass).
  double monomial_moment(const VariableSpace& space, const Monomial& m) const;

 private:
  std::map<std::string, Factor> factors_;
};

/// Closed-form integral of p against the weight. Every variable of p must be
/// covered by a factor, else UnsupportedMeasureError.
double integrate(const Polynomial& p, const WeightMeasure& weight);

}  // namespace loopcert
