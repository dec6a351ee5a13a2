#include "loopcert/poly/weight.hpp"

#include <cmath>

namespace loopcert {

void WeightMeasure::set_box(const std::string& block, Eigen::VectorXd lower,
                            Eigen::VectorXd upper) {
  if (lower.size() != upper.size())
    throw StructuralError("box weight: lower/upper length mismatch for '" + block + "'");
  for (int i = 0; i < lower.size(); ++i) {
    if (lower(i) > upper(i))
      throw StructuralError("box weight: lower > upper in block '" + block + "'");
  }
  factors_[block] = Box{std::move(lower), std::move(upper)};
}

void WeightMeasure::set_point_mass(const std::string& block, Eigen::VectorXd at) {
  factors_[block] = PointMass{std::move(at)};
}

namespace {

// closed-form 1-d moments
double box_moment(double a, double b, int k) {
  return (std::pow(b, k + 1) - std::pow(a, k + 1)) / (k + 1);
}

}  // namespace

double WeightMeasure::monomial_moment(const VariableSpace& space, const Monomial& m) const {
  double total = 1.0;
  for (const auto& [block_name, factor] : factors_) {
    auto bidx = space.find_block(block_name);
    if (!bidx) continue;  // weight factor over a block the space does not carry
    const int dim = space.block(*bidx).dimension;
    for (int i = 0; i < dim; ++i) {
      const int k = m.exponent_of(VarRef{*bidx, i});
      if (const auto* box = std::get_if<Box>(&factor)) {
        if (i >= box->lower.size())
          throw StructuralError("box weight too short for block '" + block_name + "'");
        total *= box_moment(box->lower(i), box->upper(i), k);
      } else {
        const auto& pm = std::get<PointMass>(factor);
        if (i >= pm.at.size())
          throw StructuralError("point-mass weight too short for block '" + block_name + "'");
        total *= std::pow(pm.at(i), k);
      }
    }
  }
  return total;
}

double integrate(const Polynomial& p, const WeightMeasure& weight) {
  const auto& space = *p.space();
  // every variable of p must be covered by a weight factor
  for (const auto& [m, c] : p.terms()) {
    for (const auto& f : m.factors()) {
      VarRef v = VarRef::from_key(f.var);
      if (!weight.covers(space.block(v.block).name))
        throw UnsupportedMeasureError("integrate: block '" + space.block(v.block).name +
                                      "' carries no weight factor (unbounded)");
    }
  }
  double total = 0.0;
  for (const auto& [m, c] : p.terms()) {
    total += c * weight.monomial_moment(space, m);
  }
  return total;
}

}  // namespace loopcert
