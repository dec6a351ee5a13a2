#include "loopcert/kkt/semialgebraic.hpp"

#include <cmath>

namespace loopcert {

void SemialgebraicSet::add_equality(Polynomial p, RowTag tag, int step) {
  equalities.push_back(std::move(p));
  equality_tags.push_back(tag);
  equality_step.push_back(step);
}

void SemialgebraicSet::add_inequality(Polynomial p, RowTag tag, int step) {
  inequalities.push_back(std::move(p));
  inequality_tags.push_back(tag);
  inequality_step.push_back(step);
}

SemialgebraicSet::Membership SemialgebraicSet::membership(const Point& point,
                                                          double tol) const {
  Membership m;
  for (const auto& h : equalities) {
    m.max_equality_violation = std::max(m.max_equality_violation, std::abs(h.evaluate(point)));
  }
  for (const auto& g : inequalities) {
    m.max_inequality_violation =
        std::max(m.max_inequality_violation, std::max(0.0, -g.evaluate(point)));
  }
  m.inside = m.max_equality_violation <= tol && m.max_inequality_violation <= tol;
  return m;
}

}  // namespace loopcert
