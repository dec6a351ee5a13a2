#include "loopcert/sos/decision.hpp"

#include <cmath>

namespace loopcert {

int DecisionVars::add(std::string name) {
  names_.push_back(std::move(name));
  return static_cast<int>(names_.size()) - 1;
}

LinExpr LinExpr::var(int id, double coeff) {
  LinExpr e;
  e.coeffs[id] = coeff;
  return e;
}

LinExpr& LinExpr::operator+=(const LinExpr& other) {
  constant += other.constant;
  for (const auto& [id, c] : other.coeffs) {
    auto [it, inserted] = coeffs.try_emplace(id, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0.0) coeffs.erase(it);
    }
  }
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& other) { return *this += other * -1.0; }

LinExpr LinExpr::operator*(double s) const {
  LinExpr out;
  if (s == 0.0) return out;
  out.constant = constant * s;
  for (const auto& [id, c] : coeffs) out.coeffs[id] = c * s;
  return out;
}

LinExpr LinExpr::operator+(const LinExpr& other) const {
  LinExpr out = *this;
  out += other;
  return out;
}

LinExpr LinExpr::operator-(const LinExpr& other) const {
  LinExpr out = *this;
  out -= other;
  return out;
}

double LinExpr::evaluate(const Eigen::VectorXd& values) const {
  double v = constant;
  for (const auto& [id, c] : coeffs) v += c * values(id);
  return v;
}

void LinExpr::prune(double tol) {
  for (auto it = coeffs.begin(); it != coeffs.end();) {
    if (std::abs(it->second) <= tol)
      it = coeffs.erase(it);
    else
      ++it;
  }
}

PolyExpr PolyExpr::from(const Polynomial& p) {
  PolyExpr out(p.space());
  for (const auto& [m, c] : p.terms()) out.terms_.emplace(m, LinExpr(c));
  return out;
}

PolyExpr PolyExpr::decision(SpacePtr space, const std::vector<Monomial>& basis,
                            DecisionVars& vars, const std::string& name_prefix,
                            std::vector<int>* ids_out) {
  PolyExpr out(space);
  for (const auto& m : basis) {
    int id = vars.add(name_prefix + "[" + m.str(*space) + "]");
    if (ids_out) ids_out->push_back(id);
    out.add_term(m, LinExpr::var(id));
  }
  return out;
}

void PolyExpr::add_term(const Monomial& m, const LinExpr& e) {
  auto [it, inserted] = terms_.try_emplace(m, e);
  if (!inserted) it->second += e;
  if (it->second.is_constant() && std::abs(it->second.constant) <= kCoeffTol)
    terms_.erase(it);
}

PolyExpr PolyExpr::operator+(const PolyExpr& other) const {
  PolyExpr out = *this;
  out += other;
  return out;
}

PolyExpr PolyExpr::operator-(const PolyExpr& other) const {
  PolyExpr out = *this;
  out -= other;
  return out;
}

PolyExpr& PolyExpr::operator+=(const PolyExpr& other) {
  if (!space_) space_ = other.space_;
  for (const auto& [m, e] : other.terms_) add_term(m, e);
  return *this;
}

PolyExpr& PolyExpr::operator-=(const PolyExpr& other) {
  if (!space_) space_ = other.space_;
  for (const auto& [m, e] : other.terms_) add_term(m, e * -1.0);
  return *this;
}

PolyExpr PolyExpr::operator*(double s) const {
  PolyExpr out(space_);
  if (s == 0.0) return out;
  for (const auto& [m, e] : terms_) out.terms_.emplace(m, e * s);
  return out;
}

PolyExpr PolyExpr::times(const Polynomial& p) const {
  PolyExpr out(space_);
  for (const auto& [mp, cp] : p.terms()) {
    for (const auto& [m, e] : terms_) {
      out.add_term(m.times(mp), e * cp);
    }
  }
  return out;
}

PolyExpr PolyExpr::compose(const Substitution& subst) const {
  PolyExpr out(subst.target());
  for (const auto& [m, e] : terms_) {
    // monomial image as a numeric polynomial over the target space
    Polynomial image = Polynomial::term(space_, m, 1.0).compose(subst);
    for (const auto& [mi, ci] : image.terms()) {
      out.add_term(mi, e * ci);
    }
  }
  return out;
}

Polynomial PolyExpr::instantiate(const Eigen::VectorXd& values) const {
  Polynomial out(space_);
  for (const auto& [m, e] : terms_) {
    double c = e.evaluate(values);
    if (std::abs(c) > kCoeffTol) out += Polynomial::term(space_, m, c);
  }
  return out;
}

std::vector<Monomial> PolyExpr::support() const {
  std::vector<Monomial> out;
  out.reserve(terms_.size());
  for (const auto& [m, e] : terms_) out.push_back(m);
  return out;
}

}  // namespace loopcert
