#include "loopcert/poly/monomial.hpp"

#include <algorithm>
#include <sstream>

namespace loopcert {

Monomial Monomial::variable(VarRef v, int exponent) {
  Monomial m;
  if (exponent < 0) throw StructuralError("negative exponent");
  if (exponent > 0) m.factors_.push_back(Factor{v.key(), exponent});
  return m;
}

Monomial Monomial::from_factors(std::vector<std::pair<uint64_t, int>> factors) {
  std::sort(factors.begin(), factors.end());
  Monomial m;
  for (const auto& [var, exp] : factors) {
    if (exp < 0) throw StructuralError("negative exponent");
    if (exp == 0) continue;
    if (!m.factors_.empty() && m.factors_.back().var == var) {
      m.factors_.back().exponent += exp;
    } else {
      m.factors_.push_back(Factor{var, exp});
    }
  }
  return m;
}

int Monomial::total_degree() const {
  int d = 0;
  for (const auto& f : factors_) d += f.exponent;
  return d;
}

int Monomial::exponent_of(VarRef v) const {
  uint64_t key = v.key();
  for (const auto& f : factors_) {
    if (f.var == key) return f.exponent;
    if (f.var > key) break;
  }
  return 0;
}

Monomial Monomial::times(const Monomial& other) const {
  Monomial out;
  out.factors_.reserve(factors_.size() + other.factors_.size());
  auto a = factors_.begin(), ae = factors_.end();
  auto b = other.factors_.begin(), be = other.factors_.end();
  while (a != ae && b != be) {
    if (a->var < b->var) {
      out.factors_.push_back(*a++);
    } else if (b->var < a->var) {
      out.factors_.push_back(*b++);
    } else {
      out.factors_.push_back(Factor{a->var, a->exponent + b->exponent});
      ++a;
      ++b;
    }
  }
  out.factors_.insert(out.factors_.end(), a, ae);
  out.factors_.insert(out.factors_.end(), b, be);
  return out;
}

std::string Monomial::str(const VariableSpace& space) const {
  if (factors_.empty()) return "1";
  std::ostringstream os;
  bool first = true;
  for (const auto& f : factors_) {
    if (!first) os << "*";
    first = false;
    os << var_name(space, VarRef::from_key(f.var));
    if (f.exponent != 1) os << "^" << f.exponent;
  }
  return os.str();
}

bool GradedLexLess::operator()(const Monomial& a, const Monomial& b) const {
  const int da = a.total_degree(), db = b.total_degree();
  if (da != db) return da < db;
  // Same total degree: compare exponent vectors over ascending variable keys.
  // The monomial with the larger exponent on the earliest differing variable
  // is the grlex-larger one.
  auto ia = a.factors().begin(), ea = a.factors().end();
  auto ib = b.factors().begin(), eb = b.factors().end();
  while (ia != ea && ib != eb) {
    if (ia->var < ib->var) return false;  // a has the earlier variable -> a larger
    if (ib->var < ia->var) return true;
    if (ia->exponent != ib->exponent) return ia->exponent < ib->exponent;
    ++ia;
    ++ib;
  }
  // Equal so far; with equal total degree both must be exhausted.
  return false;
}

}  // namespace loopcert
