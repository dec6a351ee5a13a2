#include "loopcert/poly/polynomial.hpp"

#include <cmath>
#include <sstream>

namespace loopcert {

namespace {

// Spaces are compatible when they are the same object or equal in content.
bool compatible(const SpacePtr& a, const SpacePtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return a->same_content(*b);
}

}  // namespace

Polynomial Polynomial::constant(SpacePtr space, double value) {
  Polynomial p(std::move(space));
  p.add_term(Monomial(), value);
  return p;
}

Polynomial Polynomial::variable(SpacePtr space, VarRef v) {
  check_var(*space, v);
  Polynomial p(std::move(space));
  p.add_term(Monomial::variable(v), 1.0);
  return p;
}

Polynomial Polynomial::variable(SpacePtr space, const std::string& block, int index) {
  int b = space->block_index(block);
  return variable(std::move(space), VarRef{b, index});
}

Polynomial Polynomial::term(SpacePtr space, const Monomial& m, double coeff) {
  for (const auto& f : m.factors()) check_var(*space, VarRef::from_key(f.var));
  Polynomial p(std::move(space));
  p.add_term(m, coeff);
  return p;
}

bool Polynomial::is_constant() const {
  return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.is_unit());
}

double Polynomial::constant_value() const {
  auto it = terms_.find(Monomial());
  return it == terms_.end() ? 0.0 : it->second;
}

int Polynomial::total_degree() const {
  // grlex order puts the highest-degree term last
  return terms_.empty() ? 0 : terms_.rbegin()->first.total_degree();
}

int Polynomial::degree_in_blocks(const std::vector<int>& block_indices) const {
  int d = 0;
  for (const auto& [m, c] : terms_) {
    d = std::max(d, m.degree_where([&](VarRef v) {
          for (int b : block_indices)
            if (v.block == b) return true;
          return false;
        }));
  }
  return d;
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Monomial& m, double coeff) {
  auto [it, inserted] = terms_.try_emplace(m, coeff);
  if (!inserted) it->second += coeff;
  if (std::abs(it->second) <= kCoeffTol) terms_.erase(it);
}

void Polynomial::check_compatible(const Polynomial& a, const Polynomial& b) {
  if (a.terms_.empty() || b.terms_.empty()) return;  // zero matches anything
  if (!compatible(a.space_, b.space_))
    throw StructuralError("polynomials over different variable spaces");
}

Polynomial Polynomial::operator-() const {
  Polynomial out(space_);
  for (const auto& [m, c] : terms_) out.terms_.emplace(m, -c);
  return out;
}

Polynomial Polynomial::operator+(const Polynomial& other) const {
  check_compatible(*this, other);
  Polynomial out = *this;
  if (!out.space_) out.space_ = other.space_;
  for (const auto& [m, c] : other.terms_) out.add_term(m, c);
  return out;
}

Polynomial Polynomial::operator-(const Polynomial& other) const {
  check_compatible(*this, other);
  Polynomial out = *this;
  if (!out.space_) out.space_ = other.space_;
  for (const auto& [m, c] : other.terms_) out.add_term(m, -c);
  return out;
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  *this = *this + other;
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  *this = *this - other;
  return *this;
}

Polynomial Polynomial::operator*(const Polynomial& other) const {
  check_compatible(*this, other);
  Polynomial out(space_ ? space_ : other.space_);
  for (const auto& [ma, ca] : terms_) {
    for (const auto& [mb, cb] : other.terms_) {
      out.add_term(ma.times(mb), ca * cb);
    }
  }
  return out;
}

Polynomial Polynomial::operator*(double scalar) const {
  Polynomial out(space_);
  if (scalar == 0.0) return out;
  for (const auto& [m, c] : terms_) {
    double v = c * scalar;
    if (std::abs(v) > kCoeffTol) out.terms_.emplace(m, v);
  }
  return out;
}

Polynomial Polynomial::pow(int exponent) const {
  if (exponent < 0) throw StructuralError("negative polynomial power");
  Polynomial result = Polynomial::constant(space_, 1.0);
  Polynomial base = *this;
  int e = exponent;
  while (e > 0) {
    if (e & 1) result = result * base;
    base = (e >>= 1) ? base * base : base;
  }
  return result;
}

double Polynomial::evaluate(const Point& point) const {
  double total = 0.0;
  for (const auto& [m, c] : terms_) {
    double v = c;
    for (const auto& f : m.factors()) {
      v *= std::pow(point.value(VarRef::from_key(f.var)), f.exponent);
    }
    total += v;
  }
  return total;
}

Polynomial Polynomial::differentiate(VarRef v) const {
  check_var(*space_, v);
  const uint64_t key = v.key();
  Polynomial out(space_);
  for (const auto& [m, c] : terms_) {
    int e = m.exponent_of(v);
    if (e == 0) continue;
    std::vector<std::pair<uint64_t, int>> factors;
    for (const auto& f : m.factors()) {
      factors.emplace_back(f.var, f.var == key ? f.exponent - 1 : f.exponent);
    }
    out.add_term(Monomial::from_factors(std::move(factors)), c * e);
  }
  return out;
}

Polynomial Polynomial::compose(const Substitution& subst) const {
  const SpacePtr& target = subst.target();
  Polynomial out(target);
  // cache of variable powers to avoid repeated exponentiation
  std::map<std::pair<uint64_t, int>, Polynomial> pow_cache;
  auto var_power = [&](uint64_t key, int exp) -> const Polynomial& {
    auto it = pow_cache.find({key, exp});
    if (it != pow_cache.end()) return it->second;
    Polynomial base;
    if (subst.has(key)) {
      base = subst.image(key);
    } else {
      // pass-through by block name
      VarRef v = VarRef::from_key(key);
      const std::string& name = space_->block(v.block).name;
      auto tb = target->find_block(name);
      if (!tb)
        throw StructuralError("compose: block '" + name +
                              "' has no image and is absent from the target space");
      if (v.index >= target->block(*tb).dimension)
        throw StructuralError("compose: block '" + name +
                              "' is smaller in the target space");
      base = Polynomial::variable(target, VarRef{*tb, v.index});
    }
    return pow_cache.emplace(std::make_pair(key, exp), base.pow(exp)).first->second;
  };

  for (const auto& [m, c] : terms_) {
    Polynomial term = Polynomial::constant(target, c);
    for (const auto& f : m.factors()) {
      term = term * var_power(f.var, f.exponent);
    }
    out += term;
  }
  return out;
}

std::vector<Monomial> Polynomial::support() const {
  std::vector<Monomial> out;
  out.reserve(terms_.size());
  for (const auto& [m, c] : terms_) out.push_back(m);
  return out;
}

double Polynomial::max_abs_coeff() const {
  double v = 0.0;
  for (const auto& [m, c] : terms_) v = std::max(v, std::abs(c));
  return v;
}

std::string Polynomial::str() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  // print highest-degree terms first
  for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
    double c = it->second;
    if (first) {
      if (c < 0) os << "-";
    } else {
      os << (c < 0 ? " - " : " + ");
    }
    first = false;
    double a = std::abs(c);
    if (it->first.is_unit()) {
      os << a;
    } else {
      if (a != 1.0) os << a << "*";
      os << it->first.str(*space_);
    }
  }
  return os.str();
}

void Substitution::map_var(VarRef v, Polynomial image) {
  if (!compatible(image.space(), target_) && !image.is_zero())
    throw StructuralError("substitution image not over the target space");
  images_[v.key()] = std::move(image);
}

void Substitution::map_block(const VariableSpace& source, const std::string& block,
                             const std::vector<Polynomial>& images) {
  int b = source.block_index(block);
  if (static_cast<int>(images.size()) != source.block(b).dimension)
    throw StructuralError("map_block: image count does not match block dimension for '" +
                          block + "'");
  for (int i = 0; i < static_cast<int>(images.size()); ++i) {
    Polynomial img = images[i];
    if (img.is_zero()) img = Polynomial(target_);
    map_var(VarRef{b, i}, std::move(img));
  }
}

void Substitution::rename_block(const VariableSpace& source, const std::string& from,
                                const std::string& to) {
  int b = source.block_index(from);
  int tb = target_->block_index(to);
  if (source.block(b).dimension != target_->block(tb).dimension)
    throw StructuralError("rename_block: dimension mismatch between '" + from +
                          "' and '" + to + "'");
  for (int i = 0; i < source.block(b).dimension; ++i) {
    images_[VarRef{b, i}.key()] = Polynomial::variable(target_, VarRef{tb, i});
  }
}

PolyMat jacobian_transpose(const PolyVec& vec, const std::string& block) {
  if (vec.empty()) return {};
  const SpacePtr& space = vec.front().space();
  int b = space->block_index(block);
  int rows = space->block(b).dimension;
  PolyMat out(rows, PolyVec(vec.size()));
  for (int i = 0; i < rows; ++i) {
    for (size_t j = 0; j < vec.size(); ++j) {
      out[i][j] = vec[j].differentiate(VarRef{b, static_cast<int32_t>(i)});
    }
  }
  return out;
}

Polynomial squared_norm(SpacePtr space, const std::string& block) {
  int b = space->block_index(block);
  Polynomial out(space);
  for (int i = 0; i < space->block(b).dimension; ++i) {
    Polynomial xi = Polynomial::variable(space, VarRef{b, i});
    out += xi * xi;
  }
  return out;
}

PolyVec compose_all(const PolyVec& vec, const Substitution& subst) {
  PolyVec out;
  out.reserve(vec.size());
  for (const auto& p : vec) out.push_back(p.compose(subst));
  return out;
}

double evaluate_all_max_abs(const PolyVec& vec, const Point& point) {
  double m = 0.0;
  for (const auto& p : vec) m = std::max(m, std::abs(p.evaluate(point)));
  return m;
}

}  // namespace loopcert
