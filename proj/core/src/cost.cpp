#include "loopcert/certify/cost.hpp"

#include <cmath>
#include <functional>

#include "loopcert/kkt/closed_loop.hpp"

namespace loopcert {

void CostSpec::validate() const {
  if (!(discount > 0.0 && discount < 1.0))
    throw StructuralError("discount factor must lie in (0, 1)");
  if (exit_penalty && !(std::isfinite(*exit_penalty) && *exit_penalty > 0))
    throw StructuralError("exit penalty L must be finite and positive");
}

void MomentTable::set(std::vector<int> w_exp, std::vector<int> v_exp, double value) {
  if (static_cast<int>(w_exp.size()) != nw_ || static_cast<int>(v_exp.size()) != nv_)
    throw StructuralError("moment index length does not match noise dimensions");
  int deg = 0;
  bool pure_even = true;
  for (int e : w_exp) {
    if (e < 0) throw StructuralError("negative moment index");
    deg += e;
    if (e % 2) pure_even = false;
  }
  for (int e : v_exp) {
    if (e < 0) throw StructuralError("negative moment index");
    deg += e;
    if (e % 2) pure_even = false;
  }
  if (deg == 0 && std::abs(value - 1.0) > 1e-12)
    throw StructuralError("the empty moment index must have value 1 (probability measure)");
  if (pure_even && deg > 0 && value < 0)
    throw StructuralError("even pure moments must be nonnegative");
  max_degree_ = std::max(max_degree_, deg);
  moments_[{std::move(w_exp), std::move(v_exp)}] = value;
}

std::optional<double> MomentTable::get(const std::vector<int>& w_exp,
                                       const std::vector<int>& v_exp) const {
  int deg = 0;
  for (int e : w_exp) deg += e;
  for (int e : v_exp) deg += e;
  if (deg == 0) return 1.0;
  auto it = moments_.find({w_exp, v_exp});
  if (it == moments_.end()) return std::nullopt;
  return it->second;
}

namespace {

void enumerate_indices(int len, int degree, std::vector<int>& cur, size_t pos,
                       const std::function<void(const std::vector<int>&)>& fn, int used) {
  if (pos == static_cast<size_t>(len)) {
    fn(cur);
    return;
  }
  for (int e = 0; e + used <= degree; ++e) {
    cur[pos] = e;
    enumerate_indices(len, degree, cur, pos + 1, fn, used + e);
  }
  cur[pos] = 0;
}

}  // namespace

MomentTable MomentTable::zero_noise(int nw, int nv, int degree) {
  MomentTable t(nw, nv);
  std::vector<int> wi(nw, 0), vi(nv, 0);
  enumerate_indices(nw, degree, wi, 0,
                    [&](const std::vector<int>& w) {
                      std::vector<int> vcur(nv, 0);
                      enumerate_indices(
                          nv, degree, vcur, 0,
                          [&](const std::vector<int>& v) {
                            int deg = 0;
                            for (int e : w) deg += e;
                            for (int e : v) deg += e;
                            t.set(w, v, deg == 0 ? 1.0 : 0.0);
                          },
                          0);
                    },
                    0);
  t.max_degree_ = degree;
  return t;
}

MomentTable MomentTable::independent(const std::vector<std::vector<double>>& w_moments,
                                     const std::vector<std::vector<double>>& v_moments,
                                     int degree) {
  MomentTable t(static_cast<int>(w_moments.size()), static_cast<int>(v_moments.size()));
  auto coord = [&](const std::vector<std::vector<double>>& table, int i, int k) {
    if (k == 0) return 1.0;
    if (i >= static_cast<int>(table.size()) || k >= static_cast<int>(table[i].size()))
      throw StructuralError("per-coordinate moment sequence too short");
    return table[i][k];
  };
  std::vector<int> wi(t.nw_, 0);
  enumerate_indices(t.nw_, degree, wi, 0,
                    [&](const std::vector<int>& w) {
                      int wd = 0;
                      for (int e : w) wd += e;
                      std::vector<int> vcur(t.nv_, 0);
                      enumerate_indices(
                          t.nv_, degree - wd, vcur, 0,
                          [&](const std::vector<int>& v) {
                            double val = 1.0;
                            for (int i = 0; i < t.nw_; ++i) val *= coord(w_moments, i, w[i]);
                            for (int i = 0; i < t.nv_; ++i) val *= coord(v_moments, i, v[i]);
                            t.set(w, v, val);
                          },
                          0);
                    },
                    0);
  t.max_degree_ = degree;
  return t;
}

double MomentTable::moment_of(const VariableSpace& space, const Monomial& m) const {
  std::vector<int> w_exp(nw_, 0), v_exp(nv_, 0);
  auto wb = space.find_block(kProcessNoiseBlock);
  auto vb = space.find_block(kMeasNoiseBlock);
  for (const auto& f : m.factors()) {
    VarRef v = VarRef::from_key(f.var);
    if (wb && v.block == *wb) {
      w_exp.at(v.index) = f.exponent;
    } else if (vb && v.block == *vb) {
      v_exp.at(v.index) = f.exponent;
    } else {
      throw StructuralError("moment_of: monomial has non-noise variables");
    }
  }
  auto val = get(w_exp, v_exp);
  if (!val) {
    throw StructuralError("missing moment index for monomial " + m.str(space));
  }
  return *val;
}

namespace {

// splits a monomial into its (w, v) part and the rest
std::pair<Monomial, Monomial> split_noise(const VariableSpace& space, const Monomial& m) {
  auto wb = space.find_block(kProcessNoiseBlock);
  auto vb = space.find_block(kMeasNoiseBlock);
  std::vector<std::pair<uint64_t, int>> noise, rest;
  for (const auto& f : m.factors()) {
    VarRef v = VarRef::from_key(f.var);
    bool is_noise = (wb && v.block == *wb) || (vb && v.block == *vb);
    (is_noise ? noise : rest).emplace_back(f.var, f.exponent);
  }
  return {Monomial::from_factors(std::move(noise)), Monomial::from_factors(std::move(rest))};
}

}  // namespace

Polynomial apply_expectation(const Polynomial& p, const MomentTable& moments) {
  Polynomial out(p.space());
  for (const auto& [m, c] : p.terms()) {
    auto [noise, rest] = split_noise(*p.space(), m);
    double mom = noise.is_unit() ? 1.0 : moments.moment_of(*p.space(), noise);
    if (mom != 0.0) out += Polynomial::term(p.space(), rest, c * mom);
  }
  return out;
}

PolyExpr apply_expectation(const PolyExpr& p, const MomentTable& moments) {
  PolyExpr out(p.space());
  for (const auto& [m, e] : p.terms()) {
    auto [noise, rest] = split_noise(*p.space(), m);
    double mom = noise.is_unit() ? 1.0 : moments.moment_of(*p.space(), noise);
    if (mom != 0.0) out.add_term(rest, e * mom);
  }
  return out;
}

}  // namespace loopcert
