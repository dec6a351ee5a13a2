#include "loopcert/sos/basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace loopcert {

namespace {

// Enumerate all exponent vectors of total degree <= max_degree over vars,
// emitted as monomials.
void enumerate(const std::vector<uint64_t>& vars, int max_degree, size_t pos,
               std::vector<std::pair<uint64_t, int>>& current, int used,
               std::vector<Monomial>& out) {
  if (pos == vars.size()) {
    out.push_back(Monomial::from_factors(current));
    return;
  }
  for (int e = 0; e + used <= max_degree; ++e) {
    if (e > 0) current.emplace_back(vars[pos], e);
    enumerate(vars, max_degree, pos + 1, current, used + e, out);
    if (e > 0) current.pop_back();
  }
}

}  // namespace

bool in_convex_hull(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& t,
                    double tol) {
  if (points.empty()) return false;
  const int n = static_cast<int>(t.size());
  const int m = n + 1;                          // rows: coordinates + convexity
  const int N = static_cast<int>(points.size());  // weight columns

  // phase-1 simplex: min sum(artificials) s.t. [P; 1'] w + I a = [t; 1]
  Eigen::MatrixXd T(m, N + m + 1);
  T.setZero();
  for (int k = 0; k < N; ++k) {
    T.col(k).head(n) = points[k];
    T(n, k) = 1.0;
  }
  T.col(N + m).head(n) = t;
  T(n, N + m) = 1.0;
  for (int i = 0; i < m; ++i) {
    if (T(i, N + m) < 0) T.row(i) = -T.row(i);
    T(i, N + i) = 1.0;
  }

  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = N + i;

  // reduced cost row for minimizing the artificial sum
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(N + m);
  cost.tail(m).setOnes();
  Eigen::VectorXd reduced = cost;
  double objective = 0.0;
  for (int i = 0; i < m; ++i) {  // subtract basic (artificial) rows
    reduced -= T.row(i).head(N + m).transpose();
    objective -= T(i, N + m);
  }

  const int max_pivots = 50 * (N + m);
  for (int iter = 0; iter < max_pivots; ++iter) {
    // Bland's rule: smallest-index entering column
    int enter = -1;
    for (int j = 0; j < N + m; ++j) {
      if (reduced(j) < -1e-9) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;
    int leave = -1;
    double best = 0.0;
    for (int i = 0; i < m; ++i) {
      if (T(i, enter) > 1e-11) {
        double ratio = T(i, N + m) / T(i, enter);
        if (leave < 0 || ratio < best - 1e-12 ||
            (std::abs(ratio - best) <= 1e-12 && basis[i] < basis[leave])) {
          leave = i;
          best = ratio;
        }
      }
    }
    if (leave < 0) break;  // unbounded; cannot happen in phase 1
    T.row(leave) /= T(leave, enter);
    for (int i = 0; i < m; ++i) {
      if (i != leave && std::abs(T(i, enter)) > 1e-13) T.row(i) -= T(i, enter) * T.row(leave);
    }
    double re = reduced(enter);
    reduced -= re * T.row(leave).head(N + m).transpose();
    objective -= re * T(leave, N + m);
    basis[leave] = enter;
  }
  return -objective <= tol;  // artificial sum driven to ~0
}

std::vector<Monomial> candidate_basis(const BasisSpec& spec, const SpacePtr& space,
                                      const std::vector<Monomial>& context_support) {
  if (spec.max_degree < 0) throw StructuralError("basis degree must be >= 0");

  std::vector<uint64_t> vars;
  std::set<std::string> wanted(spec.blocks.begin(), spec.blocks.end());
  for (int b = 0; b < space->block_count(); ++b) {
    if (!spec.blocks.empty() && wanted.count(space->block(b).name) == 0) continue;
    for (int i = 0; i < space->block(b).dimension; ++i)
      vars.push_back(VarRef{b, i}.key());
  }

  std::vector<Monomial> all;
  std::vector<std::pair<uint64_t, int>> scratch;
  enumerate(vars, spec.max_degree, 0, scratch, 0, all);

  if (!spec.require_blocks.empty()) {
    std::set<int> required;
    for (const auto& name : spec.require_blocks) {
      if (auto b = space->find_block(name)) required.insert(*b);
    }
    std::erase_if(all, [&](const Monomial& m) {
      return m.degree_where([&](VarRef v) { return required.count(v.block) > 0; }) == 0;
    });
  }

  if (spec.reduction == BasisSpec::Reduction::NewtonPolytope && !context_support.empty()) {
    // coordinate frame: every variable appearing in the context or candidates
    std::map<uint64_t, int> coord;
    auto note_vars = [&](const Monomial& m) {
      for (const auto& f : m.factors()) coord.try_emplace(f.var, 0);
    };
    for (const auto& m : context_support) note_vars(m);
    for (const auto& m : all) note_vars(m);
    int n = 0;
    for (auto& [k, idx] : coord) idx = n++;

    auto to_vec = [&](const Monomial& m, double scale) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
      for (const auto& f : m.factors()) v(coord.at(f.var)) = scale * f.exponent;
      return v;
    };
    std::vector<Eigen::VectorXd> pts;
    pts.reserve(context_support.size());
    for (const auto& m : context_support) pts.push_back(to_vec(m, 1.0));

    // cheap necessary conditions before the LP: degree range and coordinate box
    int dmin = std::numeric_limits<int>::max(), dmax = 0;
    Eigen::VectorXd box = Eigen::VectorXd::Zero(n);
    for (const auto& p : pts) {
      double s = p.sum();
      dmin = std::min(dmin, static_cast<int>(std::lround(s)));
      dmax = std::max(dmax, static_cast<int>(std::lround(s)));
      box = box.cwiseMax(p);
    }

    std::vector<Monomial> kept;
    for (const auto& m : all) {
      Eigen::VectorXd doubled = to_vec(m, 2.0);
      int deg2 = 2 * m.total_degree();
      if (deg2 < dmin || deg2 > dmax) continue;
      if ((doubled.array() > box.array() + 1e-9).any()) continue;
      if (in_convex_hull(pts, doubled)) kept.push_back(m);
    }
    all = std::move(kept);
  }

  std::sort(all.begin(), all.end(), GradedLexLess{});
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

std::vector<Monomial> candidate_basis(const BasisSpec& spec, const SpacePtr& space,
                                      const Polynomial* context) {
  std::vector<Monomial> support;
  if (context) support = context->support();
  return candidate_basis(spec, space, support);
}

}  // namespace loopcert
