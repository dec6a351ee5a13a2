#include "loopcert/sim/controller_solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>

namespace loopcert {

namespace {

struct KktPoint {
  Eigen::VectorXd theta;
  Eigen::VectorXd lambda_a;
  Eigen::VectorXd lambda_b;
  double objective = 0.0;
};

struct BoxBounds {
  // per coordinate: bound value and the g_U row that realizes it
  std::vector<double> lower, upper;
  std::vector<int> lower_row, upper_row;
  std::vector<double> lower_grad, upper_grad;
  int rows = 0;
};

// Recognizes a coordinate box {g_U >= 0} with affine single-variable rows.
std::optional<BoxBounds> detect_box(const PolyVec& g_U, int n_u) {
  BoxBounds box;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  box.lower.assign(n_u, -kInf);
  box.upper.assign(n_u, kInf);
  box.lower_row.assign(n_u, -1);
  box.upper_row.assign(n_u, -1);
  box.lower_grad.assign(n_u, 0.0);
  box.upper_grad.assign(n_u, 0.0);
  box.rows = static_cast<int>(g_U.size());

  for (int j = 0; j < box.rows; ++j) {
    const Polynomial& row = g_U[j];
    if (row.total_degree() > 1) return std::nullopt;
    double c = row.constant_value();
    int var = -1;
    double slope = 0.0;
    for (const auto& [m, coeff] : row.terms()) {
      if (m.is_unit()) continue;
      if (var >= 0) return std::nullopt;  // touches two variables
      VarRef vr = VarRef::from_key(m.factors().front().var);
      var = vr.index;
      slope = coeff;
    }
    if (var < 0 || slope == 0.0) return std::nullopt;
    double bound = -c / slope;
    if (slope > 0) {
      if (bound > box.lower[var]) {
        box.lower[var] = bound;
        box.lower_row[var] = j;
        box.lower_grad[var] = slope;
      }
    } else {
      if (bound < box.upper[var]) {
        box.upper[var] = bound;
        box.upper_row[var] = j;
        box.upper_grad[var] = slope;
      }
    }
  }
  return box;
}

struct QpData {
  Eigen::MatrixXd H;
  Eigen::VectorXd q;
  double c0 = 0.0;
  Eigen::MatrixXd A;
  Eigen::VectorXd a0;
  Eigen::MatrixXd B;
  Eigen::VectorXd b0;
};

// Restriction of a general problem to fixed s: polynomials over theta only.
struct Restricted {
  SpacePtr space;
  Polynomial J;
  PolyVec a, b;
};

Restricted restrict_at(const GeneralNlpController& g, const Eigen::VectorXd& s,
                       int n_theta) {
  Restricted r;
  r.space = make_space({{kThetaBlock, n_theta}});
  auto fix = [&](const Polynomial& p) {
    Substitution sub(r.space);
    if (p.space()->has_block(kParamBlock)) {
      PolyVec imgs;
      for (int i = 0; i < s.size(); ++i)
        imgs.push_back(Polynomial::constant(r.space, s(i)));
      sub.map_block(*p.space(), kParamBlock, imgs);
    }
    return p.compose(sub);
  };
  r.J = fix(g.J);
  for (const auto& row : g.a) r.a.push_back(fix(row));
  for (const auto& row : g.b) r.b.push_back(fix(row));
  return r;
}

std::optional<QpData> extract_qp(const Restricted& r, int n) {
  if (r.J.total_degree() > 2) return std::nullopt;
  for (const auto& row : r.a)
    if (row.total_degree() > 1) return std::nullopt;
  for (const auto& row : r.b)
    if (row.total_degree() > 1) return std::nullopt;

  QpData qp;
  qp.H = Eigen::MatrixXd::Zero(n, n);
  qp.q = Eigen::VectorXd::Zero(n);
  qp.c0 = r.J.constant_value();
  for (const auto& [m, c] : r.J.terms()) {
    const auto& f = m.factors();
    if (m.total_degree() == 1) {
      qp.q(VarRef::from_key(f[0].var).index) += c;
    } else if (m.total_degree() == 2) {
      if (f.size() == 1) {
        int i = VarRef::from_key(f[0].var).index;
        qp.H(i, i) += 2 * c;
      } else {
        int i = VarRef::from_key(f[0].var).index;
        int j = VarRef::from_key(f[1].var).index;
        qp.H(i, j) += c;
        qp.H(j, i) += c;
      }
    }
  }
  auto affine = [&](const PolyVec& rows, Eigen::MatrixXd& M, Eigen::VectorXd& m0) {
    M = Eigen::MatrixXd::Zero(rows.size(), n);
    m0 = Eigen::VectorXd::Zero(rows.size());
    for (size_t j = 0; j < rows.size(); ++j) {
      m0(j) = rows[j].constant_value();
      for (const auto& [m, c] : rows[j].terms()) {
        if (m.total_degree() == 1)
          M(j, VarRef::from_key(m.factors()[0].var).index) += c;
      }
    }
  };
  affine(r.a, qp.A, qp.a0);
  affine(r.b, qp.B, qp.b0);
  return qp;
}

// All KKT points of the QP by exhaustive activity-pattern enumeration.
std::vector<KktPoint> enumerate_qp(const QpData& qp) {
  const int n = static_cast<int>(qp.H.rows());
  const int na = static_cast<int>(qp.A.rows());
  const int nb = static_cast<int>(qp.B.rows());
  std::vector<KktPoint> points;

  for (uint32_t mask = 0; mask < (1u << na); ++mask) {
    std::vector<int> active;
    for (int j = 0; j < na; ++j)
      if (mask & (1u << j)) active.push_back(j);
    const int k = static_cast<int>(active.size());
    if (k > n) continue;

    const int dim = n + k + nb;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    M.topLeftCorner(n, n) = qp.H;
    for (int t = 0; t < k; ++t) {
      M.block(0, n + t, n, 1) = -qp.A.row(active[t]).transpose();
      M.block(n + t, 0, 1, n) = qp.A.row(active[t]);
      rhs(n + t) = -qp.a0(active[t]);
    }
    if (nb > 0) {
      M.block(0, n + k, n, nb) = qp.B.transpose();
      M.block(n + k, 0, nb, n) = qp.B;
      rhs.tail(nb) = -qp.b0;
    }
    rhs.head(n) = -qp.q;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (!lu.isInvertible()) continue;
    Eigen::VectorXd sol = lu.solve(rhs);
    if ((M * sol - rhs).cwiseAbs().maxCoeff() > 1e-8 * (1 + rhs.cwiseAbs().maxCoeff()))
      continue;

    KktPoint p;
    p.theta = sol.head(n);
    p.lambda_a = Eigen::VectorXd::Zero(na);
    for (int t = 0; t < k; ++t) p.lambda_a(active[t]) = sol(n + t);
    p.lambda_b = sol.tail(nb);
    if (na > 0 && (qp.A * p.theta + qp.a0).minCoeff() < -1e-9) continue;
    if (k > 0 && p.lambda_a.minCoeff() < -1e-9) continue;
    p.objective = 0.5 * p.theta.dot(qp.H * p.theta) + qp.q.dot(p.theta) + qp.c0;
    bool dup = false;
    for (const auto& other : points) {
      if ((other.theta - p.theta).cwiseAbs().maxCoeff() < 1e-9 &&
          (other.lambda_a - p.lambda_a).cwiseAbs().maxCoeff() < 1e-9) {
        dup = true;
        break;
      }
    }
    if (!dup) points.push_back(std::move(p));
  }
  return points;
}

// Semismooth Newton on the KKT system with the Fischer-Burmeister function,
// restarted from multiple initial points. zeta = [theta; lambda_a; lambda_b].
class FbSolver {
 public:
  explicit FbSolver(const Restricted& r) : r_(r) {
    n_ = r.space->block(0).dimension;
    na_ = static_cast<int>(r.a.size());
    nb_ = static_cast<int>(r.b.size());
    for (int i = 0; i < n_; ++i) grad_J_.push_back(r.J.differentiate(VarRef{0, i}));
    hess_J_.assign(n_, PolyVec(n_));
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) hess_J_[i][j] = grad_J_[i].differentiate(VarRef{0, j});
    grad_a_.assign(na_, PolyVec(n_));
    hess_a_.assign(na_, PolyMat());
    for (int j = 0; j < na_; ++j) {
      for (int i = 0; i < n_; ++i) grad_a_[j][i] = r.a[j].differentiate(VarRef{0, i});
      hess_a_[j].assign(n_, PolyVec(n_));
      for (int i = 0; i < n_; ++i)
        for (int k = 0; k < n_; ++k)
          hess_a_[j][i][k] = grad_a_[j][i].differentiate(VarRef{0, k});
    }
    grad_b_.assign(nb_, PolyVec(n_));
    hess_b_.assign(nb_, PolyMat());
    for (int j = 0; j < nb_; ++j) {
      for (int i = 0; i < n_; ++i) grad_b_[j][i] = r.b[j].differentiate(VarRef{0, i});
      hess_b_[j].assign(n_, PolyVec(n_));
      for (int i = 0; i < n_; ++i)
        for (int k = 0; k < n_; ++k)
          hess_b_[j][i][k] = grad_b_[j][i].differentiate(VarRef{0, k});
    }
  }

  std::vector<KktPoint> run(std::mt19937_64& rng, double scale, int starts) const {
    std::vector<KktPoint> points;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < starts; ++trial) {
      Eigen::VectorXd zeta = Eigen::VectorXd::Zero(n_ + na_ + nb_);
      if (trial > 0)
        for (int i = 0; i < n_; ++i) zeta(i) = scale * gauss(rng);
      for (int j = 0; j < na_; ++j) zeta(n_ + j) = 1.0;
      if (newton(zeta)) {
        KktPoint p;
        p.theta = zeta.head(n_);
        p.lambda_a = zeta.segment(n_, na_);
        p.lambda_b = zeta.tail(nb_);
        Point pt(r_.space);
        pt.set(0, p.theta);
        p.objective = r_.J.evaluate(pt);
        bool dup = false;
        for (const auto& other : points)
          if ((other.theta - p.theta).cwiseAbs().maxCoeff() < 1e-7) dup = true;
        if (!dup) points.push_back(std::move(p));
      }
    }
    return points;
  }

 private:
  static double fb(double p, double q) {
    return std::sqrt(p * p + q * q + 1e-18) - p - q;
  }

  void eval_F(const Eigen::VectorXd& zeta, Eigen::VectorXd& F) const {
    Point pt(r_.space);
    pt.set(0, zeta.head(n_));
    Eigen::VectorXd la = zeta.segment(n_, na_);
    Eigen::VectorXd lb = zeta.tail(nb_);
    F.resize(n_ + nb_ + na_);
    for (int i = 0; i < n_; ++i) {
      double v = grad_J_[i].evaluate(pt);
      for (int j = 0; j < na_; ++j) v -= grad_a_[j][i].evaluate(pt) * la(j);
      for (int j = 0; j < nb_; ++j) v += grad_b_[j][i].evaluate(pt) * lb(j);
      F(i) = v;
    }
    for (int j = 0; j < nb_; ++j) F(n_ + j) = r_.b[j].evaluate(pt);
    for (int j = 0; j < na_; ++j) F(n_ + nb_ + j) = fb(la(j), r_.a[j].evaluate(pt));
  }

  void eval_Jac(const Eigen::VectorXd& zeta, Eigen::MatrixXd& Jm) const {
    Point pt(r_.space);
    pt.set(0, zeta.head(n_));
    Eigen::VectorXd la = zeta.segment(n_, na_);
    Eigen::VectorXd lb = zeta.tail(nb_);
    const int dim = n_ + nb_ + na_;
    Jm.setZero(dim, dim);
    for (int i = 0; i < n_; ++i) {
      for (int k = 0; k < n_; ++k) {
        double v = hess_J_[i][k].evaluate(pt);
        for (int j = 0; j < na_; ++j) v -= hess_a_[j][i][k].evaluate(pt) * la(j);
        for (int j = 0; j < nb_; ++j) v += hess_b_[j][i][k].evaluate(pt) * lb(j);
        Jm(i, k) = v;
      }
      for (int j = 0; j < na_; ++j) Jm(i, n_ + j) = -grad_a_[j][i].evaluate(pt);
      for (int j = 0; j < nb_; ++j) Jm(i, n_ + na_ + j) = grad_b_[j][i].evaluate(pt);
    }
    for (int j = 0; j < nb_; ++j)
      for (int k = 0; k < n_; ++k) Jm(n_ + j, k) = grad_b_[j][k].evaluate(pt);
    for (int j = 0; j < na_; ++j) {
      double aj = r_.a[j].evaluate(pt);
      double r = std::sqrt(la(j) * la(j) + aj * aj + 1e-18);
      for (int k = 0; k < n_; ++k)
        Jm(n_ + nb_ + j, k) = (aj / r - 1.0) * grad_a_[j][k].evaluate(pt);
      Jm(n_ + nb_ + j, n_ + j) = la(j) / r - 1.0;
    }
  }

  bool newton(Eigen::VectorXd& zeta) const {
    Eigen::VectorXd F, Fnew;
    Eigen::MatrixXd Jm;
    eval_F(zeta, F);
    for (int it = 0; it < 120; ++it) {
      if (F.cwiseAbs().maxCoeff() < 1e-11) return true;
      eval_Jac(zeta, Jm);
      Eigen::VectorXd step = Jm.fullPivLu().solve(-F);
      if (!step.allFinite()) return false;
      double t = 1.0;
      double merit = F.squaredNorm();
      bool moved = false;
      while (t > 1e-10) {
        Eigen::VectorXd cand = zeta + t * step;
        eval_F(cand, Fnew);
        if (Fnew.squaredNorm() < merit) {
          zeta = cand;
          F = Fnew;
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) return F.cwiseAbs().maxCoeff() < 1e-9;
    }
    return F.cwiseAbs().maxCoeff() < 1e-9;
  }

  const Restricted& r_;
  int n_ = 0, na_ = 0, nb_ = 0;
  PolyVec grad_J_;
  PolyMat hess_J_;
  std::vector<PolyVec> grad_a_, grad_b_;
  std::vector<PolyMat> hess_a_, hess_b_;
};

std::vector<KktPoint> solve_restricted(const Restricted& r, std::mt19937_64& rng,
                                       double scale) {
  const int n = r.space->block(0).dimension;
  auto qp = extract_qp(r, n);
  if (qp && n <= ControllerSolver::kMaxEnumTheta &&
      static_cast<int>(r.a.size()) <= ControllerSolver::kMaxEnumIneq) {
    return enumerate_qp(*qp);
  }
  FbSolver fb(r);
  return fb.run(rng, scale, 24);
}

}  // namespace

ControllerSolver::ControllerSolver(const ControllerSpec& spec, const KktOptions& opts,
                                   uint64_t seed)
    : spec_(spec), opts_(opts), rng_(seed ^ 0x9e3779b97f4a7c15ull) {
  kkt_ = build_controller_kkt(spec_, opts_);
  if (const auto* p = std::get_if<ProjectionController>(&spec_.variant)) {
    // general-form view: J = 1/2 |theta - s|^2, a = g_U
    const int n_u =
        kkt_.set.space->block(kkt_.set.space->block_index(kThetaBlock)).dimension;
    auto space = make_space({{kParamBlock, n_u}, {kThetaBlock, n_u}});
    Polynomial J(space);
    for (int i = 0; i < n_u; ++i) {
      Polynomial d = Polynomial::variable(space, kThetaBlock, i) -
                     Polynomial::variable(space, kParamBlock, i);
      J += d * d * 0.5;
    }
    flattened_.J = J;
    Substitution embed(space);
    for (const auto& row : p->g_U) flattened_.a.push_back(row.compose(embed));
  } else if (const auto* g = std::get_if<GeneralNlpController>(&spec_.variant)) {
    flattened_ = *g;
  } else if (const auto* m = std::get_if<MpcController>(&spec_.variant)) {
    flattened_ = flatten_mpc(*m);
  } else {
    is_chain_ = true;
    flattened_ = std::get<ProjectedGradientChainController>(spec_.variant).problem;
  }
}

ControllerSolution ControllerSolver::solve(const Eigen::VectorXd& s) const {
  ControllerSolution out;
  const SpacePtr& space = kkt_.set.space;
  out.point = Point(space);
  out.point.set(kParamBlock, s);

  auto finish = [&](double objective) {
    if (spec_.inexactness) {
      int nb = space->block_index(kDeltaBlock);
      out.point.set(nb, Eigen::VectorXd::Zero(space->block(nb).dimension));
    }
    out.u.resize(kkt_.kappa.size());
    for (size_t i = 0; i < kkt_.kappa.size(); ++i)
      out.u(i) = kkt_.kappa[i].evaluate(out.point);
    auto mem = kkt_.set.membership(out.point, 0.0);
    out.kkt_residual = std::max(mem.max_equality_violation, mem.max_inequality_violation);
    out.objective = objective;
    out.ok = true;
  };

  if (!is_chain_) {
    if (const auto* p = std::get_if<ProjectionController>(&spec_.variant)) {
      const int n_u = static_cast<int>(s.size());
      if (auto box = detect_box(p->g_U, n_u)) {
        // exact clamp
        Eigen::VectorXd theta(n_u);
        Eigen::VectorXd lambda = Eigen::VectorXd::Zero(box->rows);
        for (int i = 0; i < n_u; ++i) {
          theta(i) = std::min(std::max(s(i), box->lower[i]), box->upper[i]);
          if (theta(i) != s(i)) {
            if (theta(i) == box->upper[i] && box->upper_row[i] >= 0) {
              lambda(box->upper_row[i]) = (theta(i) - s(i)) / box->upper_grad[i];
            } else if (box->lower_row[i] >= 0) {
              lambda(box->lower_row[i]) = (theta(i) - s(i)) / box->lower_grad[i];
            }
          }
        }
        out.point.set(kThetaBlock, theta);
        out.point.set(kLambdaBlock, lambda);
        finish(0.5 * (theta - s).squaredNorm());
        return out;
      }
    }

    const int n_theta =
        flattened_.J.space()->block(flattened_.J.space()->block_index(kThetaBlock))
            .dimension;
    Restricted r = restrict_at(flattened_, s, n_theta);
    double scale = 1.0 + s.cwiseAbs().maxCoeff();
    std::vector<KktPoint> pts = solve_restricted(r, rng_, scale);
    if (pts.empty()) {
      out.note = "no KKT point found for the inner problem";
      return out;
    }
    const KktPoint* best = &pts.front();
    for (const auto& p : pts)
      if (p.objective < best->objective) best = &p;

    if (std::holds_alternative<ProjectionController>(spec_.variant)) {
      out.point.set(kThetaBlock, best->theta);
      out.point.set(kLambdaBlock, best->lambda_a);
    } else {
      out.point.set(kThetaBlock, best->theta);
      if (space->has_block(kLambdaABlock)) out.point.set(kLambdaABlock, best->lambda_a);
      if (space->has_block(kLambdaBBlock)) out.point.set(kLambdaBBlock, best->lambda_b);
    }
    finish(best->objective);
    return out;
  }

  // projected gradient chain: execute the literal iterations
  const auto& pg = std::get<ProjectedGradientChainController>(spec_.variant);
  const int n_theta =
      flattened_.J.space()->block(flattened_.J.space()->block_index(kThetaBlock))
          .dimension;
  Restricted r = restrict_at(flattened_, s, n_theta);

  Eigen::VectorXd theta_cur = Eigen::VectorXd::Zero(n_theta);
  if (!pg.initial_iterate.empty()) {
    auto s_space = pg.initial_iterate.front().space();
    Point ps(s_space);
    if (s_space->has_block(kParamBlock)) ps.set(kParamBlock, s);
    for (int i = 0; i < n_theta; ++i) theta_cur(i) = pg.initial_iterate[i].evaluate(ps);
  }

  PolyVec grad;
  for (int i = 0; i < n_theta; ++i) grad.push_back(r.J.differentiate(VarRef{0, i}));

  double scale = 1.0 + s.cwiseAbs().maxCoeff();
  for (int k = 1; k <= pg.iterations; ++k) {
    Point pt(r.space);
    pt.set(0, theta_cur);
    Eigen::VectorXd g(n_theta);
    for (int i = 0; i < n_theta; ++i) g(i) = grad[i].evaluate(pt);
    Eigen::VectorXd target = theta_cur - pg.step * g;

    Restricted proj;
    proj.space = r.space;
    proj.J = Polynomial(r.space);
    for (int i = 0; i < n_theta; ++i) {
      Polynomial d = Polynomial::variable(r.space, VarRef{0, i}) -
                     Polynomial::constant(r.space, target(i));
      proj.J += d * d * 0.5;
    }
    proj.a = r.a;
    proj.b = r.b;
    std::vector<KktPoint> pts = solve_restricted(proj, rng_, scale);
    if (pts.empty()) {
      out.note = "projection step " + std::to_string(k) + " found no KKT point";
      return out;
    }
    const KktPoint* best = &pts.front();
    for (const auto& p : pts)
      if (p.objective < best->objective) best = &p;

    out.point.set("theta_" + std::to_string(k), best->theta);
    if (space->has_block("lambda_a_" + std::to_string(k)))
      out.point.set("lambda_a_" + std::to_string(k), best->lambda_a);
    if (space->has_block("lambda_b_" + std::to_string(k)))
      out.point.set("lambda_b_" + std::to_string(k), best->lambda_b);
    theta_cur = best->theta;
  }

  Point pt(r.space);
  pt.set(0, theta_cur);
  finish(r.J.evaluate(pt));
  return out;
}

}  // namespace loopcert
