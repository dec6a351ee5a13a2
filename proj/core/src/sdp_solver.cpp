#include "loopcert/sdp/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>
#include <vector>

namespace loopcert {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct BlockState {
  SdpBlock::Kind kind;
  int dim;
  MatrixXd X, Z, W, Zinv;  // PSD blocks
  VectorXd xd, zd, wd, zinvd;  // diagonal blocks
};

// Dense symmetric matrix from coefficient entries; <A, X> convention:
// sum_e v_e X(i,j) with i <= j, i.e. A(i,j)=A(j,i)=v/2 off-diagonal.
MatrixXd densify(const std::vector<SdpCoeff>& entries, int block, int dim) {
  MatrixXd A = MatrixXd::Zero(dim, dim);
  for (const auto& e : entries) {
    if (e.block != block) continue;
    if (e.i == e.j) {
      A(e.i, e.i) += e.value;
    } else {
      A(e.i, e.j) += e.value / 2;
      A(e.j, e.i) += e.value / 2;
    }
  }
  return A;
}

double inner(const std::vector<SdpCoeff>& entries, int block, const MatrixXd& B) {
  double v = 0.0;
  for (const auto& e : entries) {
    if (e.block == block) v += e.value * B(e.i, e.j);
  }
  return v;
}

// Largest step alpha <= 1 with X + alpha * D staying PSD (fraction tau).
double psd_step(const MatrixXd& X, const MatrixXd& D, double tau) {
  Eigen::LLT<MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  MatrixXd L = llt.matrixL();
  MatrixXd T = L.triangularView<Eigen::Lower>().solve(D);
  T = L.triangularView<Eigen::Lower>().solve(T.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (T + T.transpose()),
                                              Eigen::EigenvaluesOnly);
  double lmin = eig.eigenvalues().minCoeff();
  if (lmin >= -1e-16) return 1.0;
  return std::min(1.0, -tau / lmin);
}

double diag_step(const VectorXd& x, const VectorXd& d, double tau) {
  double alpha = 1.0;
  for (int i = 0; i < x.size(); ++i) {
    if (d(i) < 0) alpha = std::min(alpha, -tau * x(i) / d(i));
  }
  return alpha;
}

struct ScaledProblem {
  // minimize-sense internal copy with row/column equilibration
  std::vector<SdpBlock> blocks;
  int num_free = 0;
  int m = 0;
  std::vector<std::vector<SdpCoeff>> A;
  std::vector<std::vector<std::pair<int, double>>> F;
  VectorXd b;
  std::vector<SdpCoeff> C;
  std::vector<std::pair<int, double>> cf;
  VectorXd row_scale;   // original row / row_scale = scaled row
  VectorXd col_scale;   // free column scaling
  std::vector<int> kept_rows;       // scaled row -> original row
  std::vector<int> kept_free;       // scaled free index -> original index
  double sign = 1.0;                // -1 when original problem maximizes
  bool trivially_infeasible = false;
  int trivial_row = -1;
  bool unbounded_free = false;
};

ScaledProblem preprocess(const SdpProblem& p) {
  ScaledProblem s;
  s.blocks = p.blocks;
  s.sign = p.maximize ? -1.0 : 1.0;

  // drop rows with no content; fail on 0 = b with b != 0
  const int m0 = p.num_constraints();
  std::vector<double> scales;
  for (int k = 0; k < m0; ++k) {
    double mx = 0.0;
    for (const auto& e : p.constraint_matrix[k]) mx = std::max(mx, std::abs(e.value));
    for (const auto& [idx, v] : p.constraint_free[k]) mx = std::max(mx, std::abs(v));
    if (mx == 0.0) {
      if (std::abs(p.rhs[k]) > 1e-10) {
        s.trivially_infeasible = true;
        s.trivial_row = k;
      }
      continue;  // degenerate 0 = 0 row
    }
    s.kept_rows.push_back(k);
    scales.push_back(mx);
  }
  s.m = static_cast<int>(s.kept_rows.size());
  s.row_scale = Eigen::Map<VectorXd>(scales.data(), scales.size());

  // free-variable column norms (over kept rows)
  VectorXd colmax = VectorXd::Zero(p.num_free);
  for (int r = 0; r < s.m; ++r) {
    for (const auto& [idx, v] : p.constraint_free[s.kept_rows[r]])
      colmax(idx) = std::max(colmax(idx), std::abs(v) / s.row_scale(r));
  }
  std::vector<int> free_map(p.num_free, -1);
  for (int j = 0; j < p.num_free; ++j) {
    if (colmax(j) > 0) {
      free_map[j] = static_cast<int>(s.kept_free.size());
      s.kept_free.push_back(j);
    }
  }
  s.num_free = static_cast<int>(s.kept_free.size());
  s.col_scale = VectorXd::Ones(s.num_free);
  for (int j = 0; j < s.num_free; ++j) s.col_scale(j) = colmax(s.kept_free[j]);

  s.A.resize(s.m);
  s.F.resize(s.m);
  s.b.resize(s.m);
  for (int r = 0; r < s.m; ++r) {
    int k = s.kept_rows[r];
    double sc = s.row_scale(r);
    s.b(r) = p.rhs[k] / sc;
    for (const auto& e : p.constraint_matrix[k])
      s.A[r].push_back(SdpCoeff{e.block, e.i, e.j, e.value / sc});
    for (const auto& [idx, v] : p.constraint_free[k]) {
      int nj = free_map[idx];
      s.F[r].emplace_back(nj, v / (sc * s.col_scale(nj)));
    }
  }
  for (const auto& e : p.objective_matrix)
    s.C.push_back(SdpCoeff{e.block, e.i, e.j, s.sign * e.value});
  for (const auto& [idx, v] : p.objective_free) {
    if (free_map[idx] >= 0) {
      int nj = free_map[idx];
      s.cf.emplace_back(nj, s.sign * v / s.col_scale(nj));
    } else if (std::abs(v) > 1e-14) {
      s.unbounded_free = true;  // objective moves along an unconstrained direction
    }
  }
  return s;
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& problem, const SolverConfig& config) {
  SdpSolution sol;
  ScaledProblem sp = preprocess(problem);

  const int nb = static_cast<int>(sp.blocks.size());
  auto finalize_blocks = [&](const std::vector<BlockState>& st) {
    sol.block_values.resize(nb);
    for (int b = 0; b < nb; ++b) {
      if (sp.blocks[b].kind == SdpBlock::Kind::Psd) {
        sol.block_values[b] = st[b].X;
      } else {
        sol.block_values[b] = st[b].xd;
      }
    }
  };

  if (sp.trivially_infeasible) {
    sol.status = SdpSolution::Status::Infeasible;
    sol.infeasibility_ray = VectorXd::Zero(problem.num_constraints());
    int k = sp.trivial_row;
    sol.infeasibility_ray(k) = problem.rhs[k] > 0 ? 1.0 : -1.0;
    sol.message = "constraint row " + std::to_string(k) + " has no variables but b != 0";
    return sol;
  }
  if (sp.unbounded_free) {
    sol.status = SdpSolution::Status::NumericalFailure;
    sol.message = "objective moves along a free variable absent from all constraints";
    return sol;
  }

  sol.free_values = VectorXd::Zero(problem.num_free);
  sol.dual_values = VectorXd::Zero(problem.num_constraints());

  // cone dimension and per-block constraint adjacency
  int cone_dim = 0;
  for (const auto& b : sp.blocks) cone_dim += b.dim;
  std::vector<std::vector<int>> touch(nb);
  {
    std::vector<std::vector<char>> seen(nb);
    for (int b = 0; b < nb; ++b) seen[b].assign(sp.m, 0);
    for (int k = 0; k < sp.m; ++k) {
      for (const auto& e : sp.A[k]) {
        if (!seen[e.block][k]) {
          seen[e.block][k] = 1;
          touch[e.block].push_back(k);
        }
      }
    }
  }

  // norms for starting point and termination scaling
  double normC = 0.0;
  for (const auto& e : sp.C) normC = std::max(normC, std::abs(e.value));
  for (const auto& [j, v] : sp.cf) normC = std::max(normC, std::abs(v));
  double normA = 0.0;
  for (int k = 0; k < sp.m; ++k)
    for (const auto& e : sp.A[k]) normA = std::max(normA, std::abs(e.value));
  const double normb = sp.m > 0 ? sp.b.cwiseAbs().maxCoeff() : 0.0;
  const bool zero_objective = sp.C.empty() && sp.cf.empty();

  // state
  std::vector<BlockState> st(nb);
  double x0 = std::max({10.0, std::sqrt(static_cast<double>(cone_dim)), 10.0 * normb});
  double z0 = std::max({10.0, std::sqrt(static_cast<double>(cone_dim)), normC, normA});
  for (int b = 0; b < nb; ++b) {
    st[b].kind = sp.blocks[b].kind;
    st[b].dim = sp.blocks[b].dim;
    if (st[b].kind == SdpBlock::Kind::Psd) {
      st[b].X = x0 * MatrixXd::Identity(st[b].dim, st[b].dim);
      st[b].Z = z0 * MatrixXd::Identity(st[b].dim, st[b].dim);
    } else {
      st[b].xd = VectorXd::Constant(st[b].dim, x0);
      st[b].zd = VectorXd::Constant(st[b].dim, z0);
    }
  }
  VectorXd y = VectorXd::Zero(sp.m);
  VectorXd u = VectorXd::Zero(sp.num_free);

  // dense C per block
  std::vector<MatrixXd> Cb(nb);
  std::vector<VectorXd> Cbd(nb);
  for (int b = 0; b < nb; ++b) {
    if (st[b].kind == SdpBlock::Kind::Psd) {
      Cb[b] = densify(sp.C, b, st[b].dim);
    } else {
      Cbd[b] = VectorXd::Zero(st[b].dim);
      for (const auto& e : sp.C)
        if (e.block == b) Cbd[b](e.i) += e.value;
    }
  }
  VectorXd cf = VectorXd::Zero(sp.num_free);
  for (const auto& [j, v] : sp.cf) cf(j) += v;

  // sparse F
  SpMat Fmat(sp.m, std::max(1, sp.num_free));
  {
    std::vector<Triplet> trips;
    for (int k = 0; k < sp.m; ++k)
      for (const auto& [j, v] : sp.F[k]) trips.emplace_back(k, j, v);
    Fmat.setFromTriplets(trips.begin(), trips.end());
  }

  // KKT pattern: block-shared pairs + diagonal + free coupling + free diag
  const int kdim = sp.m + sp.num_free;
  std::vector<Triplet> ktrip;
  {
    std::vector<std::vector<char>> pair_seen;  // avoid duplicate (k,l) triplets per block pass
    for (int b = 0; b < nb; ++b) {
      for (size_t ia = 0; ia < touch[b].size(); ++ia) {
        for (size_t ib = ia; ib < touch[b].size(); ++ib) {
          int k = touch[b][ia], l = touch[b][ib];
          ktrip.emplace_back(std::min(k, l), std::max(k, l), 0.0);
        }
      }
    }
    for (int k = 0; k < sp.m; ++k) ktrip.emplace_back(k, k, 0.0);
    for (int k = 0; k < sp.m; ++k)
      for (const auto& [j, v] : sp.F[k]) ktrip.emplace_back(k, sp.m + j, v);
    for (int j = 0; j < sp.num_free; ++j)
      ktrip.emplace_back(sp.m + j, sp.m + j, -1.0);
  }

  Eigen::SimplicialLDLT<SpMat, Eigen::Upper> ldlt;
  SpMat K(kdim, kdim);
  K.setFromTriplets(ktrip.begin(), ktrip.end());
  ldlt.analyzePattern(K);

  // dense per-(block,constraint) data matrices for the Schur assembly
  std::vector<std::vector<MatrixXd>> Ak(nb);
  std::vector<std::vector<VectorXd>> Akd(nb);
  for (int b = 0; b < nb; ++b) {
    if (st[b].kind == SdpBlock::Kind::Psd) {
      Ak[b].reserve(touch[b].size());
      for (int k : touch[b]) Ak[b].push_back(densify(sp.A[k], b, st[b].dim));
    } else {
      for (int k : touch[b]) {
        VectorXd a = VectorXd::Zero(st[b].dim);
        for (const auto& e : sp.A[k])
          if (e.block == b) a(e.i) += e.value;
        Akd[b].push_back(a);
      }
    }
  }

  auto apply_A = [&](const std::vector<BlockState>& state, const VectorXd& uu) {
    VectorXd out = VectorXd::Zero(sp.m);
    for (int k = 0; k < sp.m; ++k) {
      double v = 0.0;
      for (const auto& e : sp.A[k]) {
        if (state[e.block].kind == SdpBlock::Kind::Psd)
          v += e.value * state[e.block].X(e.i, e.j);
        else
          v += e.value * state[e.block].xd(e.i);
      }
      for (const auto& [j, w] : sp.F[k]) v += w * uu(j);
      out(k) = v;
    }
    return out;
  };

  auto adjoint_into = [&](const VectorXd& yy, std::vector<MatrixXd>& outM,
                          std::vector<VectorXd>& outD) {
    for (int b = 0; b < nb; ++b) {
      if (st[b].kind == SdpBlock::Kind::Psd)
        outM[b].setZero(st[b].dim, st[b].dim);
      else
        outD[b].setZero(st[b].dim);
    }
    for (int b = 0; b < nb; ++b) {
      for (size_t t = 0; t < touch[b].size(); ++t) {
        int k = touch[b][t];
        if (st[b].kind == SdpBlock::Kind::Psd)
          outM[b] += yy(k) * Ak[b][t];
        else
          outD[b] += yy(k) * Akd[b][t];
      }
    }
  };

  std::vector<MatrixXd> AstarM(nb);
  std::vector<VectorXd> AstarD(nb);

  double prev_mu = std::numeric_limits<double>::infinity();
  double prev_rel_p = std::numeric_limits<double>::infinity();
  int stall_count = 0;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    // residuals
    VectorXd rp = sp.b - apply_A(st, u);
    adjoint_into(y, AstarM, AstarD);
    std::vector<MatrixXd> Rd(nb);
    std::vector<VectorXd> Rdd(nb);
    double dual_res = 0.0;
    for (int b = 0; b < nb; ++b) {
      if (st[b].kind == SdpBlock::Kind::Psd) {
        Rd[b] = Cb[b] - AstarM[b] - st[b].Z;
        dual_res = std::max(dual_res, Rd[b].cwiseAbs().maxCoeff());
      } else {
        Rdd[b] = Cbd[b] - AstarD[b] - st[b].zd;
        if (st[b].dim > 0) dual_res = std::max(dual_res, Rdd[b].cwiseAbs().maxCoeff());
      }
    }
    VectorXd rf = cf - Fmat.transpose() * y;
    if (sp.num_free > 0) dual_res = std::max(dual_res, rf.cwiseAbs().maxCoeff());

    double gap_inner = 0.0;
    for (int b = 0; b < nb; ++b) {
      if (st[b].kind == SdpBlock::Kind::Psd)
        gap_inner += (st[b].X.array() * st[b].Z.array()).sum();
      else
        gap_inner += st[b].xd.dot(st[b].zd);
    }
    double mu = gap_inner / std::max(1, cone_dim);

    double pobj = u.dot(cf);
    for (int b = 0; b < nb; ++b) {
      if (st[b].kind == SdpBlock::Kind::Psd)
        pobj += (Cb[b].array() * st[b].X.array()).sum();
      else
        pobj += Cbd[b].size() ? Cbd[b].dot(st[b].xd) : 0.0;
    }
    double dobj = sp.b.dot(y);

    double rel_p = (sp.m ? rp.cwiseAbs().maxCoeff() : 0.0) / (1.0 + normb);
    double rel_d = dual_res / (1.0 + normC);
    double rel_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));

    if (config.verbose) {
      std::cerr << "iter " << iter << " mu=" << mu << " rp=" << rel_p << " rd=" << rel_d
                << " gap=" << rel_gap << " pobj=" << pobj << "\n";
    }

    if (!std::isfinite(mu) || !std::isfinite(rel_p) || !std::isfinite(rel_d)) {
      sol.status = SdpSolution::Status::NumericalFailure;
      sol.iterations = iter;
      sol.message = "non-finite iterate";
      finalize_blocks(st);
      return sol;
    }

    const bool primal_ok = rel_p <= config.feasibility_tol;
    const bool dual_ok = rel_d <= config.feasibility_tol * 10;
    const bool converged = zero_objective
                               ? primal_ok
                               : (primal_ok && dual_ok && rel_gap <= config.gap_tol);
    if (converged) {
      sol.status = SdpSolution::Status::Optimal;
      sol.iterations = iter;
      sol.primal_residual = rel_p;
      sol.dual_residual = rel_d;
      sol.duality_gap = rel_gap;
      finalize_blocks(st);
      for (int j = 0; j < sp.num_free; ++j)
        sol.free_values(sp.kept_free[j]) = u(j) / sp.col_scale(j);
      for (int r = 0; r < sp.m; ++r)
        sol.dual_values(sp.kept_rows[r]) = sp.sign * y(r) / sp.row_scale(r);
      sol.objective = sp.sign * pobj + problem.objective_constant;
      return sol;
    }

    // improving-ray test for primal infeasibility
    double bty = sp.b.dot(y);
    if (bty > 1e-8 * (1 + normb)) {
      VectorXd yhat = y / bty;
      adjoint_into(yhat, AstarM, AstarD);
      double vmax = 0.0;   // largest eigenvalue of A*(yhat); must be <= 0
      double ynorm = yhat.cwiseAbs().maxCoeff();
      for (int b = 0; b < nb; ++b) {
        if (st[b].kind == SdpBlock::Kind::Psd) {
          if (st[b].dim > 0) {
            Eigen::SelfAdjointEigenSolver<MatrixXd> eig(AstarM[b], Eigen::EigenvaluesOnly);
            vmax = std::max(vmax, eig.eigenvalues().maxCoeff());
          }
        } else if (st[b].dim > 0) {
          vmax = std::max(vmax, AstarD[b].maxCoeff());
        }
      }
      double fres = sp.num_free > 0 ? (Fmat.transpose() * yhat).cwiseAbs().maxCoeff() : 0.0;
      double scale = std::max(1.0, ynorm * std::max(normA, 1.0));
      if (std::max(vmax, fres) <= config.ray_tol * scale &&
          (dobj > config.infeasibility_threshold * (1 + normb) || mu < 1e6 * config.gap_tol ||
           rel_gap > 0.9)) {
        sol.status = SdpSolution::Status::Infeasible;
        sol.iterations = iter;
        sol.infeasibility_ray = VectorXd::Zero(problem.num_constraints());
        for (int r = 0; r < sp.m; ++r)
          sol.infeasibility_ray(sp.kept_rows[r]) = yhat(r) / sp.row_scale(r);
        sol.message = "dual improving ray found (Farkas certificate)";
        finalize_blocks(st);
        return sol;
      }
    }
    if (std::abs(dobj) > config.infeasibility_threshold * (1 + normb) ||
        std::abs(pobj) > config.infeasibility_threshold * (1 + normC) * 1e3) {
      sol.status = SdpSolution::Status::NumericalFailure;
      sol.iterations = iter;
      sol.message = "iterates diverged without a clean infeasibility certificate";
      finalize_blocks(st);
      return sol;
    }

    // NT scaling
    bool scaling_ok = true;
    for (int b = 0; b < nb && scaling_ok; ++b) {
      if (st[b].kind == SdpBlock::Kind::Psd) {
        if (st[b].dim == 0) continue;
        Eigen::LLT<MatrixXd> lltX(st[b].X);
        if (lltX.info() != Eigen::Success) {
          scaling_ok = false;
          break;
        }
        MatrixXd Lx = lltX.matrixL();
        MatrixXd G = Lx.transpose() * st[b].Z * Lx;
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (G + G.transpose()));
        if (eig.eigenvalues().minCoeff() <= 0) {
          scaling_ok = false;
          break;
        }
        VectorXd d = eig.eigenvalues();
        MatrixXd U = eig.eigenvectors();
        MatrixXd Gmhalf = U * d.cwiseSqrt().cwiseInverse().asDiagonal() * U.transpose();
        MatrixXd Ginv = U * d.cwiseInverse().asDiagonal() * U.transpose();
        st[b].W = Lx * Gmhalf * Lx.transpose();
        st[b].Zinv = Lx * Ginv * Lx.transpose();
      } else {
        st[b].wd = (st[b].xd.array() / st[b].zd.array()).sqrt();
        st[b].zinvd = st[b].zd.cwiseInverse();
      }
    }
    if (!scaling_ok) {
      sol.status = SdpSolution::Status::NumericalFailure;
      sol.iterations = iter;
      sol.message = "NT scaling failed (iterate left the cone)";
      finalize_blocks(st);
      return sol;
    }

    // Schur complement M = A(W A*() W) over the KKT triplet values
    std::vector<double> kvals(ktrip.size(), 0.0);
    {
      size_t pos = 0;
      for (int b = 0; b < nb; ++b) {
        const int tn = static_cast<int>(touch[b].size());
        if (st[b].kind == SdpBlock::Kind::Psd) {
          for (int ia = 0; ia < tn; ++ia) {
            MatrixXd B = st[b].W * Ak[b][ia] * st[b].W;
            for (int ib = ia; ib < tn; ++ib) {
              kvals[pos++] = inner(sp.A[touch[b][ib]], b, B);
            }
          }
        } else {
          for (int ia = 0; ia < tn; ++ia) {
            VectorXd wa = st[b].wd.array().square() * Akd[b][ia].array();
            for (int ib = ia; ib < tn; ++ib) {
              kvals[pos++] = Akd[b][ib].dot(wa);
            }
          }
        }
      }
      // diagonal regularization entries
      for (int k = 0; k < sp.m; ++k) kvals[pos++] = 0.0;  // placeholder, set below
      for (int k = 0; k < sp.m; ++k)
        for (const auto& [j, v] : sp.F[k]) kvals[pos++] = v;
      for (int j = 0; j < sp.num_free; ++j) kvals[pos++] = 0.0;  // set below
      // regularization magnitudes from the assembled diagonal
    }

    // rebuild K with current values (same pattern as analyzed)
    {
      size_t pos = 0;
      for (auto& t : ktrip) {
        t = Triplet(t.row(), t.col(), kvals[pos++]);
      }
    }
    K.setFromTriplets(ktrip.begin(), ktrip.end());
    double maxdiag = 1.0;
    for (int k = 0; k < sp.m; ++k) maxdiag = std::max(maxdiag, K.coeff(k, k));
    const double reg_p = 1e-13 * maxdiag + 1e-14;
    const double reg_d = std::max(1e-12, 1e-13 * maxdiag);
    for (int k = 0; k < sp.m; ++k) K.coeffRef(k, k) += reg_p;
    for (int j = 0; j < sp.num_free; ++j) K.coeffRef(sp.m + j, sp.m + j) = -reg_d;

    ldlt.factorize(K);
    if (ldlt.info() != Eigen::Success) {
      sol.status = SdpSolution::Status::NumericalFailure;
      sol.iterations = iter;
      sol.message = "KKT factorization failed";
      finalize_blocks(st);
      return sol;
    }

    auto solve_kkt = [&](const VectorXd& rhs) {
      VectorXd x = ldlt.solve(rhs);
      // two rounds of iterative refinement against the unregularized system
      for (int round = 0; round < 2; ++round) {
        VectorXd resid = rhs - K.selfadjointView<Eigen::Upper>() * x;
        resid.head(sp.m) += reg_p * x.head(sp.m);
        resid.tail(sp.num_free) -= reg_d * x.tail(sp.num_free);
        x += ldlt.solve(resid);
      }
      return x;
    };

    // direction from the centering parameter and correction term
    std::vector<MatrixXd> dX(nb), dZ(nb), Rc(nb);
    std::vector<VectorXd> dxd(nb), dzd(nb), rcd(nb);

    auto compute_direction = [&](double sigma_mu, const std::vector<MatrixXd>* corrX,
                                 const std::vector<MatrixXd>* corrZ,
                                 const std::vector<VectorXd>* corrXd,
                                 const std::vector<VectorXd>* corrZd) {
      // R_c per block
      for (int b = 0; b < nb; ++b) {
        if (st[b].kind == SdpBlock::Kind::Psd) {
          Rc[b] = -st[b].X;
          if (sigma_mu > 0) Rc[b] += sigma_mu * st[b].Zinv;
          if (corrX) {
            MatrixXd T = (*corrX)[b] * (*corrZ)[b] * st[b].Zinv;
            Rc[b] -= 0.5 * (T + T.transpose());
          }
        } else {
          rcd[b] = -st[b].xd;
          if (sigma_mu > 0) rcd[b] += sigma_mu * st[b].zinvd;
          if (corrXd)
            rcd[b] -= ((*corrXd)[b].array() * (*corrZd)[b].array() * st[b].zinvd.array())
                          .matrix();
        }
      }
      // rhs1_k = rp_k - <A_k, Rc> + <A_k, W Rd W>
      VectorXd rhs(kdim);
      for (int k = 0; k < sp.m; ++k) rhs(k) = rp(k);
      for (int b = 0; b < nb; ++b) {
        if (st[b].kind == SdpBlock::Kind::Psd) {
          MatrixXd T = Rc[b] * -1.0 + st[b].W * Rd[b] * st[b].W;
          for (size_t t = 0; t < touch[b].size(); ++t)
            rhs(touch[b][t]) += inner(sp.A[touch[b][t]], b, T);
        } else {
          VectorXd T = -rcd[b] +
                       (st[b].wd.array().square() * Rdd[b].array()).matrix();
          for (size_t t = 0; t < touch[b].size(); ++t)
            rhs(touch[b][t]) += Akd[b][t].dot(T);
        }
      }
      for (int j = 0; j < sp.num_free; ++j) rhs(sp.m + j) = rf(j);

      VectorXd sol_kkt = solve_kkt(rhs);
      VectorXd dy = sol_kkt.head(sp.m);
      VectorXd du = sol_kkt.tail(sp.num_free);

      adjoint_into(dy, AstarM, AstarD);
      for (int b = 0; b < nb; ++b) {
        if (st[b].kind == SdpBlock::Kind::Psd) {
          dZ[b] = Rd[b] - AstarM[b];
          MatrixXd T = Rc[b] - st[b].W * dZ[b] * st[b].W;
          dX[b] = 0.5 * (T + T.transpose());
        } else {
          dzd[b] = Rdd[b] - AstarD[b];
          dxd[b] = rcd[b] -
                   (st[b].wd.array().square() * dzd[b].array()).matrix();
        }
      }
      return std::make_pair(dy, du);
    };

    // ---- predictor ----
    auto [dy_aff, du_aff] = compute_direction(0.0, nullptr, nullptr, nullptr, nullptr);
    const double tau = iter < 4 ? 0.95 : 0.98;
    double ap = 1.0, ad = 1.0;
    for (int b = 0; b < nb; ++b) {
      if (st[b].kind == SdpBlock::Kind::Psd) {
        if (st[b].dim == 0) continue;
        ap = std::min(ap, psd_step(st[b].X, dX[b], tau));
        ad = std::min(ad, psd_step(st[b].Z, dZ[b], tau));
      } else {
        ap = std::min(ap, diag_step(st[b].xd, dxd[b], tau));
        ad = std::min(ad, diag_step(st[b].zd, dzd[b], tau));
      }
    }
    // affine complementarity for the Mehrotra sigma
    double gap_aff = 0.0;
    for (int b = 0; b < nb; ++b) {
      if (st[b].kind == SdpBlock::Kind::Psd) {
        gap_aff += ((st[b].X + ap * dX[b]).array() * (st[b].Z + ad * dZ[b]).array()).sum();
      } else {
        gap_aff += (st[b].xd + ap * dxd[b]).dot(st[b].zd + ad * dzd[b]);
      }
    }
    gap_aff = std::max(gap_aff, 0.0);
    double sigma = std::pow(gap_aff / std::max(gap_inner, 1e-300), 3.0);
    sigma = std::min(std::max(sigma, 1e-8), 1.0);

    // ---- corrector ----
    std::vector<MatrixXd> dX_aff = dX, dZ_aff = dZ;
    std::vector<VectorXd> dxd_aff = dxd, dzd_aff = dzd;
    auto [dy, du] = compute_direction(sigma * mu, &dX_aff, &dZ_aff, &dxd_aff, &dzd_aff);

    double ap2 = 1.0, ad2 = 1.0;
    for (int b = 0; b < nb; ++b) {
      if (st[b].kind == SdpBlock::Kind::Psd) {
        if (st[b].dim == 0) continue;
        ap2 = std::min(ap2, psd_step(st[b].X, dX[b], tau));
        ad2 = std::min(ad2, psd_step(st[b].Z, dZ[b], tau));
      } else {
        ap2 = std::min(ap2, diag_step(st[b].xd, dxd[b], tau));
        ad2 = std::min(ad2, diag_step(st[b].zd, dzd[b], tau));
      }
    }

    // fall back to a pure centering step when the corrector collapses
    if (std::min(ap2, ad2) < 0.1 * std::min(ap, ad)) {
      std::tie(dy, du) = compute_direction(sigma * mu, nullptr, nullptr, nullptr, nullptr);
      ap2 = 1.0;
      ad2 = 1.0;
      for (int b = 0; b < nb; ++b) {
        if (st[b].kind == SdpBlock::Kind::Psd) {
          if (st[b].dim == 0) continue;
          ap2 = std::min(ap2, psd_step(st[b].X, dX[b], tau));
          ad2 = std::min(ad2, psd_step(st[b].Z, dZ[b], tau));
        } else {
          ap2 = std::min(ap2, diag_step(st[b].xd, dxd[b], tau));
          ad2 = std::min(ad2, diag_step(st[b].zd, dzd[b], tau));
        }
      }
    }

    for (int b = 0; b < nb; ++b) {
      if (st[b].kind == SdpBlock::Kind::Psd) {
        st[b].X += ap2 * dX[b];
        st[b].Z += ad2 * dZ[b];
      } else {
        st[b].xd += ap2 * dxd[b];
        st[b].zd += ad2 * dzd[b];
      }
    }
    y += ad2 * dy;
    u += ad2 * du;

    // stall detection: neither mu nor the primal residual is improving
    const bool progress = mu < 0.9999 * prev_mu || rel_p < 0.99 * prev_rel_p ||
                          std::min(ap2, ad2) > 1e-3;
    if (!progress) {
      if (++stall_count >= 15) {
        sol.status = SdpSolution::Status::NumericalFailure;
        sol.iterations = iter;
        sol.message = "no progress (step length, mu and primal residual stalled)";
        sol.primal_residual = rel_p;
        sol.dual_residual = rel_d;
        sol.duality_gap = rel_gap;
        finalize_blocks(st);
        return sol;
      }
    } else {
      stall_count = 0;
    }
    prev_mu = mu;
    prev_rel_p = rel_p;
  }

  sol.status = SdpSolution::Status::NumericalFailure;
  sol.iterations = config.max_iterations;
  sol.message = "iteration limit reached";
  finalize_blocks(st);
  return sol;
}

}  // namespace loopcert
