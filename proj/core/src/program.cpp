#include "loopcert/sos/program.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace loopcert {

int SdpProblem::add_constraint(double b) {
  constraint_matrix.emplace_back();
  constraint_free.emplace_back();
  rhs.push_back(b);
  return static_cast<int>(rhs.size()) - 1;
}

int SdpProblem::add_block(SdpBlock::Kind kind, int dim) {
  blocks.push_back(SdpBlock{kind, dim});
  return static_cast<int>(blocks.size()) - 1;
}

void SdpProblem::add_entry(int constraint, int block, int i, int j, double value) {
  if (i > j) std::swap(i, j);
  constraint_matrix[constraint].push_back(SdpCoeff{block, i, j, value});
}

void SdpProblem::add_free_entry(int constraint, int index, double value) {
  constraint_free[constraint].emplace_back(index, value);
}

void SdpProblem::add_objective_entry(int block, int i, int j, double value) {
  if (i > j) std::swap(i, j);
  objective_matrix.push_back(SdpCoeff{block, i, j, value});
}

void SdpProblem::add_objective_free(int index, double value) {
  objective_free.emplace_back(index, value);
}

double SdpSolution::constraint_value(const SdpProblem& problem, int k) const {
  double v = 0.0;
  for (const auto& e : problem.constraint_matrix[k]) {
    v += e.value * block_values[e.block](e.i, e.j);
  }
  for (const auto& [idx, c] : problem.constraint_free[k]) v += c * free_values(idx);
  return v;
}

PolyExpr SosProgram::new_poly(const std::string& name, SpacePtr space,
                              const std::vector<Monomial>& basis) {
  PolyInfo info;
  info.name = name;
  info.space = space;
  info.basis = basis;
  PolyExpr expr = PolyExpr::decision(space, basis, vars, name, &info.ids);
  polys.push_back(std::move(info));
  return expr;
}

LinExpr SosProgram::new_scalar(const std::string& name, bool nonneg) {
  int id = vars.add(name);
  scalar_ids[name] = id;
  if (nonneg) nonneg_scalars.push_back(id);
  return LinExpr::var(id);
}

namespace {

// Tolerance for deciding that a constant identity coefficient is genuinely
// nonzero (degree deficiency) rather than composition dust.
constexpr double kResidualConstTol = 1e-8;

struct MultiplierBuild {
  PolyExpr expr;            // the multiplier as an affine polynomial
  bool is_sos = false;
  int gram_block = -1;
  std::vector<int> ids;     // free multiplier coefficient ids (non-SOS)
  std::vector<Monomial> basis;
};

}  // namespace

AssembledProgram assemble_program(const SosProgram& prog) {
  AssembledProgram out;
  DecisionVars vars = prog.vars;  // extended with multiplier coefficients below

  // -------- pass 1: create multiplier structures and PSD blocks -----------
  struct ConstraintBuild {
    std::optional<MultiplierBuild> sigma0;
    std::vector<std::optional<MultiplierBuild>> sigma;  // per inequality
    std::vector<std::optional<MultiplierBuild>> frees;  // per equality
  };
  std::vector<ConstraintBuild> builds(prog.constraints.size());

  // Gram entry ids, registered per block in row-major upper-triangle order.
  std::vector<std::tuple<int, int, int>> gram_entry_of;  // id -> (block,i,j); parallel map
  std::map<int, VarLocation> gram_locations;

  auto make_sos_multiplier = [&](const SosConstraint& c, int ci, int row,
                                 const std::vector<Monomial>& basis,
                                 const std::string& label) {
    MultiplierBuild mb;
    mb.is_sos = true;
    mb.basis = basis;
    const int d = static_cast<int>(basis.size());
    mb.gram_block = out.sdp.add_block(SdpBlock::Kind::Psd, d);
    out.grams.push_back(GramInfo{mb.gram_block, ci, row, basis, label});
    mb.expr = PolyExpr(c.set.space);
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        int id = vars.add(label + ".Q[" + std::to_string(i) + "," + std::to_string(j) + "]");
        gram_locations[id] =
            VarLocation{VarLocation::Kind::Gram, mb.gram_block, i, j, -1};
        double weight = (i == j) ? 1.0 : 2.0;
        mb.expr.add_term(basis[i].times(basis[j]), LinExpr::var(id, weight));
      }
    }
    return mb;
  };
  auto make_free_multiplier = [&](const SosConstraint& c, int ci, int row,
                                  const std::vector<Monomial>& basis,
                                  const std::string& label) {
    MultiplierBuild mb;
    mb.is_sos = false;
    mb.basis = basis;
    mb.expr = PolyExpr::decision(c.set.space, basis, vars, label, &mb.ids);
    out.free_mults.push_back(FreeMultInfo{ci, row, basis, mb.ids, label});
    return mb;
  };

  for (size_t ci = 0; ci < prog.constraints.size(); ++ci) {
    const SosConstraint& c = prog.constraints[ci];
    if (c.ineq_multipliers.size() != c.set.inequalities.size())
      throw StructuralError(c.label + ": one multiplier spec per inequality required");
    if (c.eq_multipliers.size() != c.set.equalities.size())
      throw StructuralError(c.label + ": one multiplier spec per equality required");
    ConstraintBuild& b = builds[ci];
    if (!c.sigma0.empty())
      b.sigma0 = make_sos_multiplier(c, static_cast<int>(ci), -1, c.sigma0.basis,
                                     c.label + ".sigma0");
    b.sigma.resize(c.set.inequalities.size());
    for (size_t r = 0; r < c.set.inequalities.size(); ++r) {
      if (c.ineq_multipliers[r].empty()) continue;
      b.sigma[r] = make_sos_multiplier(c, static_cast<int>(ci), static_cast<int>(r),
                                       c.ineq_multipliers[r].basis,
                                       c.label + ".sigma[" + std::to_string(r + 1) + "]");
    }
    b.frees.resize(c.set.equalities.size());
    for (size_t r = 0; r < c.set.equalities.size(); ++r) {
      if (c.eq_multipliers[r].empty()) continue;
      b.frees[r] = make_free_multiplier(c, static_cast<int>(ci), static_cast<int>(r),
                                        c.eq_multipliers[r].basis,
                                        c.label + ".p[" + std::to_string(r + 1) + "]");
    }
  }

  // -------- variable locations --------------------------------------------
  out.num_vars = vars.count();
  out.locations.assign(vars.count(), VarLocation{});
  std::vector<bool> is_diag(vars.count(), false);
  for (int id : prog.nonneg_scalars) is_diag[id] = true;

  int diag_dim = static_cast<int>(prog.nonneg_scalars.size());
  if (diag_dim > 0) out.diag_block = out.sdp.add_block(SdpBlock::Kind::Diag, diag_dim);

  int free_count = 0;
  int diag_count = 0;
  for (int id = 0; id < vars.count(); ++id) {
    auto git = gram_locations.find(id);
    if (git != gram_locations.end()) {
      out.locations[id] = git->second;
    } else if (is_diag[id]) {
      out.locations[id] =
          VarLocation{VarLocation::Kind::Diag, out.diag_block, 0, 0, diag_count++};
    } else {
      out.locations[id] = VarLocation{VarLocation::Kind::Free, -1, 0, 0, free_count++};
    }
  }
  out.sdp.num_free = free_count;

  // -------- pass 2: scalar equations per constraint ------------------------
  auto emit = [&](int eq, int id, double coeff) {
    const VarLocation& loc = out.locations[id];
    switch (loc.kind) {
      case VarLocation::Kind::Gram:
        // <A, X> sums value * X_ij once per (i <= j); the LinExpr coefficient
        // already carries the symmetry factor.
        out.sdp.add_entry(eq, loc.block, loc.i, loc.j, coeff);
        break;
      case VarLocation::Kind::Diag:
        out.sdp.add_entry(eq, loc.block, loc.index, loc.index, coeff);
        break;
      case VarLocation::Kind::Free:
        out.sdp.add_free_entry(eq, loc.index, coeff);
        break;
    }
  };

  for (size_t ci = 0; ci < prog.constraints.size(); ++ci) {
    const SosConstraint& c = prog.constraints[ci];
    ConstraintBuild& b = builds[ci];

    PolyExpr residual = c.target;
    if (b.sigma0) residual -= b.sigma0->expr;
    for (size_t r = 0; r < b.sigma.size(); ++r) {
      if (b.sigma[r]) residual -= b.sigma[r]->expr.times(c.set.inequalities[r]);
    }
    for (size_t r = 0; r < b.frees.size(); ++r) {
      if (b.frees[r]) residual -= b.frees[r]->expr.times(c.set.equalities[r]);
    }

    AssembledProgram::EqRange range;
    range.first = out.sdp.num_constraints();
    std::vector<std::string> uncoverable;
    for (const auto& [m, e] : residual.terms()) {
      LinExpr lin = e;
      lin.prune();
      if (lin.coeffs.empty()) {
        if (std::abs(lin.constant) > kResidualConstTol)
          uncoverable.push_back(m.str(*c.set.space));
        continue;  // trivially satisfied (or reported above)
      }
      int eq = out.sdp.add_constraint(-lin.constant);
      for (const auto& [id, coeff] : lin.coeffs) emit(eq, id, coeff);
    }
    if (!uncoverable.empty()) {
      std::string msg = c.label + ": identity cannot be matched at these degrees; " +
                        std::to_string(uncoverable.size()) + " uncoverable monomial(s), e.g. " +
                        uncoverable.front();
      throw DegreeDeficiencyError(msg, uncoverable);
    }
    range.count = out.sdp.num_constraints() - range.first;
    out.constraint_equations.push_back(range);
  }

  // -------- objective -------------------------------------------------------
  LinExpr obj = prog.objective;
  obj.prune();
  out.sdp.objective_constant = obj.constant;
  for (const auto& [id, coeff] : obj.coeffs) {
    const VarLocation& loc = out.locations[id];
    switch (loc.kind) {
      case VarLocation::Kind::Gram:
        out.sdp.add_objective_entry(loc.block, loc.i, loc.j, coeff);
        break;
      case VarLocation::Kind::Diag:
        out.sdp.add_objective_entry(loc.block, loc.index, loc.index, coeff);
        break;
      case VarLocation::Kind::Free:
        out.sdp.add_objective_free(loc.index, coeff);
        break;
    }
  }
  out.sdp.maximize = prog.maximize;
  return out;
}

namespace {

double location_value(const VarLocation& loc, const SdpSolution& sol) {
  switch (loc.kind) {
    case VarLocation::Kind::Gram: {
      const Eigen::MatrixXd& X = sol.block_values[loc.block];
      return X(loc.i, loc.j);
    }
    case VarLocation::Kind::Diag:
      return sol.block_values[loc.block](loc.index, 0);
    case VarLocation::Kind::Free:
      return sol.free_values(loc.index);
  }
  return 0.0;
}

}  // namespace

RecoveredCertificate recover_certificate(const SosProgram& prog,
                                         const AssembledProgram& assembled,
                                         const SdpSolution& solution) {
  if (!solution.optimal())
    throw SolverError("recover_certificate: solution status is not optimal");

  RecoveredCertificate out;
  out.decision_values.resize(assembled.num_vars);
  for (int id = 0; id < assembled.num_vars; ++id)
    out.decision_values(id) = location_value(assembled.locations[id], solution);
  out.objective = solution.objective;

  for (const auto& info : prog.polys) {
    Polynomial p(info.space);
    for (size_t k = 0; k < info.basis.size(); ++k) {
      double c = out.decision_values(info.ids[k]);
      if (std::abs(c) > kCoeffTol) p += Polynomial::term(info.space, info.basis[k], c);
    }
    out.polys[info.name] = std::move(p);
  }
  for (const auto& [name, id] : prog.scalar_ids)
    out.scalars[name] = out.decision_values(id);

  // SOS multipliers: expand beta' Q beta and keep the Gram factor
  for (const auto& gi : assembled.grams) {
    RecoveredMultiplier rm;
    rm.label = gi.label;
    rm.constraint_index = gi.constraint_index;
    rm.row_index = gi.row_index;
    rm.is_sos = true;
    rm.basis = gi.basis;
    const Eigen::MatrixXd& Q = solution.block_values[gi.block];
    rm.gram = Q;
    const SpacePtr& space = prog.constraints[gi.constraint_index].set.space;
    Polynomial value(space);
    const int d = static_cast<int>(gi.basis.size());
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        double c = (i == j ? 1.0 : 2.0) * Q(i, j);
        if (std::abs(c) > kCoeffTol)
          value += Polynomial::term(space, gi.basis[i].times(gi.basis[j]), c);
      }
    }
    rm.value = value;
    if (d > 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Q);
      rm.gram_min_eig = eig.eigenvalues().minCoeff();
    }
    // reconstruction residual: re-expand and compare coefficientwise
    Polynomial recheck(space);
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        double c = (i == j ? 1.0 : 2.0) * Q(i, j);
        recheck += Polynomial::term(space, gi.basis[i].times(gi.basis[j]), c);
      }
    }
    rm.reconstruction_residual = (recheck - value).max_abs_coeff();
    out.multipliers.push_back(std::move(rm));
  }

  for (const auto& fi : assembled.free_mults) {
    RecoveredMultiplier rm;
    rm.label = fi.label;
    rm.constraint_index = fi.constraint_index;
    rm.row_index = fi.row_index;
    rm.is_sos = false;
    rm.basis = fi.basis;
    const SpacePtr& space = prog.constraints[fi.constraint_index].set.space;
    Polynomial value(space);
    for (size_t k = 0; k < fi.basis.size(); ++k) {
      double c = out.decision_values(fi.ids[k]);
      if (std::abs(c) > kCoeffTol) value += Polynomial::term(space, fi.basis[k], c);
    }
    rm.value = std::move(value);
    out.multipliers.push_back(std::move(rm));
  }
  return out;
}

CheckReport check_certificate(
    const SosProgram& prog, const RecoveredCertificate& recovered,
    const CheckOptions& options,
    const std::function<std::vector<Point>(int constraint_index, int count)>& sampler) {
  CheckReport report;
  report.min_gram_eig = std::numeric_limits<double>::infinity();
  report.min_sampled_target = std::numeric_limits<double>::infinity();

  // group multipliers per constraint
  std::vector<std::vector<const RecoveredMultiplier*>> per_constraint(prog.constraints.size());
  for (const auto& rm : recovered.multipliers) {
    per_constraint[rm.constraint_index].push_back(&rm);
    if (rm.is_sos) report.min_gram_eig = std::min(report.min_gram_eig, rm.gram_min_eig);
  }
  if (recovered.multipliers.empty()) report.min_gram_eig = 0.0;

  for (size_t ci = 0; ci < prog.constraints.size(); ++ci) {
    const SosConstraint& c = prog.constraints[ci];
    Polynomial target = c.target.instantiate(recovered.decision_values);
    Polynomial residual = target;
    for (const auto* rm : per_constraint[ci]) {
      if (rm->row_index < 0) {
        residual -= rm->value;  // sigma_0
      } else if (rm->is_sos) {
        residual -= rm->value * c.set.inequalities[rm->row_index];
      } else {
        residual -= rm->value * c.set.equalities[rm->row_index];
      }
    }
    double r = residual.max_abs_coeff();
    report.max_identity_residual = std::max(report.max_identity_residual, r);
    if (r > options.tol_identity) {
      report.identity_ok = false;
      report.notes.push_back(c.label + ": identity residual " + std::to_string(r));
    }

    if (sampler && options.samples > 0) {
      for (const Point& pt : sampler(static_cast<int>(ci), options.samples)) {
        double val = target.evaluate(pt);
        report.min_sampled_target = std::min(report.min_sampled_target, val);
        ++report.samples_checked;
        if (val < -options.tol_sample) {
          report.sampling_ok = false;
          report.notes.push_back(c.label + ": sampled target value " + std::to_string(val));
        }
      }
    }
  }
  if (report.min_gram_eig < -options.tol_psd) {
    report.psd_ok = false;
    report.notes.push_back("minimum Gram eigenvalue " + std::to_string(report.min_gram_eig));
  }
  if (report.samples_checked == 0) report.min_sampled_target = 0.0;
  return report;
}

}  // namespace loopcert
