#include "loopcert/kkt/builder.hpp"

#include <cmath>

namespace loopcert {

namespace {

// Dimension of a named block in a polynomial family's space, or 0.
int block_dim_of(const PolyVec& polys, const std::string& name) {
  for (const auto& p : polys) {
    if (p.space() && p.space()->has_block(name))
      return p.space()->block(p.space()->block_index(name)).dimension;
  }
  return 0;
}

int block_dim_of(const Polynomial& p, const std::string& name) {
  if (p.space() && p.space()->has_block(name))
    return p.space()->block(p.space()->block_index(name)).dimension;
  return 0;
}

Polynomial normalized(Polynomial p, bool enable) {
  if (!enable) return p;
  double m = p.max_abs_coeff();
  if (m > 0.0 && m != 1.0) return p * (1.0 / m);
  return p;
}

void finish_rows(SemialgebraicSet& set, bool normalize) {
  if (!normalize) return;
  for (auto& h : set.equalities) h = normalized(std::move(h), true);
  for (auto& g : set.inequalities) g = normalized(std::move(g), true);
}

// Aggregated (or split) complementarity rows for multipliers `lambda` paired
// with constraint values `values`, both over the set's space.
void add_complementarity(SemialgebraicSet& set, const PolyVec& lambda,
                         const PolyVec& values, bool split) {
  if (lambda.empty()) return;
  if (split) {
    for (size_t j = 0; j < lambda.size(); ++j)
      set.add_equality(lambda[j] * values[j], RowTag::KktEq);
  } else {
    Polynomial sum(set.space);
    for (size_t j = 0; j < lambda.size(); ++j) sum += lambda[j] * values[j];
    set.add_equality(std::move(sum), RowTag::KktEq);
  }
}

}  // namespace

int ControllerSpec::n_u() const {
  if (!kappa.empty()) return static_cast<int>(kappa.size());
  if (const auto* p = std::get_if<ProjectionController>(&variant))
    return block_dim_of(p->g_U, kThetaBlock);
  if (const auto* g = std::get_if<GeneralNlpController>(&variant))
    return block_dim_of(g->J, kThetaBlock);
  if (const auto* m = std::get_if<MpcController>(&variant)) return m->nu;
  const auto& pg = std::get<ProjectedGradientChainController>(variant);
  return block_dim_of(pg.problem.J, kThetaBlock);
}

ControllerKkt build_projection_kkt(const PolyVec& g_U, const KktOptions& opts) {
  if (g_U.empty()) throw StructuralError("projection controller needs at least one g_U row");
  const int n_u = block_dim_of(g_U, kThetaBlock);
  if (n_u == 0) throw StructuralError("g_U must be polynomials over block 'theta'");
  for (const auto& row : g_U) {
    if (row.space()->has_block(kParamBlock))
      throw StructuralError("g_U must depend on theta only");
  }
  const int n_g = static_cast<int>(g_U.size());

  auto space = make_space({{kParamBlock, n_u}, {kThetaBlock, n_u}, {kLambdaBlock, n_g}});
  Substitution into(space);
  into.rename_block(*g_U.front().space(), kThetaBlock, kThetaBlock);
  PolyVec g = compose_all(g_U, into);

  PolyMat grad = jacobian_transpose(g, kThetaBlock);  // [i][j] = d g_j / d theta_i

  PolyVec lambda, theta, s;
  for (int j = 0; j < n_g; ++j)
    lambda.push_back(Polynomial::variable(space, kLambdaBlock, j));
  for (int i = 0; i < n_u; ++i) {
    theta.push_back(Polynomial::variable(space, kThetaBlock, i));
    s.push_back(Polynomial::variable(space, kParamBlock, i));
  }

  ControllerKkt out;
  out.set.space = space;
  out.internal_blocks = {kThetaBlock, kLambdaBlock};
  out.theta_block = kThetaBlock;

  for (int i = 0; i < n_u; ++i) {
    Polynomial row = theta[i] - s[i];
    for (int j = 0; j < n_g; ++j) row -= grad[i][j] * lambda[j];
    out.set.add_equality(std::move(row), RowTag::KktEq);
  }
  add_complementarity(out.set, lambda, g, opts.split_complementarity);
  for (int j = 0; j < n_g; ++j) out.set.add_inequality(lambda[j], RowTag::KktIneq);
  for (int j = 0; j < n_g; ++j) out.set.add_inequality(g[j], RowTag::KktIneq);

  finish_rows(out.set, opts.normalize_rows);
  out.kappa = theta;  // identity
  return out;
}

ControllerKkt build_general_kkt(const Polynomial& J, const PolyVec& a, const PolyVec& b,
                                const KktOptions& opts) {
  const int n_theta = block_dim_of(J, kThetaBlock);
  if (n_theta == 0) throw StructuralError("J must be a polynomial over block 'theta'");
  int n_s = block_dim_of(J, kParamBlock);
  if (n_s == 0) n_s = std::max(block_dim_of(a, kParamBlock), block_dim_of(b, kParamBlock));
  const int n_a = static_cast<int>(a.size());
  const int n_b = static_cast<int>(b.size());

  auto space = make_space({{kParamBlock, n_s},
                           {kThetaBlock, n_theta},
                           {kLambdaABlock, n_a},
                           {kLambdaBBlock, n_b}});
  Substitution into(space);
  into.rename_block(*J.space(), kThetaBlock, kThetaBlock);

  Polynomial Jc = J.compose(into);
  PolyVec ac, bc;
  for (const auto& row : a) ac.push_back(row.compose(into));
  for (const auto& row : b) bc.push_back(row.compose(into));

  PolyVec lam_a, lam_b;
  for (int j = 0; j < n_a; ++j)
    lam_a.push_back(Polynomial::variable(space, kLambdaABlock, j));
  for (int j = 0; j < n_b; ++j)
    lam_b.push_back(Polynomial::variable(space, kLambdaBBlock, j));

  PolyMat grad_a = jacobian_transpose(ac, kThetaBlock);
  PolyMat grad_b = jacobian_transpose(bc, kThetaBlock);

  ControllerKkt out;
  out.set.space = space;
  out.internal_blocks = {kThetaBlock};
  if (n_a > 0) out.internal_blocks.push_back(kLambdaABlock);
  if (n_b > 0) out.internal_blocks.push_back(kLambdaBBlock);
  out.theta_block = kThetaBlock;

  const int tb = space->block_index(kThetaBlock);
  for (int i = 0; i < n_theta; ++i) {
    Polynomial row = Jc.differentiate(VarRef{tb, i});
    for (int j = 0; j < n_a; ++j) row -= grad_a[i][j] * lam_a[j];
    for (int j = 0; j < n_b; ++j) row += grad_b[i][j] * lam_b[j];
    out.set.add_equality(std::move(row), RowTag::KktEq);
  }
  add_complementarity(out.set, lam_a, ac, opts.split_complementarity);
  for (auto& row : bc) out.set.add_equality(row, RowTag::KktEq);
  for (int j = 0; j < n_a; ++j) out.set.add_inequality(lam_a[j], RowTag::KktIneq);
  for (const auto& row : ac) out.set.add_inequality(row, RowTag::KktIneq);

  finish_rows(out.set, opts.normalize_rows);
  for (int i = 0; i < n_theta; ++i)
    out.kappa.push_back(Polynomial::variable(space, kThetaBlock, i));
  return out;
}

GeneralNlpController flatten_mpc(const MpcController& mpc) {
  const int N = mpc.horizon;
  if (N < 1) throw StructuralError("MPC horizon must be >= 1");
  if (static_cast<int>(mpc.model.size()) != mpc.nx)
    throw StructuralError("MPC model must have nx rows");
  if (mpc.stage_costs.empty())
    throw StructuralError("MPC needs at least one stage cost");
  if (mpc.stage_costs.size() != 1 && static_cast<int>(mpc.stage_costs.size()) != N)
    throw StructuralError("MPC stage costs: give one polynomial or exactly N");

  int n_s = std::max({block_dim_of(mpc.stage_costs, kParamBlock),
                      block_dim_of(mpc.terminal_cost, kParamBlock),
                      block_dim_of(mpc.ineq, kParamBlock),
                      block_dim_of(mpc.eq, kParamBlock)});
  if (n_s == 0) n_s = mpc.nx;  // common case: s is the state estimate

  const int n_uhat = N * mpc.nu;
  const int n_xhat = (N + 1) * mpc.nx;
  const int n_theta = n_uhat + n_xhat + mpc.n_eps;

  auto theta_space = make_space({{kParamBlock, n_s}, {kThetaBlock, n_theta}});

  // theta layout per the flattening convention: [u_hat; x_hat; eps]
  auto u_var = [&](int stage, int j) {
    return Polynomial::variable(theta_space, kThetaBlock, stage * mpc.nu + j);
  };
  auto x_var = [&](int stage, int j) {
    return Polynomial::variable(theta_space, kThetaBlock, n_uhat + stage * mpc.nx + j);
  };
  auto eps_var = [&](int j) {
    return Polynomial::variable(theta_space, kThetaBlock, n_uhat + n_xhat + j);
  };

  auto stage_subst = [&](const VariableSpace& src, int stage) {
    Substitution sub(theta_space);
    if (src.has_block("xh")) {
      PolyVec imgs;
      for (int j = 0; j < mpc.nx; ++j) imgs.push_back(x_var(stage, j));
      sub.map_block(src, "xh", imgs);
    }
    if (src.has_block("uh")) {
      PolyVec imgs;
      for (int j = 0; j < mpc.nu; ++j) imgs.push_back(u_var(stage, j));
      sub.map_block(src, "uh", imgs);
    }
    return sub;
  };

  // Substitution for trajectory-wide constraint data over stacked blocks.
  auto stacked_subst = [&](const VariableSpace& src) {
    Substitution sub(theta_space);
    if (src.has_block("u_hat")) {
      PolyVec imgs;
      for (int i = 0; i < n_uhat; ++i)
        imgs.push_back(Polynomial::variable(theta_space, kThetaBlock, i));
      sub.map_block(src, "u_hat", imgs);
    }
    if (src.has_block("x_hat")) {
      PolyVec imgs;
      for (int i = 0; i < n_xhat; ++i)
        imgs.push_back(Polynomial::variable(theta_space, kThetaBlock, n_uhat + i));
      sub.map_block(src, "x_hat", imgs);
    }
    if (src.has_block("eps")) {
      PolyVec imgs;
      for (int i = 0; i < mpc.n_eps; ++i) imgs.push_back(eps_var(i));
      sub.map_block(src, "eps", imgs);
    }
    return sub;
  };

  GeneralNlpController out;
  out.J = Polynomial(theta_space);
  for (int i = 0; i < N; ++i) {
    const Polynomial& li =
        mpc.stage_costs.size() == 1 ? mpc.stage_costs.front() : mpc.stage_costs[i];
    out.J += li.compose(stage_subst(*li.space(), i));
  }
  if (!mpc.terminal_cost.is_zero())
    out.J += mpc.terminal_cost.compose(stage_subst(*mpc.terminal_cost.space(), N));
  if (!mpc.slack_cost.is_zero())
    out.J += mpc.slack_cost.compose(stacked_subst(*mpc.slack_cost.space()));

  for (const auto& row : mpc.ineq) out.a.push_back(row.compose(stacked_subst(*row.space())));
  for (const auto& row : mpc.eq) out.b.push_back(row.compose(stacked_subst(*row.space())));

  // dynamics rows x_hat_{i+1} - f_hat(x_hat_i, u_hat_i)
  for (int i = 0; i < N; ++i) {
    Substitution sub = stage_subst(*mpc.model.front().space(), i);
    for (int j = 0; j < mpc.nx; ++j) {
      out.b.push_back(x_var(i + 1, j) - mpc.model[j].compose(sub));
    }
  }
  return out;
}

ControllerKkt build_mpc_kkt(const MpcController& mpc, const KktOptions& opts) {
  GeneralNlpController flat = flatten_mpc(mpc);
  ControllerKkt out = build_general_kkt(flat.J, flat.a, flat.b, opts);
  // kappa = first input stage
  out.kappa.clear();
  for (int j = 0; j < mpc.nu; ++j)
    out.kappa.push_back(Polynomial::variable(out.set.space, kThetaBlock, j));
  return out;
}

ControllerKkt build_projected_gradient_chain(const ProjectedGradientChainController& pg,
                                             const KktOptions& opts) {
  if (pg.iterations < 1) throw StructuralError("projected gradient chain needs M >= 1");
  if (pg.step <= 0) throw StructuralError("projected gradient step must be positive");
  const int M = pg.iterations;
  const Polynomial& J = pg.problem.J;
  const int n_theta = block_dim_of(J, kThetaBlock);
  if (n_theta == 0) throw StructuralError("J must be a polynomial over block 'theta'");
  int n_s = std::max({block_dim_of(J, kParamBlock),
                      block_dim_of(pg.problem.a, kParamBlock),
                      block_dim_of(pg.problem.b, kParamBlock)});
  if (n_s == 0) n_s = n_theta;
  const int n_a = static_cast<int>(pg.problem.a.size());
  const int n_b = static_cast<int>(pg.problem.b.size());

  std::vector<std::pair<std::string, int>> blocks{{kParamBlock, n_s}};
  for (int k = 1; k <= M; ++k) blocks.emplace_back("theta_" + std::to_string(k), n_theta);
  for (int k = 1; k <= M; ++k) {
    blocks.emplace_back("lambda_a_" + std::to_string(k), n_a);
    blocks.emplace_back("lambda_b_" + std::to_string(k), n_b);
  }
  auto space = make_space(blocks);

  ControllerKkt out;
  out.set.space = space;
  for (const auto& [name, dim] : blocks) {
    if (dim > 0 && name != kParamBlock) out.internal_blocks.push_back(name);
  }
  out.theta_block = "theta_" + std::to_string(M);

  // theta_0 is the fixed warm start, a polynomial of s (zero by default)
  PolyVec theta_prev;
  if (pg.initial_iterate.empty()) {
    for (int i = 0; i < n_theta; ++i) theta_prev.push_back(Polynomial(space));
  } else {
    if (static_cast<int>(pg.initial_iterate.size()) != n_theta)
      throw StructuralError("warm start must have theta dimension");
    Substitution sub(space);
    for (const auto& p : pg.initial_iterate) theta_prev.push_back(p.compose(sub));
  }

  auto at_step = [&](const Polynomial& p, const std::string& theta_block) {
    Substitution sub(space);
    if (p.space()->has_block(kThetaBlock)) {
      PolyVec imgs;
      int tb = space->block_index(theta_block);
      for (int i = 0; i < n_theta; ++i)
        imgs.push_back(Polynomial::variable(space, VarRef{tb, i}));
      sub.map_block(*p.space(), kThetaBlock, imgs);
    }
    return p.compose(sub);
  };
  auto subst_theta = [&](const Polynomial& p, const PolyVec& images) {
    Substitution sub(space);
    if (p.space()->has_block(kThetaBlock)) sub.map_block(*p.space(), kThetaBlock, images);
    return p.compose(sub);
  };

  // gradient of J in the source space, composed per step
  const int tb_src = J.space()->block_index(kThetaBlock);
  PolyVec grad_J_src;
  for (int i = 0; i < n_theta; ++i)
    grad_J_src.push_back(J.differentiate(VarRef{tb_src, i}));

  for (int k = 1; k <= M; ++k) {
    const std::string tk = "theta_" + std::to_string(k);
    PolyVec theta_k;
    {
      int tb = space->block_index(tk);
      for (int i = 0; i < n_theta; ++i)
        theta_k.push_back(Polynomial::variable(space, VarRef{tb, i}));
    }
    PolyVec lam_a, lam_b;
    for (int j = 0; j < n_a; ++j)
      lam_a.push_back(Polynomial::variable(space, "lambda_a_" + std::to_string(k), j));
    for (int j = 0; j < n_b; ++j)
      lam_b.push_back(Polynomial::variable(space, "lambda_b_" + std::to_string(k), j));

    PolyVec a_k, b_k;
    for (const auto& row : pg.problem.a) a_k.push_back(at_step(row, tk));
    for (const auto& row : pg.problem.b) b_k.push_back(at_step(row, tk));
    PolyMat grad_a = jacobian_transpose(a_k, tk);
    PolyMat grad_b = jacobian_transpose(b_k, tk);

    // stationarity of the per-step projection, coupling theta_{k-1}, theta_k
    for (int i = 0; i < n_theta; ++i) {
      Polynomial row = theta_k[i] - theta_prev[i] +
                       pg.step * subst_theta(grad_J_src[i], theta_prev);
      for (int j = 0; j < n_a; ++j) row -= grad_a[i][j] * lam_a[j];
      for (int j = 0; j < n_b; ++j) row += grad_b[i][j] * lam_b[j];
      out.set.add_equality(std::move(row), RowTag::KktEq);
    }
    for (auto& row : b_k) out.set.add_equality(row, RowTag::KktEq);
    add_complementarity(out.set, lam_a, a_k, opts.split_complementarity);
    for (int j = 0; j < n_a; ++j) out.set.add_inequality(lam_a[j], RowTag::KktIneq);
    for (const auto& row : a_k) out.set.add_inequality(row, RowTag::KktIneq);

    theta_prev = theta_k;
  }

  finish_rows(out.set, opts.normalize_rows);
  out.kappa = theta_prev;  // identity on the last iterate
  return out;
}

ControllerKkt augment_inexactness(const ControllerKkt& kkt, double delta_bound) {
  if (!(delta_bound > 0)) throw StructuralError("inexactness bound must be positive");
  const int n_u = static_cast<int>(kkt.kappa.size());

  std::vector<std::pair<std::string, int>> blocks;
  for (const auto& b : kkt.set.space->blocks()) blocks.emplace_back(b.name, b.dimension);
  blocks.emplace_back(kDeltaBlock, n_u);
  auto space = make_space(blocks);
  Substitution embed(space);

  ControllerKkt out;
  out.set.space = space;
  out.internal_blocks = kkt.internal_blocks;
  out.internal_blocks.push_back(kDeltaBlock);
  out.theta_block = kkt.theta_block;

  for (size_t i = 0; i < kkt.set.equalities.size(); ++i)
    out.set.add_equality(kkt.set.equalities[i].compose(embed), kkt.set.equality_tags[i]);
  for (size_t i = 0; i < kkt.set.inequalities.size(); ++i)
    out.set.add_inequality(kkt.set.inequalities[i].compose(embed),
                           kkt.set.inequality_tags[i]);

  for (int i = 0; i < n_u; ++i) {
    Polynomial di = Polynomial::variable(space, kDeltaBlock, i);
    out.set.add_inequality(Polynomial::constant(space, delta_bound * delta_bound) - di * di,
                           RowTag::Inexactness);
  }
  for (int i = 0; i < n_u; ++i) {
    Polynomial di = Polynomial::variable(space, kDeltaBlock, i);
    out.kappa.push_back(kkt.kappa[i].compose(embed) *
                        (Polynomial::constant(space, 1.0) + di));
  }
  return out;
}

ControllerKkt build_controller_kkt(const ControllerSpec& spec, const KktOptions& opts) {
  ControllerKkt kkt;
  if (const auto* p = std::get_if<ProjectionController>(&spec.variant)) {
    kkt = build_projection_kkt(p->g_U, opts);
  } else if (const auto* g = std::get_if<GeneralNlpController>(&spec.variant)) {
    kkt = build_general_kkt(g->J, g->a, g->b, opts);
  } else if (const auto* m = std::get_if<MpcController>(&spec.variant)) {
    kkt = build_mpc_kkt(*m, opts);
  } else {
    kkt = build_projected_gradient_chain(
        std::get<ProjectedGradientChainController>(spec.variant), opts);
  }

  if (!spec.kappa.empty()) {
    // user-supplied kappa over block "theta": acts on the designated block
    Substitution sub(kkt.set.space);
    const auto& src = *spec.kappa.front().space();
    if (src.has_block(kThetaBlock)) {
      int tb = kkt.set.space->block_index(kkt.theta_block);
      PolyVec imgs;
      for (int i = 0; i < kkt.set.space->block(tb).dimension; ++i)
        imgs.push_back(Polynomial::variable(kkt.set.space, VarRef{tb, i}));
      sub.map_block(src, kThetaBlock, imgs);
    }
    kkt.kappa = compose_all(spec.kappa, sub);
  }
  if (spec.inexactness) {
    kkt = augment_inexactness(kkt, *spec.inexactness);
  }
  return kkt;
}

}  // namespace loopcert
