#include "loopcert/certify/certifiers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

namespace loopcert {

std::string to_string(CertificateKind kind) {
  switch (kind) {
    case CertificateKind::GlobalStability: return "global_stability";
    case CertificateKind::LocalStability: return "local_stability";
    case CertificateKind::PerfUpper: return "performance_upper";
    case CertificateKind::PerfLower: return "performance_lower";
    case CertificateKind::L2Gain: return "l2_gain";
    case CertificateKind::Iss: return "iss";
  }
  return "unknown";
}

namespace {

std::string primed(const std::string& n) { return n + "'"; }

std::vector<std::string> default_state_blocks(const SpacePtr& space) {
  std::vector<std::string> out;
  if (space->has_block(kStateBlock)) out.push_back(kStateBlock);
  if (space->has_block(kCompBlock)) out.push_back(kCompBlock);
  return out;
}

// Maps requested block names onto a set's space for a given time step:
// names with a primed twin are replaced by it on step 1.
std::vector<std::string> resolve_blocks(const std::vector<std::string>& wanted,
                                        const ClosedLoopSet& cls, int step) {
  std::vector<std::string> src = wanted;
  if (src.empty()) src = default_state_blocks(cls.space());
  std::vector<std::string> out;
  for (const auto& name : src) {
    std::string resolved = name;
    if (step == 1) {
      auto it = cls.prime_map.find(name);
      if (it != cls.prime_map.end()) resolved = it->second;
    }
    if (cls.space()->has_block(resolved)) out.push_back(resolved);
  }
  return out;
}

std::vector<Monomial> mono_basis(const SpacePtr& space,
                                 const std::vector<std::string>& blocks, int degree) {
  BasisSpec spec;
  spec.blocks = blocks;
  spec.max_degree = degree;
  return candidate_basis(spec, space);
}

// Free-multiplier blocks for an equality row.
std::vector<std::string> equality_blocks(const ClosedLoopSet& cls, size_t row,
                                         const CertifyOptions& o) {
  RowTag tag = cls.set.equality_tags[row];
  if (tag == RowTag::DynamicsX || tag == RowTag::DynamicsZ) {
    std::vector<std::string> all;
    for (const auto& b : cls.space()->blocks()) all.push_back(b.name);
    return all;
  }
  int step = cls.set.equality_step[row];
  std::vector<std::string> names = default_state_blocks(cls.space());
  for (const auto& cb : cls.controller_blocks) names.push_back(cb);
  for (const auto& extra : o.poly_extra_blocks) names.push_back(extra);
  return resolve_blocks(names, cls, step);
}

void attach_multipliers(SosConstraint& c, const ClosedLoopSet& cls,
                        const CertifyOptions& o, bool with_multipliers = true) {
  const int sos_basis_deg = std::max(0, o.sos_degree / 2);
  c.ineq_multipliers.clear();
  c.eq_multipliers.clear();
  for (size_t r = 0; r < c.set.inequalities.size(); ++r) {
    if (!with_multipliers) {
      c.ineq_multipliers.push_back(MultiplierSpec{});
      continue;
    }
    int step = r < cls.set.inequality_step.size() ? cls.set.inequality_step[r] : 0;
    auto blocks = resolve_blocks(o.sos_blocks, cls, step);
    c.ineq_multipliers.push_back(
        MultiplierSpec{mono_basis(c.set.space, blocks, sos_basis_deg)});
  }
  for (size_t r = 0; r < c.set.equalities.size(); ++r) {
    if (!with_multipliers) {
      c.eq_multipliers.push_back(MultiplierSpec{});
      continue;
    }
    c.eq_multipliers.push_back(MultiplierSpec{
        mono_basis(c.set.space, equality_blocks(cls, r, o), o.poly_degree)});
  }
}

// sigma_0 basis: explicit candidates at half the sigma_0 degree over the
// union of both steps' multiplier blocks plus noise blocks, optionally
// Newton-polytope-filtered against the identity's support union.
std::vector<Monomial> sigma0_basis(const SosConstraint& c, const ClosedLoopSet& cls,
                                   const CertifyOptions& o) {
  const int s0_deg = o.sigma0_degree >= 0 ? o.sigma0_degree : o.sos_degree;
  const int basis_deg = std::max(0, (s0_deg + 1) / 2);

  std::set<std::string> blocks;
  for (const auto& n : resolve_blocks(o.sos_blocks, cls, 0)) blocks.insert(n);
  for (const auto& n : resolve_blocks(o.sos_blocks, cls, 1)) blocks.insert(n);
  for (const char* n : {kProcessNoiseBlock, kMeasNoiseBlock}) {
    if (cls.space()->has_block(n)) blocks.insert(n);
    if (cls.space()->has_block(primed(n))) blocks.insert(primed(n));
  }

  BasisSpec spec;
  spec.blocks.assign(blocks.begin(), blocks.end());
  spec.max_degree = basis_deg;
  if (!o.sigma0_newton) return candidate_basis(spec, c.set.space);

  // support union of the matched identity
  std::map<Monomial, char, GradedLexLess> support;
  for (const auto& [m, e] : c.target.terms()) support.emplace(m, 1);
  for (size_t r = 0; r < c.ineq_multipliers.size(); ++r) {
    const auto& basis = c.ineq_multipliers[r].basis;
    for (size_t i = 0; i < basis.size(); ++i) {
      for (size_t j = i; j < basis.size(); ++j) {
        Monomial prod = basis[i].times(basis[j]);
        for (const auto& [mg, cg] : c.set.inequalities[r].terms())
          support.emplace(prod.times(mg), 1);
      }
    }
  }
  for (size_t r = 0; r < c.eq_multipliers.size(); ++r) {
    for (const auto& bm : c.eq_multipliers[r].basis) {
      for (const auto& [mh, ch] : c.set.equalities[r].terms())
        support.emplace(bm.times(mh), 1);
    }
  }
  std::vector<Monomial> ctx;
  ctx.reserve(support.size());
  for (const auto& [m, one] : support) ctx.push_back(m);

  spec.reduction = BasisSpec::Reduction::NewtonPolytope;
  return candidate_basis(spec, c.set.space, ctx);
}

void finalize_constraint(SosConstraint& c, const ClosedLoopSet& cls,
                         const CertifyOptions& o, bool with_multipliers = true) {
  attach_multipliers(c, cls, o, with_multipliers);
  c.sigma0.basis = sigma0_basis(c, cls, o);
}

// Embeds a PolyExpr into another space by block name.
PolyExpr embed(const PolyExpr& e, const SpacePtr& target) {
  Substitution pass(target);
  return e.compose(pass);
}

// The certified function one step ahead, via the set's successor structure.
PolyExpr next_step(const PolyExpr& V, const ClosedLoopSet& cls) {
  if (!cls.two_step)
    throw StructuralError("successor substitution needs a two-step set");
  Substitution sub(cls.space());
  const auto& space = *V.space();
  if (cls.substituted) {
    if (space.has_block(kStateBlock)) sub.map_block(space, kStateBlock, cls.x_next);
    if (space.has_block(kCompBlock) && !cls.z_next.empty())
      sub.map_block(space, kCompBlock, cls.z_next);
  }
  for (const auto& [from, to] : cls.prime_map) {
    if (space.has_block(from)) sub.rename_block(space, from, to);
  }
  return V.compose(sub);
}

// l(x, kappa(theta)) over the set's space.
Polynomial stage_cost_on(const ClosedLoopSet& cls, const Polynomial& l) {
  Substitution sub(cls.space());
  if (l.space()->has_block(kInputBlock)) {
    if (cls.kappa.empty())
      throw StructuralError("stage cost references u but the model has no controller");
    sub.map_block(*l.space(), kInputBlock, cls.kappa);
  }
  return l.compose(sub);
}

LinExpr weighted_objective(const SosProgram& prog, const std::string& poly_name,
                           const WeightMeasure& weight) {
  LinExpr obj;
  for (const auto& info : prog.polys) {
    if (info.name != poly_name) continue;
    for (size_t k = 0; k < info.basis.size(); ++k) {
      for (const auto& f : info.basis[k].factors()) {
        VarRef v = VarRef::from_key(f.var);
        if (!weight.covers(info.space->block(v.block).name))
          throw UnsupportedMeasureError(
              "objective weight does not cover block '" +
              info.space->block(v.block).name + "'");
      }
      double m = weight.monomial_moment(*info.space, info.basis[k]);
      if (m != 0.0) obj += LinExpr::var(info.ids[k], m);
    }
    return obj;
  }
  throw StructuralError("unknown decision polynomial '" + poly_name + "'");
}

PolyExpr scaled_poly(const LinExpr& s, const Polynomial& p) {
  PolyExpr out(p.space());
  for (const auto& [m, c] : p.terms()) out.add_term(m, s * c);
  return out;
}

struct RunContext {
  const ClosedLoopModel* model = nullptr;
  std::vector<const ClosedLoopSet*> sets;  // one per constraint, may be null
};

Certificate run_program(SosProgram& prog, CertificateKind kind, const RunContext& ctx,
                        const CertifyOptions& o) {
  Certificate cert;
  cert.kind = kind;

  AssembledProgram ap = assemble_program(prog);
  auto t0 = std::chrono::steady_clock::now();
  SdpSolution sol = solve_sdp(ap.sdp, o.solver);
  auto t1 = std::chrono::steady_clock::now();

  cert.solver.iterations = sol.iterations;
  cert.solver.duality_gap = sol.duality_gap;
  cert.solver.primal_residual = sol.primal_residual;
  cert.solver.solve_seconds = std::chrono::duration<double>(t1 - t0).count();
  cert.solver.sdp_constraints = ap.sdp.num_constraints();
  cert.solver.sdp_blocks = static_cast<int>(ap.sdp.blocks.size());

  switch (sol.status) {
    case SdpSolution::Status::Infeasible:
      cert.solver.status = "infeasible";
      cert.message = "no certificate at these degrees (SDP infeasible)";
      return cert;
    case SdpSolution::Status::NumericalFailure:
      cert.solver.status = "numerical_failure";
      cert.message = "SDP solve failed: " + sol.message;
      return cert;
    case SdpSolution::Status::Optimal:
      cert.solver.status = "optimal";
      break;
  }

  cert.recovered = recover_certificate(prog, ap, sol);

  std::function<std::vector<Point>(int, int)> sampler;
  std::optional<Simulator> sim;
  if (ctx.model && o.check_samples > 0) {
    sim.emplace(*ctx.model, o.assembly.kkt, o.seed);
    sampler = [&](int ci, int count) -> std::vector<Point> {
      if (ci >= static_cast<int>(ctx.sets.size()) || !ctx.sets[ci]) return {};
      return sim->sample_set_points(*ctx.sets[ci], count);
    };
  }
  CheckOptions check_opts = o.check;
  check_opts.samples = o.check_samples;
  cert.diagnostics = check_certificate(prog, cert.recovered, check_opts, sampler);

  if (!cert.diagnostics.passed()) {
    cert.solver.status = "check_failed";
    cert.message = "solver reported optimal but the certificate failed its checks";
    return cert;
  }
  cert.feasible = true;
  return cert;
}

CertifyOptions force_state_v(CertifyOptions o) {
  o.v_blocks = {kStateBlock, kCompBlock};
  return o;
}

}  // namespace

BuiltProgram build_stability_program(const ClosedLoopModel& model,
                                     const CertifyOptions& options) {
  const bool local = !model.state_set.empty();
  BuiltProgram out;
  // kept alive by the SosConstraints (sets are copied in)
  ClosedLoopSet loop = assemble_closed_loop_set(
      model, local ? SetMode::KBar : SetMode::K, options.assembly);
  ClosedLoopSet hat = assemble_closed_loop_set(
      model, local ? SetMode::KHat : SetMode::KHatC, options.assembly);

  auto v_blocks = options.v_blocks.empty()
                      ? default_state_blocks(loop.space())
                      : options.v_blocks;
  std::vector<Monomial> v_basis =
      mono_basis(loop.space(), v_blocks, options.v_degree);
  PolyExpr V = out.program.new_poly("V", loop.space(), v_basis);

  {
    SosConstraint dec;
    dec.label = "decrease";
    dec.set = loop.set;
    dec.target = V - next_step(V, loop);
    dec.target -= PolyExpr::from(squared_norm(loop.space(), kStateBlock));
    finalize_constraint(dec, loop, options);
    out.program.add_constraint(std::move(dec));
  }
  {
    SosConstraint pos;
    pos.label = "positivity";
    pos.set = hat.set;
    pos.target = embed(V, hat.space());
    pos.target -= PolyExpr::from(squared_norm(hat.space(), kStateBlock));
    finalize_constraint(pos, hat, options);
    out.program.add_constraint(std::move(pos));
  }
  out.assembled = assemble_program(out.program);
  return out;
}

Certificate verify_global_stability(const ClosedLoopModel& model,
                                    const CertifyOptions& options) {
  ClosedLoopSet loop = assemble_closed_loop_set(model, SetMode::K, options.assembly);
  ClosedLoopSet hat = assemble_closed_loop_set(model, SetMode::KHatC, options.assembly);

  SosProgram prog;
  auto v_blocks =
      options.v_blocks.empty() ? default_state_blocks(loop.space()) : options.v_blocks;
  PolyExpr V =
      prog.new_poly("V", loop.space(), mono_basis(loop.space(), v_blocks, options.v_degree));

  SosConstraint dec;
  dec.label = "decrease";
  dec.set = loop.set;
  dec.target = V - next_step(V, loop);
  dec.target -= PolyExpr::from(squared_norm(loop.space(), kStateBlock));
  finalize_constraint(dec, loop, options);
  prog.add_constraint(std::move(dec));

  SosConstraint pos;
  pos.label = "positivity";
  pos.set = hat.set;
  pos.target = embed(V, hat.space()) - PolyExpr::from(squared_norm(hat.space(), kStateBlock));
  finalize_constraint(pos, hat, options);
  prog.add_constraint(std::move(pos));

  RunContext ctx;
  ctx.model = &model;
  ctx.sets = {&loop, &hat};
  Certificate cert = run_program(prog, CertificateKind::GlobalStability, ctx, options);
  if (cert.feasible) cert.V = cert.recovered.polys.at("V");
  return cert;
}

LevelSetResult max_level_set(const Polynomial& V, const PolyVec& psis, double tolerance,
                             const CertifyOptions& options) {
  LevelSetResult out;
  if (psis.empty()) {
    out.message = "no state-set rows";
    return out;
  }
  const SpacePtr& space = psis.front().space();
  Substitution into(space);
  Polynomial Vx = V.compose(into);

  int psi_deg = 0;
  for (const auto& p : psis) psi_deg = std::max(psi_deg, p.total_degree());
  const int v_deg = std::max(1, Vx.total_degree());
  const int b1 = std::max(0, (psi_deg - v_deg + 1) / 2);
  const int b0 = (std::max(psi_deg, 2 * b1 + v_deg) + 1) / 2;

  BasisSpec all;
  all.max_degree = b1;
  std::vector<Monomial> sigma1_basis = candidate_basis(all, space);
  all.max_degree = b0;
  std::vector<Monomial> sigma0_b = candidate_basis(all, space);

  // the accept hook re-checks the recovered multipliers of the last build
  auto built = std::make_shared<std::pair<SosProgram, AssembledProgram>>();
  auto family = [&, built](double gamma) {
    SosProgram prog;
    for (size_t i = 0; i < psis.size(); ++i) {
      SosConstraint c;
      c.label = "level[" + std::to_string(i + 1) + "]";
      c.set.space = space;
      c.set.add_inequality(Polynomial::constant(space, gamma) - Vx, RowTag::Other);
      c.target = PolyExpr::from(psis[i]);
      c.sigma0.basis = sigma0_b;
      c.ineq_multipliers = {MultiplierSpec{sigma1_basis}};
      prog.add_constraint(std::move(c));
    }
    built->first = std::move(prog);
    built->second = assemble_program(built->first);
    return built->second.sdp;
  };

  BisectionSpec spec;
  spec.family = family;
  spec.tolerance = tolerance;
  if (options.level_bracket_hint > 0) spec.upper = options.level_bracket_hint;
  spec.solver = options.solver;
  spec.accept = [built, &options](double, const SdpSolution& sol) {
    if (!sol.optimal()) return false;
    RecoveredCertificate rec = recover_certificate(built->first, built->second, sol);
    CheckOptions co = options.check;
    co.samples = 0;
    return check_certificate(built->first, rec, co, {}).passed();
  };

  BisectionResult res = bisect_feasibility(spec);
  out.ok = res.ok;
  out.gamma = res.gamma;
  out.message = res.message;
  return out;
}

Certificate verify_local_stability(const ClosedLoopModel& model,
                                   const CertifyOptions& options_in) {
  if (model.state_set.empty())
    throw StructuralError("local stability needs a state set X");
  CertifyOptions options = force_state_v(options_in);

  ClosedLoopSet loop = assemble_closed_loop_set(model, SetMode::KBar, options.assembly);
  ClosedLoopSet hat = assemble_closed_loop_set(model, SetMode::KHat, options.assembly);

  SosProgram prog;
  PolyExpr V = prog.new_poly(
      "V", loop.space(),
      mono_basis(loop.space(), default_state_blocks(loop.space()), options.v_degree));

  SosConstraint dec;
  dec.label = "decrease";
  dec.set = loop.set;
  dec.target = V - next_step(V, loop) -
               PolyExpr::from(squared_norm(loop.space(), kStateBlock));
  finalize_constraint(dec, loop, options);
  prog.add_constraint(std::move(dec));

  SosConstraint pos;
  pos.label = "positivity";
  pos.set = hat.set;
  pos.target = embed(V, hat.space()) - PolyExpr::from(squared_norm(hat.space(), kStateBlock));
  finalize_constraint(pos, hat, options);
  prog.add_constraint(std::move(pos));

  RunContext ctx;
  ctx.model = &model;
  ctx.sets = {&loop, &hat};
  Certificate cert = run_program(prog, CertificateKind::LocalStability, ctx, options);
  if (!cert.feasible) return cert;
  cert.V = cert.recovered.polys.at("V");

  LevelSetResult level =
      max_level_set(cert.V, model.state_set, options.level_tolerance, options);
  if (!level.ok) {
    cert.feasible = false;
    cert.message = "level-set bisection failed: " + level.message;
    return cert;
  }
  cert.level_gamma = level.gamma;
  return cert;
}

namespace {

struct PerfPieces {
  SosProgram prog;
  ClosedLoopSet loop, hat_c;
  std::optional<ClosedLoopSet> hat;
  Polynomial l_on_loop;
};

}  // namespace

BuiltProgram build_performance_program(const ClosedLoopModel& model, const CostSpec& cost,
                                       BoundDirection direction,
                                       const CertifyOptions& options_in) {
  CostSpec c = cost;
  c.validate();
  if (!c.exit_penalty)
    throw StructuralError("performance bound needs the exit penalty L (see with_exit_penalty)");
  if (model.state_set.empty())
    throw StructuralError("performance analysis needs a state set X");
  CertifyOptions options = options_in;
  const bool upper = direction == BoundDirection::Upper;
  const double L = *c.exit_penalty;
  const double alpha = c.discount;

  BuiltProgram out;
  ClosedLoopSet loop = assemble_closed_loop_set(model, SetMode::KBar, options.assembly);
  ClosedLoopSet hat_c = assemble_closed_loop_set(model, SetMode::KHatC, options.assembly);

  SosProgram& prog = out.program;
  std::vector<std::string> v_blocks;
  if (options.single_function) {
    v_blocks = default_state_blocks(loop.space());
  } else {
    v_blocks = options.v_blocks.empty() ? default_state_blocks(loop.space())
                                        : options.v_blocks;
    for (const auto& cb : loop.controller_blocks) v_blocks.push_back(cb);
  }
  PolyExpr V =
      prog.new_poly("V", loop.space(), mono_basis(loop.space(), v_blocks, options.v_degree));

  // discounted decrease on K-bar
  {
    SosConstraint dec;
    dec.label = "discounted_decrease";
    dec.set = loop.set;
    PolyExpr expr = V - next_step(V, loop) * alpha;
    expr -= PolyExpr::from(stage_cost_on(loop, c.stage_cost));
    dec.target = upper ? expr : expr * -1.0;
    finalize_constraint(dec, loop, options);
    prog.add_constraint(std::move(dec));
  }

  // exit level on the complement, one identity per psi row
  {
    PolyExpr V_c = embed(V, hat_c.space());
    std::vector<Monomial> sigma_b = mono_basis(
        hat_c.space(), resolve_blocks(options.sos_blocks, hat_c, 0), options.sos_degree / 2);
    std::vector<std::string> free_blocks = default_state_blocks(hat_c.space());
    for (const auto& cb : hat_c.controller_blocks) free_blocks.push_back(cb);
    std::vector<Monomial> free_b =
        mono_basis(hat_c.space(), free_blocks, options.poly_degree);

    auto complement = compile_complement_condition(V_c, L, hat_c.psi, hat_c.set, {},
                                                   sigma_b, free_b, !upper);
    for (auto& cc : complement) {
      // sigma_0 via the shared policy (the appended -psi row is state-only)
      cc.sigma0.basis = sigma0_basis(cc, hat_c, options);
      prog.add_constraint(std::move(cc));
    }
  }

  std::optional<ClosedLoopSet> hat;
  if (!options.single_function) {
    hat = assemble_closed_loop_set(model, SetMode::KHat, options.assembly);
    PolyExpr Vb = prog.new_poly(
        "V_bound", hat->space(),
        mono_basis(hat->space(), default_state_blocks(hat->space()), options.v_degree));
    SosConstraint proj;
    proj.label = "projection";
    proj.set = hat->set;
    PolyExpr expr = Vb - embed(V, hat->space());
    proj.target = upper ? expr : expr * -1.0;
    finalize_constraint(proj, *hat, options);
    prog.add_constraint(std::move(proj));
    prog.objective = weighted_objective(prog, "V_bound", c.weight);
  } else {
    prog.objective = weighted_objective(prog, "V", c.weight);
  }
  prog.maximize = !upper;

  out.assembled = assemble_program(prog);
  return out;
}

Certificate bound_performance(const ClosedLoopModel& model, const CostSpec& cost,
                              BoundDirection direction, const CertifyOptions& options) {
  CostSpec c = with_exit_penalty(model, cost, options.seed);
  BuiltProgram built = build_performance_program(model, c, direction, options);

  // rebuild the context sets (build_* copies them into the constraints)
  ClosedLoopSet loop = assemble_closed_loop_set(model, SetMode::KBar, options.assembly);
  ClosedLoopSet hat_c = assemble_closed_loop_set(model, SetMode::KHatC, options.assembly);
  RunContext ctx;
  ctx.model = &model;
  ctx.sets.assign(built.program.constraints.size(), nullptr);
  ctx.sets[0] = &loop;
  // complement identities certify on psi_i <= 0 which random simulation does
  // not reach; identity + Gram checks still apply there.

  const bool upper = direction == BoundDirection::Upper;
  Certificate cert = run_program(
      built.program, upper ? CertificateKind::PerfUpper : CertificateKind::PerfLower, ctx,
      options);
  cert.discount = c.discount;
  cert.exit_penalty = *c.exit_penalty;
  cert.exit_penalty_sampled = c.exit_penalty_sampled;
  cert.stage_cost = c.stage_cost;
  if (!cert.feasible) return cert;
  cert.V = cert.recovered.polys.at("V");
  cert.bound = options.single_function ? cert.V : cert.recovered.polys.at("V_bound");
  return cert;
}

BuiltProgram build_stochastic_program(const ClosedLoopModel& model, const CostSpec& cost,
                                      const MomentTable& moments, BoundDirection direction,
                                      const CertifyOptions& options) {
  CostSpec c = cost;
  c.validate();
  if (!c.exit_penalty) throw StructuralError("performance bound needs the exit penalty L");
  if (model.state_set.empty())
    throw StructuralError("performance analysis needs a state set X");
  if (!model.has_noise())
    throw StructuralError("stochastic analysis needs noise-extended dynamics");
  const bool upper = direction == BoundDirection::Upper;
  const double alpha = c.discount;

  BuiltProgram out;
  ClosedLoopSet hat = assemble_closed_loop_set(model, SetMode::KHat, options.assembly);
  SosProgram& prog = out.program;

  PolyExpr V = prog.new_poly(
      "V", hat.space(),
      mono_basis(hat.space(), default_state_blocks(hat.space()), options.v_degree));

  // extended space with symbolic noise for the expectation
  std::vector<std::pair<std::string, int>> ext_blocks;
  for (const auto& b : hat.space()->blocks()) ext_blocks.emplace_back(b.name, b.dimension);
  ext_blocks.emplace_back(kProcessNoiseBlock, model.nw);
  ext_blocks.emplace_back(kMeasNoiseBlock, model.nv);
  SpacePtr ext = make_space(ext_blocks);

  auto block_vars = [&](const SpacePtr& sp, const char* name) {
    PolyVec outv;
    if (!sp->has_block(name)) return outv;
    int b = sp->block_index(name);
    for (int i = 0; i < sp->block(b).dimension; ++i)
      outv.push_back(Polynomial::variable(sp, VarRef{b, i}));
    return outv;
  };

  Substitution pass_ext(ext);
  PolyVec kappa_ext = compose_all(hat.kappa, pass_ext);

  // x+ = f_x(x, kappa, w), z+ = f_z(z, f_y(x, v), kappa), noise symbolic
  PolyVec x_vars = block_vars(ext, kStateBlock);
  PolyVec z_vars = block_vars(ext, kCompBlock);
  PolyVec y_noisy;
  {
    Substitution sub(ext);
    const auto& fy_space = *model.f_y.front().space();
    if (fy_space.has_block(kStateBlock)) sub.map_block(fy_space, kStateBlock, x_vars);
    y_noisy = compose_all(model.f_y, sub);
  }
  PolyVec x_next;
  {
    Substitution sub(ext);
    const auto& fx_space = *model.f_x.front().space();
    sub.map_block(fx_space, kStateBlock, x_vars);
    if (fx_space.has_block(kInputBlock)) sub.map_block(fx_space, kInputBlock, kappa_ext);
    x_next = compose_all(model.f_x, sub);
  }
  PolyVec z_next;
  if (model.nz > 0) {
    Substitution sub(ext);
    const auto& fz_space = *model.f_z.front().space();
    sub.map_block(fz_space, kCompBlock, z_vars);
    if (fz_space.has_block(kOutputBlock)) sub.map_block(fz_space, kOutputBlock, y_noisy);
    if (fz_space.has_block(kInputBlock)) sub.map_block(fz_space, kInputBlock, kappa_ext);
    z_next = compose_all(model.f_z, sub);
  }

  Substitution vsub(ext);
  vsub.map_block(*hat.space(), kStateBlock, x_next);
  if (model.nz > 0) vsub.map_block(*hat.space(), kCompBlock, z_next);
  PolyExpr V_next = V.compose(vsub);
  PolyExpr EV = embed(apply_expectation(V_next, moments), hat.space());

  {
    SosConstraint dec;
    dec.label = "discounted_decrease";
    dec.set = hat.set;
    PolyExpr expr = V - EV * alpha;
    expr -= PolyExpr::from(stage_cost_on(hat, c.stage_cost));
    dec.target = upper ? expr : expr * -1.0;
    finalize_constraint(dec, hat, options);
    prog.add_constraint(std::move(dec));
  }

  // complement in (x, z) only: no controller rows
  {
    SemialgebraicSet empty_base;
    empty_base.space = hat.space();
    std::vector<Monomial> sigma_b = mono_basis(
        hat.space(), resolve_blocks(options.sos_blocks, hat, 0), options.sos_degree / 2);
    auto complement = compile_complement_condition(V, *c.exit_penalty, hat.psi, empty_base,
                                                   {}, sigma_b, {}, !upper);
    for (auto& cc : complement) {
      cc.sigma0.basis = sigma0_basis(cc, hat, options);
      prog.add_constraint(std::move(cc));
    }
  }

  prog.objective = weighted_objective(prog, "V", c.weight);
  prog.maximize = !upper;
  out.assembled = assemble_program(prog);
  return out;
}

Certificate bound_performance_stochastic(const ClosedLoopModel& model, const CostSpec& cost,
                                         const MomentTable& moments,
                                         BoundDirection direction,
                                         const CertifyOptions& options) {
  CostSpec c = with_exit_penalty(model, cost, options.seed);
  BuiltProgram built = build_stochastic_program(model, c, moments, direction, options);

  ClosedLoopSet hat = assemble_closed_loop_set(model, SetMode::KHat, options.assembly);
  RunContext ctx;
  ctx.model = &model;
  ctx.sets.assign(built.program.constraints.size(), nullptr);
  ctx.sets[0] = &hat;

  const bool upper = direction == BoundDirection::Upper;
  Certificate cert = run_program(
      built.program, upper ? CertificateKind::PerfUpper : CertificateKind::PerfLower, ctx,
      options);
  cert.discount = c.discount;
  cert.exit_penalty = *c.exit_penalty;
  cert.exit_penalty_sampled = c.exit_penalty_sampled;
  cert.stage_cost = c.stage_cost;
  if (!cert.feasible) return cert;
  cert.V = cert.recovered.polys.at("V");
  cert.bound = cert.V;
  return cert;
}

BuiltProgram build_l2_program(const ClosedLoopModel& model, const CertifyOptions& options) {
  if (!model.has_noise())
    throw StructuralError("L2-gain analysis needs noise-extended dynamics");

  BuiltProgram out;
  ClosedLoopSet kw = assemble_closed_loop_set(model, SetMode::KW, options.assembly);
  ClosedLoopSet khw = assemble_closed_loop_set(model, SetMode::KHatW, options.assembly);
  SosProgram& prog = out.program;

  std::vector<std::string> v_blocks =
      options.v_blocks.empty() ? default_state_blocks(kw.space()) : options.v_blocks;
  BasisSpec vspec;
  vspec.blocks = v_blocks;
  vspec.max_degree = options.v_degree;
  vspec.require_blocks = default_state_blocks(kw.space());  // zero at the origin
  PolyExpr V = prog.new_poly("V", kw.space(), candidate_basis(vspec, kw.space()));

  LinExpr alpha_w, alpha_v;
  if (model.nw > 0) alpha_w = prog.new_scalar("alpha_w", /*nonneg=*/true);
  if (model.nv > 0) alpha_v = prog.new_scalar("alpha_v", /*nonneg=*/true);

  {
    SosConstraint dec;
    dec.label = "gain_decrease";
    dec.set = kw.set;
    PolyExpr expr = V - next_step(V, kw);
    // - |yhat|^2 + alpha_w |w|^2 + alpha_v |v|^2 (yhat defaults to x)
    Polynomial yhat_sq(kw.space());
    if (!kw.y_hat.empty()) {
      for (const auto& row : kw.y_hat) yhat_sq += row * row;
    } else {
      yhat_sq = squared_norm(kw.space(), kStateBlock);
    }
    expr -= PolyExpr::from(yhat_sq);
    if (model.nw > 0)
      expr += scaled_poly(alpha_w, squared_norm(kw.space(), kProcessNoiseBlock));
    if (model.nv > 0)
      expr += scaled_poly(alpha_v, squared_norm(kw.space(), kMeasNoiseBlock));
    dec.target = expr;
    finalize_constraint(dec, kw, options);
    prog.add_constraint(std::move(dec));
  }
  {
    SosConstraint pos;
    pos.label = options.iss ? "iss_positivity" : "positivity";
    pos.set = khw.set;
    pos.target = embed(V, khw.space());
    if (options.iss)
      pos.target -= PolyExpr::from(squared_norm(khw.space(), kStateBlock));
    finalize_constraint(pos, khw, options, options.nonneg_multipliers);
    prog.add_constraint(std::move(pos));
  }

  prog.objective = alpha_w + alpha_v * options.tradeoff_gamma;
  prog.maximize = false;
  out.assembled = assemble_program(prog);
  return out;
}

Certificate bound_l2_gain(const ClosedLoopModel& model, const CertifyOptions& options) {
  BuiltProgram built = build_l2_program(model, options);

  ClosedLoopSet kw = assemble_closed_loop_set(model, SetMode::KW, options.assembly);
  ClosedLoopSet khw = assemble_closed_loop_set(model, SetMode::KHatW, options.assembly);
  RunContext ctx;
  ctx.model = &model;
  ctx.sets = {&kw, &khw};

  Certificate cert =
      run_program(built.program, options.iss ? CertificateKind::Iss : CertificateKind::L2Gain,
                  ctx, options);
  if (!cert.feasible) return cert;
  cert.V = cert.recovered.polys.at("V");
  cert.alpha_w = model.nw > 0 ? cert.recovered.scalars.at("alpha_w") : 0.0;
  cert.alpha_v = model.nv > 0 ? cert.recovered.scalars.at("alpha_v") : 0.0;
  return cert;
}

CostSpec with_exit_penalty(const ClosedLoopModel& model, CostSpec cost, uint64_t seed) {
  cost.validate();
  if (cost.exit_penalty) return cost;
  Simulator sim(model, {}, seed);
  double sup = sim.sample_stage_cost_sup(cost.stage_cost);
  cost.exit_penalty = 1.1 * std::max(sup, 1e-6) / (1.0 - cost.discount);
  cost.exit_penalty_sampled = true;
  return cost;
}

}  // namespace loopcert
