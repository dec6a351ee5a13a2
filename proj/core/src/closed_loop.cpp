#include "loopcert/kkt/closed_loop.hpp"

#include <algorithm>

namespace loopcert {

namespace {

std::string primed(const std::string& name) { return name + "'"; }

int space_block_dim(const PolyVec& polys, const char* name) {
  for (const auto& p : polys) {
    if (p.space() && p.space()->has_block(name))
      return p.space()->block(p.space()->block_index(name)).dimension;
  }
  return 0;
}

void require_rows(const PolyVec& v, int n, const char* what) {
  if (static_cast<int>(v.size()) != n)
    throw StructuralError(std::string(what) + ": expected " + std::to_string(n) +
                          " rows, got " + std::to_string(v.size()));
}

// Builds a substitution sending the canonical-name blocks of a source space
// to expression vectors / renamed blocks in the assembly space.
class NameMap {
 public:
  explicit NameMap(SpacePtr target) : target_(target), sub_(std::move(target)) {}

  NameMap& expr(const VariableSpace& src, const char* block, const PolyVec& images) {
    if (src.has_block(block)) sub_.map_block(src, block, images);
    return *this;
  }
  NameMap& zero(const VariableSpace& src, const char* block, int dim) {
    if (src.has_block(block)) {
      PolyVec zeros(dim, Polynomial(target_));
      sub_.map_block(src, block, zeros);
    }
    return *this;
  }
  NameMap& rename(const VariableSpace& src, const char* block, const std::string& to) {
    if (src.has_block(block)) sub_.rename_block(src, block, to);
    return *this;
  }
  const Substitution& get() const { return sub_; }

 private:
  SpacePtr target_;
  Substitution sub_;
};

PolyVec block_vars(const SpacePtr& space, const std::string& block) {
  PolyVec out;
  int b = space->block_index(block);
  for (int i = 0; i < space->block(b).dimension; ++i)
    out.push_back(Polynomial::variable(space, VarRef{b, i}));
  return out;
}

}  // namespace

void ClosedLoopModel::validate() const {
  if (nx < 1) throw StructuralError("model needs at least one state (nx >= 1)");
  require_rows(f_x, nx, "f_x");
  require_rows(f_y, ny, "f_y");
  require_rows(f_z, nz, "f_z");
  if (nu != controller.n_u())
    throw StructuralError("controller input dimension (" +
                          std::to_string(controller.n_u()) +
                          ") does not match nu (" + std::to_string(nu) + ")");
  if (nu > 0 && f_s.empty())
    throw StructuralError("a controlled model needs f_s (the controller parameter map)");
  if (space_block_dim(f_x, kInputBlock) > nu)
    throw StructuralError("f_x references more inputs than nu");
  if (space_block_dim(f_x, kProcessNoiseBlock) > nw)
    throw StructuralError("f_x references undeclared process noise");
  if (space_block_dim(f_y, kMeasNoiseBlock) > nv)
    throw StructuralError("f_y references undeclared measurement noise");
  for (const auto& p : state_set) {
    if (p.space()->has_block(kProcessNoiseBlock) || p.space()->has_block(kMeasNoiseBlock))
      throw StructuralError("state set must be over (x, z) only");
  }
}

bool substitution_applies(const ClosedLoopModel& model, const AssemblyOptions& options) {
  if (options.substitute == AssemblyOptions::Substitute::On) return true;
  if (options.substitute == AssemblyOptions::Substitute::Off) return false;
  // Auto: the composed dynamics f_x(x, kappa, w) and f_z(z, f_y(x, v), kappa)
  // must stay within the degree threshold.
  int kappa_deg = 0;
  if (model.nu > 0) {
    ControllerKkt kkt = build_controller_kkt(model.controller, options.kkt);
    for (const auto& k : kkt.kappa) kappa_deg = std::max(kappa_deg, k.total_degree());
  }
  int fy_deg = 0;
  for (const auto& p : model.f_y) fy_deg = std::max(fy_deg, p.total_degree());

  auto composed_degree = [&](const PolyVec& f, int u_inner, int y_inner) {
    int d = 0;
    for (const auto& row : f) {
      for (const auto& [m, c] : row.terms()) {
        int deg = 0;
        for (const auto& fac : m.factors()) {
          VarRef v = VarRef::from_key(fac.var);
          const std::string& bn = row.space()->block(v.block).name;
          int inner = 1;
          if (bn == kInputBlock) inner = std::max(1, u_inner);
          if (bn == kOutputBlock) inner = std::max(1, y_inner);
          deg += fac.exponent * inner;
        }
        d = std::max(d, deg);
      }
    }
    return d;
  };
  int dx = composed_degree(model.f_x, kappa_deg, 0);
  int dz = composed_degree(model.f_z, kappa_deg, fy_deg);
  return std::max(dx, dz) <= options.substitute_degree_threshold;
}

ClosedLoopSet assemble_closed_loop_set(const ClosedLoopModel& model, SetMode mode,
                                       const AssemblyOptions& options) {
  model.validate();
  const bool two_step = mode == SetMode::K || mode == SetMode::KBar || mode == SetMode::KW;
  const bool noise_mode = mode == SetMode::KW || mode == SetMode::KHatW;
  const bool want_psi = mode == SetMode::KBar || mode == SetMode::KHat;
  const bool has_controller = model.nu > 0;

  if (mode == SetMode::KBar && model.state_set.empty())
    throw StructuralError("K-bar requested but the model has no state set X");
  if (noise_mode && !model.has_noise())
    throw StructuralError("noise-extended set requested but the model has no noise blocks");

  ControllerKkt kkt;
  if (has_controller) kkt = build_controller_kkt(model.controller, options.kkt);
  const bool substituted = two_step && substitution_applies(model, options);

  // ---- space ------------------------------------------------------------
  std::vector<std::pair<std::string, int>> blocks;
  blocks.emplace_back(kStateBlock, model.nx);
  blocks.emplace_back(kCompBlock, model.nz);
  auto internal_dim = [&](const std::string& name) {
    const auto& ks = *kkt.set.space;
    return ks.block(ks.block_index(name)).dimension;
  };
  for (const auto& name : kkt.internal_blocks)
    blocks.emplace_back(name, internal_dim(name));
  if (noise_mode) {
    blocks.emplace_back(kProcessNoiseBlock, model.nw);
    blocks.emplace_back(kMeasNoiseBlock, model.nv);
  }
  if (two_step) {
    if (!substituted) {
      blocks.emplace_back(primed(kStateBlock), model.nx);
      blocks.emplace_back(primed(kCompBlock), model.nz);
    }
    for (const auto& name : kkt.internal_blocks)
      blocks.emplace_back(primed(name), internal_dim(name));
    if (noise_mode) {
      blocks.emplace_back(primed(kProcessNoiseBlock), model.nw);
      blocks.emplace_back(primed(kMeasNoiseBlock), model.nv);
    }
  }
  SpacePtr sp = make_space(blocks);

  ClosedLoopSet out;
  out.set.space = sp;
  out.mode = mode;
  out.substituted = substituted;
  out.two_step = two_step;
  out.controller_blocks = kkt.internal_blocks;

  if (two_step) {
    if (!substituted) {
      out.prime_map[kStateBlock] = primed(kStateBlock);
      if (model.nz > 0) out.prime_map[kCompBlock] = primed(kCompBlock);
    }
    for (const auto& name : kkt.internal_blocks) out.prime_map[name] = primed(name);
    if (noise_mode && model.nw > 0)
      out.prime_map[kProcessNoiseBlock] = primed(kProcessNoiseBlock);
    if (noise_mode && model.nv > 0)
      out.prime_map[kMeasNoiseBlock] = primed(kMeasNoiseBlock);
  }

  // ---- composed expressions ----------------------------------------------
  PolyVec x_vars = block_vars(sp, kStateBlock);
  PolyVec z_vars = model.nz ? block_vars(sp, kCompBlock) : PolyVec{};

  PolyVec y_now;
  if (model.ny > 0) {
    NameMap nm(sp);
    nm.expr(*model.f_y.front().space(), kStateBlock, x_vars);
    if (model.nv > 0) {
      if (noise_mode)
        nm.rename(*model.f_y.front().space(), kMeasNoiseBlock, kMeasNoiseBlock);
      else
        nm.zero(*model.f_y.front().space(), kMeasNoiseBlock, model.nv);
    }
    y_now = compose_all(model.f_y, nm.get());
  }
  PolyVec s_now;
  if (!model.f_s.empty()) {
    NameMap nm(sp);
    nm.expr(*model.f_s.front().space(), kCompBlock, z_vars)
        .expr(*model.f_s.front().space(), kOutputBlock, y_now);
    s_now = compose_all(model.f_s, nm.get());
  }
  PolyVec u_now;
  if (has_controller) {
    Substitution pass(sp);
    u_now = compose_all(kkt.kappa, pass);
  }
  out.kappa = u_now;

  auto next_state = [&](const PolyVec& xs, const PolyVec& zs, const PolyVec& ys) {
    NameMap fx(sp);
    fx.expr(*model.f_x.front().space(), kStateBlock, xs)
        .expr(*model.f_x.front().space(), kInputBlock, u_now);
    if (model.nw > 0) {
      if (noise_mode)
        fx.rename(*model.f_x.front().space(), kProcessNoiseBlock, kProcessNoiseBlock);
      else
        fx.zero(*model.f_x.front().space(), kProcessNoiseBlock, model.nw);
    }
    PolyVec xn = compose_all(model.f_x, fx.get());

    PolyVec zn;
    if (model.nz > 0) {
      NameMap fz(sp);
      fz.expr(*model.f_z.front().space(), kCompBlock, zs)
          .expr(*model.f_z.front().space(), kOutputBlock, ys)
          .expr(*model.f_z.front().space(), kInputBlock, u_now);
      zn = compose_all(model.f_z, fz.get());
    }
    return std::make_pair(xn, zn);
  };
  auto [x_next_expr, z_next_expr] = next_state(x_vars, z_vars, y_now);

  // ---- rows ---------------------------------------------------------------
  auto add_kkt_rows = [&](const PolyVec& s_expr, bool use_primed_blocks, int step) {
    if (!has_controller) return;
    const auto& kspace = *kkt.set.space;
    NameMap nm(sp);
    nm.expr(kspace, kParamBlock, s_expr);
    if (use_primed_blocks) {
      for (const auto& name : kkt.internal_blocks)
        nm.rename(kspace, name.c_str(), primed(name));
    }
    for (size_t i = 0; i < kkt.set.equalities.size(); ++i)
      out.set.add_equality(kkt.set.equalities[i].compose(nm.get()),
                           kkt.set.equality_tags[i], step);
    for (size_t i = 0; i < kkt.set.inequalities.size(); ++i)
      out.set.add_inequality(kkt.set.inequalities[i].compose(nm.get()),
                             kkt.set.inequality_tags[i], step);
  };

  add_kkt_rows(s_now, false, 0);

  if (two_step) {
    PolyVec xp, zp;  // successor state, either fresh variables or expressions
    if (substituted) {
      xp = x_next_expr;
      zp = z_next_expr;
      out.x_next = x_next_expr;
      out.z_next = z_next_expr;
    } else {
      xp = block_vars(sp, primed(kStateBlock));
      if (model.nz > 0) zp = block_vars(sp, primed(kCompBlock));
      for (int i = 0; i < model.nx; ++i)
        out.set.add_equality(xp[i] - x_next_expr[i], RowTag::DynamicsX, 1);
      for (int i = 0; i < model.nz; ++i)
        out.set.add_equality(zp[i] - z_next_expr[i], RowTag::DynamicsZ, 1);
    }

    PolyVec y_next;
    if (model.ny > 0) {
      NameMap nm(sp);
      nm.expr(*model.f_y.front().space(), kStateBlock, xp);
      if (model.nv > 0) {
        if (noise_mode) {
          PolyVec vp = block_vars(sp, primed(kMeasNoiseBlock));
          nm.expr(*model.f_y.front().space(), kMeasNoiseBlock, vp);
        } else {
          nm.zero(*model.f_y.front().space(), kMeasNoiseBlock, model.nv);
        }
      }
      y_next = compose_all(model.f_y, nm.get());
    }
    if (!model.f_s.empty()) {
      NameMap nm(sp);
      nm.expr(*model.f_s.front().space(), kCompBlock, zp)
          .expr(*model.f_s.front().space(), kOutputBlock, y_next);
      add_kkt_rows(compose_all(model.f_s, nm.get()), true, 1);
    }

    if (noise_mode) {
      auto embed_psi_w = [&](const PolyVec& xs, const PolyVec& zs, const std::string& wb,
                             const std::string& vb, int step) {
        for (const auto& row : model.disturbance_set) {
          NameMap nm(sp);
          nm.expr(*row.space(), kStateBlock, xs).expr(*row.space(), kCompBlock, zs);
          if (model.nw > 0) nm.rename(*row.space(), kProcessNoiseBlock, wb);
          if (model.nv > 0) nm.rename(*row.space(), kMeasNoiseBlock, vb);
          out.set.add_inequality(row.compose(nm.get()), RowTag::Disturbance, step);
        }
      };
      embed_psi_w(x_vars, z_vars, kProcessNoiseBlock, kMeasNoiseBlock, 0);
      embed_psi_w(xp, zp, primed(kProcessNoiseBlock), primed(kMeasNoiseBlock), 1);
    }
  } else if (mode == SetMode::KHatW) {
    for (const auto& row : model.disturbance_set) {
      NameMap nm(sp);
      nm.expr(*row.space(), kStateBlock, x_vars).expr(*row.space(), kCompBlock, z_vars);
      if (model.nw > 0) nm.rename(*row.space(), kProcessNoiseBlock, kProcessNoiseBlock);
      if (model.nv > 0) nm.rename(*row.space(), kMeasNoiseBlock, kMeasNoiseBlock);
      out.set.add_inequality(row.compose(nm.get()), RowTag::Disturbance, 0);
    }
  }

  for (const auto& row : model.state_set) {
    NameMap nm(sp);
    nm.expr(*row.space(), kStateBlock, x_vars).expr(*row.space(), kCompBlock, z_vars);
    Polynomial embedded = row.compose(nm.get());
    if (want_psi) out.set.add_inequality(embedded, RowTag::StateSet, 0);
    out.psi.push_back(std::move(embedded));
  }

  if (noise_mode) {
    for (const auto& row : model.disturbance_set) {
      NameMap nm(sp);
      nm.expr(*row.space(), kStateBlock, x_vars).expr(*row.space(), kCompBlock, z_vars);
      if (model.nw > 0) nm.rename(*row.space(), kProcessNoiseBlock, kProcessNoiseBlock);
      if (model.nv > 0) nm.rename(*row.space(), kMeasNoiseBlock, kMeasNoiseBlock);
      out.psi_w.push_back(row.compose(nm.get()));
    }
  }

  if (!model.perf_output.empty()) {
    NameMap nm(sp);
    nm.expr(*model.perf_output.front().space(), kStateBlock, x_vars);
    out.y_hat = compose_all(model.perf_output, nm.get());
  }

  return out;
}

}  // namespace loopcert
