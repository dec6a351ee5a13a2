#include "loopcert/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace loopcert {

namespace {

Eigen::VectorXd eval_rows(
    const PolyVec& rows,
    std::initializer_list<std::pair<const char*, const Eigen::VectorXd*>> vals) {
  if (rows.empty()) return {};
  Point pt(rows.front().space());
  for (const auto& [name, vec] : vals) {
    if (vec && rows.front().space()->has_block(name)) pt.set(name, *vec);
  }
  Eigen::VectorXd out(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) out(i) = rows[i].evaluate(pt);
  return out;
}

// Derives a per-coordinate sampling box from psi rows (affine or c - t^2
// patterns); falls back to [-1, 1].
void sampling_box(const PolyVec& psis, const SpacePtr& space, const std::string& block,
                  Eigen::VectorXd& lo, Eigen::VectorXd& hi) {
  auto b = space->find_block(block);
  int dim = b ? space->block(*b).dimension : 0;
  lo = Eigen::VectorXd::Constant(std::max(dim, 0), -1.0);
  hi = Eigen::VectorXd::Constant(std::max(dim, 0), 1.0);
  if (!b) return;
  for (const auto& row : psis) {
    if (!row.space()->has_block(block)) continue;
    int rb = row.space()->block_index(block);
    double c = row.constant_value();
    int var = -1, deg = 0;
    double coeff = 0.0;
    bool simple = true;
    for (const auto& [m, cf] : row.terms()) {
      if (m.is_unit()) continue;
      if (m.factors().size() != 1) {
        simple = false;
        break;
      }
      VarRef vr = VarRef::from_key(m.factors().front().var);
      if (vr.block != rb || (var >= 0 && var != vr.index)) {
        simple = false;
        break;
      }
      var = vr.index;
      deg = m.factors().front().exponent;
      coeff = cf;
    }
    if (!simple || var < 0) continue;
    if (deg == 1 && coeff > 0) {
      lo(var) = std::max(lo(var), -c / coeff);
    } else if (deg == 1 && coeff < 0) {
      hi(var) = std::min(hi(var), -c / coeff);
    } else if (deg == 2 && coeff < 0 && c > 0) {
      double r = std::sqrt(-c / coeff);
      lo(var) = std::max(lo(var), -r);
      hi(var) = std::min(hi(var), r);
    }
  }
  for (int i = 0; i < dim; ++i) {
    if (lo(i) > hi(i)) std::swap(lo(i), hi(i));
    if (!std::isfinite(lo(i))) lo(i) = -1.0;
    if (!std::isfinite(hi(i))) hi(i) = 1.0;
  }
}

}  // namespace

Simulator::Simulator(const ClosedLoopModel& model, const KktOptions& opts, uint64_t seed)
    : rng(seed ^ 0xda3e39cb94b95bdbull), model_(model), opts_(opts) {
  model_.validate();
  if (model_.nu > 0) solver_.emplace(model_.controller, opts_, seed);
  eval_space_ = make_space({{kStateBlock, model_.nx}, {kCompBlock, model_.nz}});

  Eigen::VectorXd xlo, xhi, zlo, zhi;
  sampling_box(model_.state_set, eval_space_, kStateBlock, xlo, xhi);
  sampling_box(model_.state_set, eval_space_, kCompBlock, zlo, zhi);
  box_lo_.resize(model_.nx + model_.nz);
  box_hi_.resize(model_.nx + model_.nz);
  box_lo_ << xlo, zlo;
  box_hi_ << xhi, zhi;
}

Eigen::VectorXd Simulator::output_of(const Eigen::VectorXd& x,
                                     const Eigen::VectorXd* v) const {
  return eval_rows(model_.f_y, {{kStateBlock, &x}, {kMeasNoiseBlock, v}});
}

ControllerSolution Simulator::solve_controller_step(const Eigen::VectorXd& s) const {
  if (!solver_) throw StructuralError("model has no controller");
  return solver_->solve(s);
}

Trace Simulator::simulate(const Eigen::VectorXd& x0, const Eigen::VectorXd& z0, int T,
                          const NoiseSampler* noise) const {
  if (T < 1) throw StructuralError("simulation horizon must be >= 1");
  Trace tr;
  Eigen::VectorXd x = x0, z = z0;
  tr.x.push_back(x);
  tr.z.push_back(z);

  for (int t = 0; t < T; ++t) {
    // first-exit rule: the state entering step t >= 1 is checked against X
    if (t >= 1 && !model_.state_set.empty()) {
      Eigen::VectorXd psi = eval_rows(model_.state_set, {{kStateBlock, &x}, {kCompBlock, &z}});
      if (psi.size() > 0 && psi.minCoeff() < 0) {
        tr.exit_index = t;
        return tr;
      }
    }

    Eigen::VectorXd w = Eigen::VectorXd::Zero(model_.nw);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(model_.nv);
    if (noise && *noise) (*noise)(rng, w, v);

    Eigen::VectorXd y = output_of(x, model_.nv > 0 ? &v : nullptr);
    Eigen::VectorXd u(0);
    if (solver_) {
      Eigen::VectorXd s = eval_rows(model_.f_s, {{kCompBlock, &z}, {kOutputBlock, &y}});
      ControllerSolution cs = solver_->solve(s);
      if (!cs.ok) {
        tr.ok = false;
        tr.note = "controller step failed at t=" + std::to_string(t) + ": " + cs.note;
        return tr;
      }
      tr.max_kkt_residual = std::max(tr.max_kkt_residual, cs.kkt_residual);
      tr.controller_points.push_back(std::move(cs.point));
      u = cs.u;
    }

    Eigen::VectorXd xn = eval_rows(
        model_.f_x, {{kStateBlock, &x}, {kInputBlock, &u}, {kProcessNoiseBlock, &w}});
    Eigen::VectorXd zn;
    if (model_.nz > 0) {
      zn = eval_rows(model_.f_z,
                     {{kCompBlock, &z}, {kOutputBlock, &y}, {kInputBlock, &u}});
    }
    tr.u.push_back(u);
    if (model_.nw > 0) tr.w.push_back(w);
    if (model_.nv > 0) tr.v.push_back(v);
    x = xn;
    z = zn;
    tr.x.push_back(x);
    tr.z.push_back(z);
  }
  if (!model_.state_set.empty() && !tr.exit_index) {
    Eigen::VectorXd psi = eval_rows(model_.state_set, {{kStateBlock, &x}, {kCompBlock, &z}});
    if (psi.size() > 0 && psi.minCoeff() < 0) tr.exit_index = T;
  }
  return tr;
}

int Simulator::default_horizon_cap(double alpha, double L, double precision) {
  double h = std::log(precision * (1 - alpha) / std::max(L, 1e-300)) / std::log(alpha);
  return std::max(1, std::min(static_cast<int>(std::ceil(h)), 1000000));
}

CostEstimate Simulator::empirical_cost(const Trace& trace, const CostSpec& cost,
                                       std::optional<int> horizon_cap) const {
  cost.validate();
  if (!cost.exit_penalty)
    throw StructuralError("empirical_cost needs the exit penalty L");
  const double alpha = cost.discount;
  const double L = *cost.exit_penalty;
  int H = horizon_cap ? *horizon_cap : default_horizon_cap(alpha, L);
  if (H < 1) throw StructuralError("invalid horizon cap");

  CostEstimate est;
  const int steps = trace.steps();
  int stop = std::min(H, steps);
  if (trace.exit_index) stop = std::min(stop, *trace.exit_index);

  double apow = 1.0;
  for (int t = 0; t < stop; ++t) {
    Point pt(cost.stage_cost.space());
    if (cost.stage_cost.space()->has_block(kStateBlock))
      pt.set(kStateBlock, trace.x[t]);
    if (cost.stage_cost.space()->has_block(kInputBlock)) pt.set(kInputBlock, trace.u[t]);
    est.value += apow * cost.stage_cost.evaluate(pt);
    apow *= alpha;
  }
  if (trace.exit_index && *trace.exit_index <= stop) {
    est.value += std::pow(alpha, *trace.exit_index) * L;
  } else {
    est.tail_bound = std::pow(alpha, stop) * L / (1 - alpha);
  }
  return est;
}

CostEstimate Simulator::empirical_cost_mc(const Eigen::VectorXd& x0,
                                          const Eigen::VectorXd& z0, const CostSpec& cost,
                                          const NoiseSampler& noise, int paths,
                                          std::optional<int> horizon_cap, int T) const {
  cost.validate();
  if (!cost.exit_penalty) throw StructuralError("empirical_cost needs the exit penalty L");
  int H = horizon_cap ? *horizon_cap
                      : default_horizon_cap(cost.discount, *cost.exit_penalty);
  if (T < 0) T = H;
  double sum = 0.0, sumsq = 0.0, tail = 0.0;
  for (int p = 0; p < paths; ++p) {
    Trace tr = simulate(x0, z0, T, &noise);
    CostEstimate one = empirical_cost(tr, cost, H);
    sum += one.value;
    sumsq += one.value * one.value;
    tail = std::max(tail, one.tail_bound);
  }
  CostEstimate est;
  est.value = sum / paths;
  est.tail_bound = tail;
  double var = std::max(0.0, sumsq / paths - est.value * est.value);
  est.standard_error = std::sqrt(var / paths);
  return est;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> Simulator::sample_state(
    std::mt19937_64& r) const {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Eigen::VectorXd xz(box_lo_.size());
  for (int i = 0; i < xz.size(); ++i)
    xz(i) = box_lo_(i) + uni(r) * (box_hi_(i) - box_lo_(i));
  return {xz.head(model_.nx), xz.tail(model_.nz)};
}

Point Simulator::set_point(const ClosedLoopSet& cls, const Trace& trace, int t) const {
  const SpacePtr& sp = cls.space();
  const int last = cls.two_step ? t + 1 : t;
  if (last + 1 >= static_cast<int>(trace.x.size()) && cls.two_step)
    throw StructuralError("trace too short for a set point at this index");
  if (model_.nu > 0 && last >= static_cast<int>(trace.controller_points.size()))
    throw StructuralError("trace too short for a set point at this index");

  Point pt(sp);
  pt.set(kStateBlock, trace.x[t]);
  if (model_.nz > 0) pt.set(kCompBlock, trace.z[t]);
  if (model_.nu > 0) {
    const Point& cp = trace.controller_points[t];
    for (const auto& name : cls.controller_blocks) {
      int src = cp.space()->block_index(name);
      pt.set(name, cp.get(src));
    }
  }
  if (model_.nw > 0 && sp->has_block(kProcessNoiseBlock))
    pt.set(kProcessNoiseBlock, trace.w[t]);
  if (model_.nv > 0 && sp->has_block(kMeasNoiseBlock))
    pt.set(kMeasNoiseBlock, trace.v[t]);

  if (cls.two_step) {
    auto primed = [](const std::string& n) { return n + "'"; };
    if (!cls.substituted) {
      pt.set(primed(kStateBlock), trace.x[t + 1]);
      if (model_.nz > 0) pt.set(primed(kCompBlock), trace.z[t + 1]);
    }
    if (model_.nu > 0) {
      const Point& cp = trace.controller_points[t + 1];
      for (const auto& name : cls.controller_blocks) {
        int src = cp.space()->block_index(name);
        pt.set(primed(name), cp.get(src));
      }
    }
    if (model_.nw > 0 && sp->has_block(primed(kProcessNoiseBlock)))
      pt.set(primed(kProcessNoiseBlock), trace.w[t + 1]);
    if (model_.nv > 0 && sp->has_block(primed(kMeasNoiseBlock)))
      pt.set(primed(kMeasNoiseBlock), trace.v[t + 1]);
  }
  return pt;
}

std::vector<Point> Simulator::sample_set_points(const ClosedLoopSet& cls, int count) const {
  std::vector<Point> out;
  const bool needs_noise = cls.space()->has_block(kProcessNoiseBlock) ||
                           cls.space()->has_block(kMeasNoiseBlock);
  Eigen::VectorXd wlo, whi, vlo, vhi;
  if (needs_noise) {
    auto wspace = make_space({{kStateBlock, model_.nx},
                              {kCompBlock, model_.nz},
                              {kProcessNoiseBlock, model_.nw},
                              {kMeasNoiseBlock, model_.nv}});
    sampling_box(model_.disturbance_set, wspace, kProcessNoiseBlock, wlo, whi);
    sampling_box(model_.disturbance_set, wspace, kMeasNoiseBlock, vlo, vhi);
  }
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  NoiseSampler noise = [&](std::mt19937_64& r, Eigen::VectorXd& w, Eigen::VectorXd& v) {
    for (int i = 0; i < w.size(); ++i) w(i) = wlo(i) + uni(r) * (whi(i) - wlo(i));
    for (int i = 0; i < v.size(); ++i) v(i) = vlo(i) + uni(r) * (vhi(i) - vlo(i));
  };

  int attempts = 0;
  while (static_cast<int>(out.size()) < count && attempts < 20 * count + 50) {
    ++attempts;
    auto [x0, z0] = sample_state(rng);
    int T = cls.two_step ? 2 : 1;
    Trace tr = simulate(x0, z0, T + 1, needs_noise ? &noise : nullptr);
    if (!tr.ok || tr.steps() < T) continue;
    if (tr.exit_index && *tr.exit_index <= T) continue;
    out.push_back(set_point(cls, tr, 0));
  }
  return out;
}

double Simulator::sample_stage_cost_sup(const Polynomial& stage_cost, int samples) const {
  double sup = 0.0;
  for (int k = 0; k < samples; ++k) {
    auto [x, z] = sample_state(rng);
    Eigen::VectorXd u(0);
    if (solver_) {
      Eigen::VectorXd y = output_of(x, nullptr);
      Eigen::VectorXd s = eval_rows(model_.f_s, {{kCompBlock, &z}, {kOutputBlock, &y}});
      ControllerSolution cs = solver_->solve(s);
      if (!cs.ok) continue;
      u = cs.u;
    }
    Point pt(stage_cost.space());
    if (stage_cost.space()->has_block(kStateBlock)) pt.set(kStateBlock, x);
    if (stage_cost.space()->has_block(kInputBlock)) pt.set(kInputBlock, u);
    sup = std::max(sup, stage_cost.evaluate(pt));
  }
  return sup;
}

namespace {

// Assigns whatever trace data the certificate's space knows about.
Point value_point(const SpacePtr& space, const ClosedLoopModel& model, const Trace& tr,
                  int t) {
  Point pt(space);
  if (space->has_block(kStateBlock)) pt.set(kStateBlock, tr.x[t]);
  if (model.nz > 0 && space->has_block(kCompBlock)) pt.set(kCompBlock, tr.z[t]);
  if (model.nu > 0 && t < static_cast<int>(tr.controller_points.size())) {
    const Point& cp = tr.controller_points[t];
    for (int b = 0; b < cp.space()->block_count(); ++b) {
      const std::string& name = cp.space()->block(b).name;
      if (name == kParamBlock) continue;
      if (space->has_block(name) && cp.has(b)) pt.set(name, cp.get(b));
    }
  }
  if (model.nw > 0 && space->has_block(kProcessNoiseBlock) &&
      t < static_cast<int>(tr.w.size()))
    pt.set(kProcessNoiseBlock, tr.w[t]);
  if (model.nv > 0 && space->has_block(kMeasNoiseBlock) &&
      t < static_cast<int>(tr.v.size()))
    pt.set(kMeasNoiseBlock, tr.v[t]);
  return pt;
}

}  // namespace

ValidationReport Simulator::validate_certificate(const Certificate& cert, int trials,
                                                 double tol, const NoiseSampler* noise,
                                                 int horizon) const {
  ValidationReport rep;
  rep.trials = trials;
  if (!cert.feasible) {
    rep.passed = false;
    rep.notes.push_back("certificate is not feasible; nothing to validate");
    return rep;
  }
  const SpacePtr& vspace = cert.V.space();

  auto note_violation = [&](double margin, const std::string& what) {
    rep.worst_margin = std::min(rep.worst_margin, margin);
    if (margin < -tol) {
      rep.passed = false;
      if (rep.notes.size() < 20) {
        rep.notes.push_back(what + ": margin " + std::to_string(margin));
      }
    }
  };

  for (int trial = 0; trial < trials; ++trial) {
    auto [x0, z0] = sample_state(rng);

    switch (cert.kind) {
      case CertificateKind::GlobalStability:
      case CertificateKind::LocalStability: {
        if (cert.kind == CertificateKind::LocalStability && cert.level_gamma) {
          // rejection-sample the certified sub-level set
          int guard = 0;
          while (guard++ < 200) {
            Trace probe;
            probe.x.push_back(x0);
            probe.z.push_back(z0);
            if (cert.V.evaluate(value_point(vspace, model_, probe, 0)) <=
                *cert.level_gamma)
              break;
            std::tie(x0, z0) = sample_state(rng);
          }
          if (guard >= 200) continue;
        }
        Trace tr = simulate(x0, z0, horizon, noise);
        if (!tr.ok) continue;
        int steps = tr.steps();
        for (int t = 0; t + 1 < steps; ++t) {
          double Vt = cert.V.evaluate(value_point(vspace, model_, tr, t));
          double Vn = cert.V.evaluate(value_point(vspace, model_, tr, t + 1));
          double margin = Vt - Vn - tr.x[t].squaredNorm();
          note_violation(margin, "Lyapunov decrease at t=" + std::to_string(t));
        }
        if (cert.kind == CertificateKind::LocalStability && !model_.state_set.empty()) {
          for (int t = 0; t <= steps; ++t) {
            Eigen::VectorXd psi = eval_rows(model_.state_set,
                                            {{kStateBlock, &tr.x[t]}, {kCompBlock, &tr.z[t]}});
            if (psi.size() > 0)
              note_violation(psi.minCoeff(), "state left X at t=" + std::to_string(t));
          }
        }
        break;
      }
      case CertificateKind::PerfUpper:
      case CertificateKind::PerfLower: {
        if (cert.stage_cost.is_zero()) {
          rep.notes.push_back("no stage cost stored; skipping cost validation");
          rep.trials = trial;
          return rep;
        }
        CostSpec cost;
        cost.stage_cost = cert.stage_cost;
        cost.discount = cert.discount;
        cost.exit_penalty = cert.exit_penalty;
        int H = default_horizon_cap(cert.discount, cert.exit_penalty);
        Trace tr = simulate(x0, z0, std::min(H, 5000), noise);
        if (!tr.ok) continue;
        CostEstimate est = empirical_cost(tr, cost, H);
        double V0 = cert.V.evaluate(value_point(vspace, model_, tr, 0));
        if (cert.kind == CertificateKind::PerfUpper) {
          // true cost <= est + tail, so this margin is the honest slack
          note_violation(V0 - est.value - est.tail_bound, "upper bound vs empirical cost");
        } else {
          note_violation(est.value - V0, "empirical cost vs lower bound");
        }
        break;
      }
      case CertificateKind::L2Gain:
      case CertificateKind::Iss: {
        if (!noise || !*noise) {
          rep.notes.push_back("L2 validation needs a disturbance sampler");
          rep.trials = trial;
          return rep;
        }
        if (cert.kind == CertificateKind::L2Gain) {
          x0.setZero();
          z0.setZero();
        }
        Trace tr = simulate(x0, z0, horizon, noise);
        if (!tr.ok) continue;
        double aw = cert.alpha_w.value_or(0.0), av = cert.alpha_v.value_or(0.0);
        double lhs = 0.0, rhs_energy = 0.0;
        double V0 = cert.V.evaluate(value_point(vspace, model_, tr, 0));
        for (int t = 0; t < tr.steps(); ++t) {
          Eigen::VectorXd yhat =
              model_.perf_output.empty()
                  ? tr.x[t]
                  : eval_rows(model_.perf_output, {{kStateBlock, &tr.x[t]}});
          lhs += yhat.squaredNorm();
          if (model_.nw > 0) rhs_energy += aw * tr.w[t].squaredNorm();
          if (model_.nv > 0) rhs_energy += av * tr.v[t].squaredNorm();
          note_violation(V0 + rhs_energy - lhs, "L2 inequality at t=" + std::to_string(t));
        }
        if (cert.kind == CertificateKind::Iss) {
          for (int t = 0; t < tr.steps(); ++t) {
            double Vt = cert.V.evaluate(value_point(vspace, model_, tr, t));
            note_violation(Vt - tr.x[t].squaredNorm(), "ISS positivity");
          }
        }
        break;
      }
    }
  }
  return rep;
}

}  // namespace loopcert
