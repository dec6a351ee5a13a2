#include "loopcert/io/problem_file.hpp"

#include <fstream>
#include <sstream>

#include "json_io.hpp"

namespace loopcert {

namespace detail {

VarRef parse_var_name(const std::string& name, const VariableSpace& space,
                      const std::string& where) {
  auto lb = name.find('[');
  auto rb = name.find(']');
  if (lb == std::string::npos || rb == std::string::npos || rb < lb)
    throw SchemaError(where, "malformed variable name '" + name + "' (want block[i])");
  std::string block = name.substr(0, lb);
  int index = 0;
  try {
    index = std::stoi(name.substr(lb + 1, rb - lb - 1));
  } catch (...) {
    throw SchemaError(where, "malformed index in '" + name + "'");
  }
  auto b = space.find_block(block);
  if (!b) throw SchemaError(where, "undeclared block '" + block + "'");
  if (index < 1 || index > space.block(*b).dimension)
    throw SchemaError(where, "index out of range in '" + name + "' (block dimension " +
                                 std::to_string(space.block(*b).dimension) + ")");
  return VarRef{*b, index - 1};
}

Polynomial parse_term_list(const json& arr, const SpacePtr& space,
                           const std::string& where) {
  if (!arr.is_array()) throw SchemaError(where, "expected a term list (array)");
  Polynomial p(space);
  for (size_t t = 0; t < arr.size(); ++t) {
    const json& term = arr[t];
    std::string at = where + "[" + std::to_string(t) + "]";
    if (!term.is_object() || !term.contains("coeff"))
      throw SchemaError(at, "term needs a numeric 'coeff'");
    double coeff = term["coeff"].get<double>();
    std::vector<std::pair<uint64_t, int>> factors;
    if (term.contains("powers")) {
      for (const auto& [name, exp] : term["powers"].items()) {
        int e = exp.get<int>();
        if (e < 0) throw SchemaError(at, "negative exponent on '" + name + "'");
        if (e == 0) continue;
        factors.emplace_back(parse_var_name(name, *space, at).key(), e);
      }
    }
    p += Polynomial::term(space, Monomial::from_factors(std::move(factors)), coeff);
  }
  return p;
}

PolyVec parse_poly_rows(const json& arr, const SpacePtr& space, const std::string& where) {
  if (!arr.is_array()) throw SchemaError(where, "expected an array of term lists");
  PolyVec rows;
  for (size_t i = 0; i < arr.size(); ++i)
    rows.push_back(parse_term_list(arr[i], space, where + "[" + std::to_string(i) + "]"));
  return rows;
}

json term_list(const Polynomial& p) {
  json arr = json::array();
  for (const auto& [m, c] : p.terms()) {
    json term;
    term["coeff"] = c;
    json powers = json::object();
    for (const auto& f : m.factors()) {
      VarRef v = VarRef::from_key(f.var);
      powers[var_name(*p.space(), v)] = f.exponent;
    }
    if (!powers.empty()) term["powers"] = powers;
    arr.push_back(term);
  }
  return arr;
}

json poly_rows(const PolyVec& rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back(term_list(r));
  return arr;
}

json space_json(const VariableSpace& space) {
  json j = json::object();
  for (const auto& b : space.blocks()) j[b.name] = b.dimension;
  return j;
}

SpacePtr space_from_json(const json& j, const std::string& where) {
  auto sp = std::make_shared<VariableSpace>();
  if (!j.is_object()) throw SchemaError(where, "expected an object of block dims");
  for (const auto& [name, dim] : j.items()) sp->add_block(name, dim.get<int>());
  return sp;
}

}  // namespace detail

namespace {

using detail::json;

int dim_of(const json& vars, const char* name) {
  if (!vars.contains(name)) return 0;
  int d = vars[name].get<int>();
  if (d < 0) throw SchemaError(std::string("variables.") + name, "negative dimension");
  return d;
}

ControllerSpec parse_controller(const json& j, int nu, int n_s, const std::string& where) {
  if (!j.contains("type")) throw SchemaError(where, "controller needs a 'type'");
  std::string type = j["type"].get<std::string>();
  ControllerSpec spec;

  if (type == "projection") {
    auto theta_space = make_space({{kThetaBlock, nu}});
    ProjectionController p;
    p.g_U = detail::parse_poly_rows(j.at("g_U"), theta_space, where + ".g_U");
    spec.variant = std::move(p);
  } else if (type == "general") {
    int n_theta = j.value("n_theta", nu);
    auto space = make_space({{kParamBlock, n_s}, {kThetaBlock, n_theta}});
    GeneralNlpController g;
    g.J = detail::parse_term_list(j.at("J"), space, where + ".J");
    if (j.contains("a")) g.a = detail::parse_poly_rows(j["a"], space, where + ".a");
    if (j.contains("b")) g.b = detail::parse_poly_rows(j["b"], space, where + ".b");
    spec.variant = std::move(g);
  } else if (type == "mpc") {
    MpcController m;
    m.horizon = j.value("horizon", 1);
    m.nx = j.at("nx").get<int>();
    m.nu = j.value("nu", nu);
    m.n_eps = j.value("neps", 0);
    auto stage_space = make_space({{kParamBlock, n_s}, {"xh", m.nx}, {"uh", m.nu}});
    auto term_space = make_space({{kParamBlock, n_s}, {"xh", m.nx}});
    auto model_space = make_space({{"xh", m.nx}, {"uh", m.nu}});
    auto stacked = make_space({{kParamBlock, n_s},
                               {"u_hat", m.horizon * m.nu},
                               {"x_hat", (m.horizon + 1) * m.nx},
                               {"eps", m.n_eps}});
    m.model = detail::parse_poly_rows(j.at("model"), model_space, where + ".model");
    if (j.at("stage_cost").is_array() && !j["stage_cost"].empty() &&
        j["stage_cost"][0].is_array()) {
      m.stage_costs =
          detail::parse_poly_rows(j["stage_cost"], stage_space, where + ".stage_cost");
    } else {
      m.stage_costs = {
          detail::parse_term_list(j.at("stage_cost"), stage_space, where + ".stage_cost")};
    }
    if (j.contains("terminal_cost"))
      m.terminal_cost =
          detail::parse_term_list(j["terminal_cost"], term_space, where + ".terminal_cost");
    if (j.contains("slack_cost")) {
      auto eps_space = make_space({{"eps", m.n_eps}});
      m.slack_cost =
          detail::parse_term_list(j["slack_cost"], eps_space, where + ".slack_cost");
    }
    if (j.contains("a")) m.ineq = detail::parse_poly_rows(j["a"], stacked, where + ".a");
    if (j.contains("b")) m.eq = detail::parse_poly_rows(j["b"], stacked, where + ".b");
    spec.variant = std::move(m);
  } else if (type == "projected_gradient") {
    int n_theta = j.value("n_theta", nu);
    auto space = make_space({{kParamBlock, n_s}, {kThetaBlock, n_theta}});
    ProjectedGradientChainController pg;
    pg.problem.J = detail::parse_term_list(j.at("J"), space, where + ".J");
    if (j.contains("a")) pg.problem.a = detail::parse_poly_rows(j["a"], space, where + ".a");
    if (j.contains("b")) pg.problem.b = detail::parse_poly_rows(j["b"], space, where + ".b");
    pg.step = j.at("step").get<double>();
    pg.iterations = j.value("iterations", 1);
    if (j.contains("theta0")) {
      auto s_space = make_space({{kParamBlock, n_s}});
      pg.initial_iterate = detail::parse_poly_rows(j["theta0"], s_space, where + ".theta0");
    }
    spec.variant = std::move(pg);
  } else {
    throw SchemaError(where + ".type", "unknown controller type '" + type + "'");
  }

  if (j.contains("kappa")) {
    int n_theta = nu;
    if (const auto* g = std::get_if<GeneralNlpController>(&spec.variant))
      n_theta = g->J.space()->block(g->J.space()->block_index(kThetaBlock)).dimension;
    if (const auto* pg = std::get_if<ProjectedGradientChainController>(&spec.variant))
      n_theta = pg->problem.J.space()
                    ->block(pg->problem.J.space()->block_index(kThetaBlock))
                    .dimension;
    auto theta_space = make_space({{kThetaBlock, n_theta}});
    spec.kappa = detail::parse_poly_rows(j["kappa"], theta_space, where + ".kappa");
  }
  if (j.contains("delta")) spec.inexactness = j["delta"].get<double>();
  return spec;
}

WeightMeasure parse_weight(const json& j, const std::string& where) {
  WeightMeasure w;
  for (const auto& [block, factor] : j.items()) {
    std::string at = where + "." + block;
    if (factor.contains("box")) {
      const json& box = factor["box"];
      Eigen::VectorXd lo(box.size()), hi(box.size());
      for (size_t i = 0; i < box.size(); ++i) {
        lo(i) = box[i].at(0).get<double>();
        hi(i) = box[i].at(1).get<double>();
      }
      w.set_box(block, lo, hi);
    } else if (factor.contains("point")) {
      const json& pt = factor["point"];
      Eigen::VectorXd at_v(pt.size());
      for (size_t i = 0; i < pt.size(); ++i) at_v(i) = pt[i].get<double>();
      w.set_point_mass(block, at_v);
    } else {
      throw SchemaError(at, "weight factor needs 'box' or 'point'");
    }
  }
  return w;
}

NoiseSampler parse_sampler(const json& j, int nw, int nv, const std::string& where) {
  struct Coord {
    enum Kind { Uniform, Gaussian } kind;
    double a, b;
  };
  auto parse_coords = [&](const json& arr, int n, const std::string& at) {
    std::vector<Coord> out;
    if (static_cast<int>(arr.size()) != n)
      throw SchemaError(at, "expected " + std::to_string(n) + " coordinate samplers");
    for (const auto& c : arr) {
      if (c.contains("uniform")) {
        out.push_back(Coord{Coord::Uniform, c["uniform"].at(0).get<double>(),
                            c["uniform"].at(1).get<double>()});
      } else if (c.contains("gaussian")) {
        out.push_back(Coord{Coord::Gaussian, c["gaussian"].at(0).get<double>(),
                            c["gaussian"].at(1).get<double>()});
      } else {
        throw SchemaError(at, "coordinate sampler needs 'uniform' or 'gaussian'");
      }
    }
    return out;
  };
  std::vector<Coord> wc, vc;
  if (j.contains("w")) wc = parse_coords(j["w"], nw, where + ".w");
  if (j.contains("v")) vc = parse_coords(j["v"], nv, where + ".v");
  if (static_cast<int>(wc.size()) != nw || static_cast<int>(vc.size()) != nv)
    throw SchemaError(where, "sampler must cover every noise coordinate");

  return [wc, vc](std::mt19937_64& rng, Eigen::VectorXd& w, Eigen::VectorXd& v) {
    auto draw = [&](const Coord& c) {
      if (c.kind == Coord::Uniform) {
        std::uniform_real_distribution<double> d(c.a, c.b);
        return d(rng);
      }
      std::normal_distribution<double> d(c.a, c.b);
      return d(rng);
    };
    for (int i = 0; i < w.size(); ++i) w(i) = draw(wc[i]);
    for (int i = 0; i < v.size(); ++i) v(i) = draw(vc[i]);
  };
}

}  // namespace

ProblemFile parse_problem_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const std::exception& e) {
    throw SchemaError("(file)", std::string("not valid JSON: ") + e.what());
  }

  ProblemFile pf;
  ClosedLoopModel& m = pf.model;

  if (!root.contains("variables")) throw SchemaError("variables", "section missing");
  const json& vars = root["variables"];
  m.nx = dim_of(vars, "x");
  m.nz = dim_of(vars, "z");
  m.nu = dim_of(vars, "u");
  m.nw = dim_of(vars, "w");
  m.nv = dim_of(vars, "v");
  if (m.nx < 1) throw SchemaError("variables.x", "at least one state required");

  if (!root.contains("dynamics")) throw SchemaError("dynamics", "section missing");
  const json& dyn = root["dynamics"];
  m.ny = dyn.contains("f_y") ? static_cast<int>(dyn["f_y"].size()) : 0;
  int n_s = dyn.contains("f_s") ? static_cast<int>(dyn["f_s"].size()) : 0;

  auto fx_space =
      make_space({{kStateBlock, m.nx}, {kInputBlock, m.nu}, {kProcessNoiseBlock, m.nw}});
  auto fy_space = make_space({{kStateBlock, m.nx}, {kMeasNoiseBlock, m.nv}});
  auto fz_space = make_space({{kCompBlock, m.nz}, {kOutputBlock, m.ny}, {kInputBlock, m.nu}});
  auto fs_space = make_space({{kCompBlock, m.nz}, {kOutputBlock, m.ny}});

  m.f_x = detail::parse_poly_rows(dyn.at("f_x"), fx_space, "dynamics.f_x");
  if (m.ny > 0) m.f_y = detail::parse_poly_rows(dyn["f_y"], fy_space, "dynamics.f_y");
  if (m.nz > 0) m.f_z = detail::parse_poly_rows(dyn.at("f_z"), fz_space, "dynamics.f_z");
  if (n_s > 0) m.f_s = detail::parse_poly_rows(dyn["f_s"], fs_space, "dynamics.f_s");
  if (dyn.contains("f_yhat")) {
    auto fyh_space = make_space({{kStateBlock, m.nx}});
    m.perf_output = detail::parse_poly_rows(dyn["f_yhat"], fyh_space, "dynamics.f_yhat");
  }

  if (m.nu > 0) {
    if (!root.contains("controller")) throw SchemaError("controller", "section missing");
    m.controller = parse_controller(root["controller"], m.nu, n_s, "controller");
  }

  if (root.contains("sets")) {
    const json& sets = root["sets"];
    auto xz_space = make_space({{kStateBlock, m.nx}, {kCompBlock, m.nz}});
    if (sets.contains("X"))
      m.state_set = detail::parse_poly_rows(sets["X"], xz_space, "sets.X");
    if (sets.contains("W")) {
      auto w_space = make_space({{kStateBlock, m.nx},
                                 {kCompBlock, m.nz},
                                 {kProcessNoiseBlock, m.nw},
                                 {kMeasNoiseBlock, m.nv}});
      m.disturbance_set = detail::parse_poly_rows(sets["W"], w_space, "sets.W");
    }
  }

  if (root.contains("cost")) {
    const json& cj = root["cost"];
    CostSpec cost;
    auto xu_space = make_space({{kStateBlock, m.nx}, {kInputBlock, m.nu}});
    cost.stage_cost = detail::parse_term_list(cj.at("l"), xu_space, "cost.l");
    cost.discount = cj.at("alpha").get<double>();
    if (cj.contains("L")) cost.exit_penalty = cj["L"].get<double>();
    if (cj.contains("rho")) cost.weight = parse_weight(cj["rho"], "cost.rho");
    cost.validate();
    pf.cost = std::move(cost);
  }

  if (root.contains("noise")) {
    const json& nj = root["noise"];
    if (nj.contains("moments")) {
      auto wv_space = make_space({{kProcessNoiseBlock, m.nw}, {kMeasNoiseBlock, m.nv}});
      MomentTable table(m.nw, m.nv);
      for (size_t i = 0; i < nj["moments"].size(); ++i) {
        const json& entry = nj["moments"][i];
        std::string at = "noise.moments[" + std::to_string(i) + "]";
        std::vector<int> we(m.nw, 0), ve(m.nv, 0);
        if (entry.contains("powers")) {
          for (const auto& [name, exp] : entry["powers"].items()) {
            VarRef v = detail::parse_var_name(name, *wv_space, at);
            const std::string& bn = wv_space->block(v.block).name;
            if (bn == kProcessNoiseBlock)
              we[v.index] = exp.get<int>();
            else
              ve[v.index] = exp.get<int>();
          }
        }
        table.set(std::move(we), std::move(ve), entry.at("value").get<double>());
      }
      pf.moments = std::move(table);
    }
    if (nj.contains("sampler"))
      pf.sampler = parse_sampler(nj["sampler"], m.nw, m.nv, "noise.sampler");
  }

  CertifyOptions& o = pf.options;
  if (root.contains("degrees")) {
    const json& dj = root["degrees"];
    o.v_degree = dj.value("V", o.v_degree);
    o.sos_degree = dj.value("sos", o.sos_degree);
    o.poly_degree = dj.value("poly", o.poly_degree);
    o.sigma0_degree = dj.value("sigma0", o.sigma0_degree);
    if (dj.contains("V_vars")) o.v_blocks = dj["V_vars"].get<std::vector<std::string>>();
    if (dj.contains("sos_vars"))
      o.sos_blocks = dj["sos_vars"].get<std::vector<std::string>>();
  }
  if (root.contains("options")) {
    const json& oj = root["options"];
    std::string sub = oj.value("substitute_dynamics", "auto");
    if (sub == "on")
      o.assembly.substitute = AssemblyOptions::Substitute::On;
    else if (sub == "off")
      o.assembly.substitute = AssemblyOptions::Substitute::Off;
    else if (sub != "auto")
      throw SchemaError("options.substitute_dynamics", "want auto|on|off");
    o.seed = oj.value("seed", o.seed);
    o.tradeoff_gamma = oj.value("tradeoff_gamma", o.tradeoff_gamma);
    o.iss = oj.value("iss", o.iss);
    o.single_function = oj.value("single_function", o.single_function);
    o.sigma0_newton = oj.value("sigma0_newton", o.sigma0_newton);
    o.nonneg_multipliers = oj.value("nonneg_multipliers", o.nonneg_multipliers);
    o.level_tolerance = oj.value("level_tolerance", o.level_tolerance);
    o.check.tol_identity = oj.value("tol_identity", o.check.tol_identity);
    o.check.tol_psd = oj.value("tol_psd", o.check.tol_psd);
    o.solver.feasibility_tol = oj.value("solver_tol", o.solver.feasibility_tol);
    o.solver.gap_tol = oj.value("gap_tol", o.solver.gap_tol);
    o.solver.max_iterations = oj.value("max_iterations", o.solver.max_iterations);
    o.check_samples = oj.value("check_samples", o.check_samples);
    pf.trials = oj.value("trials", pf.trials);
    pf.sim_horizon = oj.value("sim_horizon", pf.sim_horizon);
    if (oj.contains("split_complementarity"))
      o.assembly.kkt.split_complementarity = oj["split_complementarity"].get<bool>();
    auto read_vec = [&](const char* key, int n) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
      if (oj.contains(key)) {
        const json& a = oj[key];
        if (static_cast<int>(a.size()) != n)
          throw SchemaError(std::string("options.") + key, "wrong length");
        for (int i = 0; i < n; ++i) v(i) = a[i].get<double>();
      }
      return v;
    };
    pf.x0 = read_vec("x0", m.nx);
    pf.z0 = read_vec("z0", m.nz);
  }
  if (pf.x0.size() != m.nx) pf.x0 = Eigen::VectorXd::Zero(m.nx);
  if (pf.z0.size() != m.nz) pf.z0 = Eigen::VectorXd::Zero(m.nz);

  m.validate();
  return pf;
}

ProblemFile parse_problem(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open problem file '" + path + "'");
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_problem_text(buf.str());
}

std::string serialize_problem(const ProblemFile& pf) {
  const ClosedLoopModel& m = pf.model;
  json root;
  root["variables"] = {{"x", m.nx}, {"z", m.nz}, {"u", m.nu}, {"w", m.nw}, {"v", m.nv}};

  json dyn;
  dyn["f_x"] = detail::poly_rows(m.f_x);
  if (m.ny > 0) dyn["f_y"] = detail::poly_rows(m.f_y);
  if (m.nz > 0) dyn["f_z"] = detail::poly_rows(m.f_z);
  if (!m.f_s.empty()) dyn["f_s"] = detail::poly_rows(m.f_s);
  if (!m.perf_output.empty()) dyn["f_yhat"] = detail::poly_rows(m.perf_output);
  root["dynamics"] = dyn;

  if (m.nu > 0) {
    json cj;
    if (const auto* p = std::get_if<ProjectionController>(&m.controller.variant)) {
      cj["type"] = "projection";
      cj["g_U"] = detail::poly_rows(p->g_U);
    } else if (const auto* g = std::get_if<GeneralNlpController>(&m.controller.variant)) {
      cj["type"] = "general";
      cj["n_theta"] = g->J.space()->block(g->J.space()->block_index(kThetaBlock)).dimension;
      cj["J"] = detail::term_list(g->J);
      if (!g->a.empty()) cj["a"] = detail::poly_rows(g->a);
      if (!g->b.empty()) cj["b"] = detail::poly_rows(g->b);
    } else if (const auto* mp = std::get_if<MpcController>(&m.controller.variant)) {
      cj["type"] = "mpc";
      cj["horizon"] = mp->horizon;
      cj["nx"] = mp->nx;
      cj["nu"] = mp->nu;
      cj["neps"] = mp->n_eps;
      cj["model"] = detail::poly_rows(mp->model);
      cj["stage_cost"] = mp->stage_costs.size() == 1
                             ? detail::term_list(mp->stage_costs.front())
                             : detail::poly_rows(mp->stage_costs);
      if (!mp->terminal_cost.is_zero())
        cj["terminal_cost"] = detail::term_list(mp->terminal_cost);
      if (!mp->slack_cost.is_zero()) cj["slack_cost"] = detail::term_list(mp->slack_cost);
      if (!mp->ineq.empty()) cj["a"] = detail::poly_rows(mp->ineq);
      if (!mp->eq.empty()) cj["b"] = detail::poly_rows(mp->eq);
    } else {
      const auto& pg = std::get<ProjectedGradientChainController>(m.controller.variant);
      cj["type"] = "projected_gradient";
      cj["n_theta"] = pg.problem.J.space()
                          ->block(pg.problem.J.space()->block_index(kThetaBlock))
                          .dimension;
      cj["J"] = detail::term_list(pg.problem.J);
      if (!pg.problem.a.empty()) cj["a"] = detail::poly_rows(pg.problem.a);
      if (!pg.problem.b.empty()) cj["b"] = detail::poly_rows(pg.problem.b);
      cj["step"] = pg.step;
      cj["iterations"] = pg.iterations;
      if (!pg.initial_iterate.empty()) cj["theta0"] = detail::poly_rows(pg.initial_iterate);
    }
    if (!m.controller.kappa.empty()) cj["kappa"] = detail::poly_rows(m.controller.kappa);
    if (m.controller.inexactness) cj["delta"] = *m.controller.inexactness;
    root["controller"] = cj;
  }

  if (!m.state_set.empty() || !m.disturbance_set.empty()) {
    json sets;
    if (!m.state_set.empty()) sets["X"] = detail::poly_rows(m.state_set);
    if (!m.disturbance_set.empty()) sets["W"] = detail::poly_rows(m.disturbance_set);
    root["sets"] = sets;
  }

  if (pf.cost) {
    json cj;
    cj["l"] = detail::term_list(pf.cost->stage_cost);
    cj["alpha"] = pf.cost->discount;
    if (pf.cost->exit_penalty) cj["L"] = *pf.cost->exit_penalty;
    json rho;
    for (const auto& [block, factor] : pf.cost->weight.factors()) {
      if (const auto* box = std::get_if<WeightMeasure::Box>(&factor)) {
        json b = json::array();
        for (int i = 0; i < box->lower.size(); ++i)
          b.push_back({box->lower(i), box->upper(i)});
        rho[block]["box"] = b;
      } else {
        const auto& pm = std::get<WeightMeasure::PointMass>(factor);
        json p = json::array();
        for (int i = 0; i < pm.at.size(); ++i) p.push_back(pm.at(i));
        rho[block]["point"] = p;
      }
    }
    if (!rho.empty()) cj["rho"] = rho;
    root["cost"] = cj;
  }

  json dj;
  dj["V"] = pf.options.v_degree;
  dj["sos"] = pf.options.sos_degree;
  dj["poly"] = pf.options.poly_degree;
  if (pf.options.sigma0_degree >= 0) dj["sigma0"] = pf.options.sigma0_degree;
  if (!pf.options.v_blocks.empty()) dj["V_vars"] = pf.options.v_blocks;
  if (!pf.options.sos_blocks.empty()) dj["sos_vars"] = pf.options.sos_blocks;
  root["degrees"] = dj;

  json oj;
  oj["seed"] = pf.options.seed;
  oj["single_function"] = pf.options.single_function;
  oj["trials"] = pf.trials;
  root["options"] = oj;

  return root.dump(2);
}

}  // namespace loopcert
