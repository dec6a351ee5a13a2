#include "loopcert/io/result_file.hpp"

#include <fstream>
#include <sstream>

#include "json_io.hpp"

namespace loopcert {

namespace {

using detail::json;

CertificateKind kind_from_string(const std::string& s) {
  if (s == "global_stability") return CertificateKind::GlobalStability;
  if (s == "local_stability") return CertificateKind::LocalStability;
  if (s == "performance_upper") return CertificateKind::PerfUpper;
  if (s == "performance_lower") return CertificateKind::PerfLower;
  if (s == "l2_gain") return CertificateKind::L2Gain;
  if (s == "iss") return CertificateKind::Iss;
  throw SchemaError("kind", "unknown certificate kind '" + s + "'");
}

json poly_with_space(const Polynomial& p) {
  json j;
  j["space"] = detail::space_json(*p.space());
  j["terms"] = detail::term_list(p);
  return j;
}

Polynomial poly_from(const json& j, const std::string& where) {
  SpacePtr space = detail::space_from_json(j.at("space"), where + ".space");
  return detail::parse_term_list(j.at("terms"), space, where + ".terms");
}

}  // namespace

std::string result_to_string(const Certificate& cert) {
  json root;
  root["kind"] = to_string(cert.kind);
  root["feasible"] = cert.feasible;
  root["message"] = cert.message;

  if (cert.feasible || !cert.V.is_zero()) root["V"] = poly_with_space(cert.V);
  if (!cert.bound.is_zero()) root["bound"] = poly_with_space(cert.bound);
  if (!cert.stage_cost.is_zero()) root["stage_cost"] = poly_with_space(cert.stage_cost);

  json scalars;
  if (cert.level_gamma) scalars["level_gamma"] = *cert.level_gamma;
  if (cert.alpha_w) scalars["alpha_w"] = *cert.alpha_w;
  if (cert.alpha_v) scalars["alpha_v"] = *cert.alpha_v;
  if (cert.discount > 0) scalars["alpha"] = cert.discount;
  if (cert.exit_penalty > 0) {
    scalars["L"] = cert.exit_penalty;
    scalars["L_sampled"] = cert.exit_penalty_sampled;
  }
  root["scalars"] = scalars;

  json diag;
  diag["identity_residual"] = cert.diagnostics.max_identity_residual;
  diag["min_gram_eig"] = cert.diagnostics.min_gram_eig;
  diag["min_sampled_target"] = cert.diagnostics.min_sampled_target;
  diag["samples_checked"] = cert.diagnostics.samples_checked;
  diag["passed"] = cert.diagnostics.passed();
  diag["notes"] = cert.diagnostics.notes;
  root["diagnostics"] = diag;

  json solver;
  solver["status"] = cert.solver.status;
  solver["iterations"] = cert.solver.iterations;
  solver["duality_gap"] = cert.solver.duality_gap;
  solver["primal_residual"] = cert.solver.primal_residual;
  solver["solve_seconds"] = cert.solver.solve_seconds;
  solver["sdp_constraints"] = cert.solver.sdp_constraints;
  solver["sdp_blocks"] = cert.solver.sdp_blocks;
  root["solver"] = solver;

  if (cert.feasible) {
    json mults = json::array();
    for (const auto& rm : cert.recovered.multipliers) {
      json mj;
      mj["label"] = rm.label;
      mj["sos"] = rm.is_sos;
      mj["value"] = poly_with_space(rm.value);
      if (rm.is_sos) {
        mj["gram_min_eig"] = rm.gram_min_eig;
        json g = json::array();
        for (int i = 0; i < rm.gram.rows(); ++i) {
          json row = json::array();
          for (int j2 = 0; j2 < rm.gram.cols(); ++j2) row.push_back(rm.gram(i, j2));
          g.push_back(row);
        }
        mj["gram"] = g;
      }
      mults.push_back(mj);
    }
    root["multipliers"] = mults;
  }
  return root.dump(2);
}

void write_result_file(const Certificate& cert, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open result file '" + path + "' for writing");
  os << result_to_string(cert) << "\n";
}

Certificate read_result_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open result file '" + path + "'");
  std::stringstream buf;
  buf << is.rdbuf();
  json root = json::parse(buf.str());

  Certificate cert;
  cert.kind = kind_from_string(root.at("kind").get<std::string>());
  cert.feasible = root.value("feasible", false);
  cert.message = root.value("message", "");
  if (root.contains("V")) cert.V = poly_from(root["V"], "V");
  if (root.contains("bound")) cert.bound = poly_from(root["bound"], "bound");
  if (root.contains("stage_cost"))
    cert.stage_cost = poly_from(root["stage_cost"], "stage_cost");
  if (root.contains("scalars")) {
    const json& s = root["scalars"];
    if (s.contains("level_gamma")) cert.level_gamma = s["level_gamma"].get<double>();
    if (s.contains("alpha_w")) cert.alpha_w = s["alpha_w"].get<double>();
    if (s.contains("alpha_v")) cert.alpha_v = s["alpha_v"].get<double>();
    if (s.contains("alpha")) cert.discount = s["alpha"].get<double>();
    if (s.contains("L")) cert.exit_penalty = s["L"].get<double>();
    if (s.contains("L_sampled")) cert.exit_penalty_sampled = s["L_sampled"].get<bool>();
  }
  if (root.contains("diagnostics")) {
    const json& d = root["diagnostics"];
    cert.diagnostics.max_identity_residual = d.value("identity_residual", 0.0);
    cert.diagnostics.min_gram_eig = d.value("min_gram_eig", 0.0);
    cert.diagnostics.min_sampled_target = d.value("min_sampled_target", 0.0);
    cert.diagnostics.samples_checked = d.value("samples_checked", 0);
  }
  if (root.contains("solver")) {
    const json& s = root["solver"];
    cert.solver.status = s.value("status", "");
    cert.solver.iterations = s.value("iterations", 0);
    cert.solver.duality_gap = s.value("duality_gap", 0.0);
    cert.solver.primal_residual = s.value("primal_residual", 0.0);
    cert.solver.solve_seconds = s.value("solve_seconds", 0.0);
  }
  return cert;
}

}  // namespace loopcert
