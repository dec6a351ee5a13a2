#pragma once

#include <optional>
#include <string>

#include "loopcert/sos/program.hpp"

namespace loopcert {

enum class CertificateKind {
  GlobalStability,
  LocalStability,
  PerfUpper,
  PerfLower,
  L2Gain,
  Iss,
};

std::string to_string(CertificateKind kind);

struct SolverStats {
  std::string status;
  int iterations = 0;
  double duality_gap = 0.0;
  double primal_residual = 0.0;
  double solve_seconds = 0.0;
  int sdp_constraints = 0;
  int sdp_blocks = 0;
};

/// Outcome of one certification run. `feasible == false` always means
/// "no certificate at these degrees", never a disproof.
struct Certificate {
  CertificateKind kind = CertificateKind::GlobalStability;
  bool feasible = false;

  Polynomial V;      // the certified function, over the program's set space
  Polynomial bound;  // performance bound in (x,z) (equals V single-function)

  std::optional<double> level_gamma;  // LocalStability
  std::optional<double> alpha_w, alpha_v;  // L2Gain / Iss
  double discount = 0.0;      // perf kinds
  double exit_penalty = 0.0;  // perf kinds (the L actually used)
  bool exit_penalty_sampled = false;
  Polynomial stage_cost;      // perf kinds: the l the bound refers to

  RecoveredCertificate recovered;
  CheckReport diagnostics;
  SolverStats solver;
  std::string message;
};

}  // namespace loopcert
