#pragma once

#include <optional>
#include <string>

#include "loopcert/certify/certifiers.hpp"

namespace loopcert {

/// A fully parsed problem file: the model, the optional cost / noise
/// sections, and the degree/option choices. Polynomials appear in the file
/// as explicit term lists (no expression grammar), with 1-based indices:
///   [{"coeff": 0.9, "powers": {"x[1]": 1}}, ...]
struct ProblemFile {
  ClosedLoopModel model;
  std::optional<CostSpec> cost;
  std::optional<MomentTable> moments;
  NoiseSampler sampler;  // empty when the file declares no sampler
  CertifyOptions options;
  int trials = 100;      // validation trials
  int sim_horizon = 50;  // default simulate length
  Eigen::VectorXd x0, z0;  // default initial condition for `simulate`
};

/// Parses and validates a problem file; schema violations raise SchemaError
/// with a field path.
ProblemFile parse_problem(const std::string& path);
ProblemFile parse_problem_text(const std::string& text);

/// Serializes back to the file schema (round-trips up to term ordering).
std::string serialize_problem(const ProblemFile& pf);

}  // namespace loopcert
