#pragma once

#include <functional>
#include <map>
#include <optional>

#include "loopcert/sos/compile.hpp"

namespace loopcert {

/// A certificate search: decision polynomials / scalars, matched SOS
/// identities, and a linear objective. Assembles into one SdpProblem.
class SosProgram {
 public:
  DecisionVars vars;

  struct PolyInfo {
    std::string name;
    SpacePtr space;
    std::vector<Monomial> basis;
    std::vector<int> ids;
  };

  /// Registers an affinely parametrized polynomial decision variable.
  PolyExpr new_poly(const std::string& name, SpacePtr space,
                    const std::vector<Monomial>& basis);

  /// Registers a scalar decision variable; nonnegative ones become entries
  /// of the diagonal cone block.
  LinExpr new_scalar(const std::string& name, bool nonneg = false);

  void add_constraint(SosConstraint c) { constraints.push_back(std::move(c)); }

  std::vector<PolyInfo> polys;
  std::vector<int> nonneg_scalars;
  std::map<std::string, int> scalar_ids;
  std::vector<SosConstraint> constraints;

  LinExpr objective;      // linear in the decision variables
  bool maximize = false;  // objective sense
};

/// Where each decision variable landed in the SDP.
struct VarLocation {
  enum class Kind { Free, Gram, Diag };
  Kind kind = Kind::Free;
  int block = -1;  // Gram/Diag
  int i = 0, j = 0;  // Gram entry
  int index = -1;  // free index or diag offset
};

struct GramInfo {
  int block = -1;
  int constraint_index = -1;
  int row_index = -1;  // -1 for sigma_0, else the inequality row
  std::vector<Monomial> basis;
  std::string label;
};

struct FreeMultInfo {
  int constraint_index = -1;
  int row_index = -1;  // equality row
  std::vector<Monomial> basis;
  std::vector<int> ids;
  std::string label;
};

struct AssembledProgram {
  SdpProblem sdp;
  std::vector<VarLocation> locations;  // per decision id
  std::vector<GramInfo> grams;
  std::vector<FreeMultInfo> free_mults;
  struct EqRange {
    int first = 0, count = 0;
  };
  std::vector<EqRange> constraint_equations;  // per SosConstraint
  int diag_block = -1;
  int num_vars = 0;
};

/// Compiles every constraint and lays out the SDP with deterministic block
/// and equation ordering. Throws DegreeDeficiencyError when a monomial of an
/// identity has constant content but no decision variable can reach it.
AssembledProgram assemble_program(const SosProgram& prog);

struct RecoveredMultiplier {
  std::string label;
  int constraint_index = -1;
  int row_index = -1;
  bool is_sos = false;
  Polynomial value;
  Eigen::MatrixXd gram;  // SOS only
  std::vector<Monomial> basis;
  double gram_min_eig = 0.0;
  double reconstruction_residual = 0.0;  // ||value - beta' Q beta||_inf
};

struct RecoveredCertificate {
  Eigen::VectorXd decision_values;
  std::map<std::string, Polynomial> polys;
  std::map<std::string, double> scalars;
  std::vector<RecoveredMultiplier> multipliers;
  double objective = 0.0;
};

/// Reconstructs decision polynomials and all multipliers from an optimal
/// solution. Throws SolverError on non-optimal status.
RecoveredCertificate recover_certificate(const SosProgram& prog,
                                         const AssembledProgram& assembled,
                                         const SdpSolution& solution);

struct CheckOptions {
  double tol_identity = 1e-6;
  double tol_psd = 1e-7;
  double tol_sample = 1e-6;
  int samples = 0;  // 0 disables sampling
};

struct CheckReport {
  double max_identity_residual = 0.0;
  double min_gram_eig = 0.0;
  double min_sampled_target = 0.0;
  int samples_checked = 0;
  bool identity_ok = true;
  bool psd_ok = true;
  bool sampling_ok = true;
  std::vector<std::string> notes;
  bool passed() const { return identity_ok && psd_ok && sampling_ok; }
};

/// A-posteriori soundness guard against SDP numerics: (i) coefficientwise
/// residual of every matched identity, (ii) minimum Gram eigenvalue,
/// (iii) sampled nonnegativity of each target on its set. The sampler is
/// asked for points of constraint i's set (the simulator provides one).
CheckReport check_certificate(
    const SosProgram& prog, const RecoveredCertificate& recovered,
    const CheckOptions& options = {},
    const std::function<std::vector<Point>(int constraint_index, int count)>& sampler = {});

}  // namespace loopcert
