#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace loopcert {

/// Block-diagonal conic structure: dense PSD blocks plus one elementwise
/// nonnegative (diagonal) block, plus unconstrained scalar variables.
struct SdpBlock {
  enum class Kind { Psd, Diag };
  Kind kind = Kind::Psd;
  int dim = 0;
};

/// One entry of a symmetric data matrix. The convention is
/// <A, X> = sum_e value_e * X(i_e, j_e) with i <= j, X symmetric.
struct SdpCoeff {
  int block = 0;
  int i = 0;
  int j = 0;  // i <= j
  double value = 0.0;
};

/// min <C, X> + c_f' u   s.t.  <A_k, X> + f_k' u = b_k,  X in cone, u free.
struct SdpProblem {
  std::vector<SdpBlock> blocks;
  int num_free = 0;

  std::vector<std::vector<SdpCoeff>> constraint_matrix;            // A_k entries
  std::vector<std::vector<std::pair<int, double>>> constraint_free;  // f_k entries
  std::vector<double> rhs;                                          // b

  std::vector<SdpCoeff> objective_matrix;            // C entries
  std::vector<std::pair<int, double>> objective_free;  // c_f entries
  double objective_constant = 0.0;
  bool maximize = false;  // reported objective sense; solver minimizes internally

  int num_constraints() const { return static_cast<int>(rhs.size()); }
  int add_constraint(double b);
  int add_block(SdpBlock::Kind kind, int dim);

  void add_entry(int constraint, int block, int i, int j, double value);
  void add_free_entry(int constraint, int index, double value);
  void add_objective_entry(int block, int i, int j, double value);
  void add_objective_free(int index, double value);
};

struct SdpSolution {
  enum class Status { Optimal, Infeasible, NumericalFailure };
  Status status = Status::NumericalFailure;

  std::vector<Eigen::MatrixXd> block_values;  // X per block (Diag: diagonal as column 0)
  Eigen::VectorXd free_values;                // u
  Eigen::VectorXd dual_values;                // y
  double objective = 0.0;                     // in the problem's reported sense

  /// Dual improving ray (Farkas certificate) when status == Infeasible.
  Eigen::VectorXd infeasibility_ray;

  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;
  std::string message;

  bool optimal() const { return status == Status::Optimal; }

  /// <A_k, X> + f_k' u for one constraint of the generating problem.
  double constraint_value(const SdpProblem& problem, int k) const;
};

}  // namespace loopcert
