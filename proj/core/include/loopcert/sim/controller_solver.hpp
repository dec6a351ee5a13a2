#pragma once

#include <random>

#include "loopcert/kkt/builder.hpp"

namespace loopcert {

/// One controller solve: the applied input, the full KKT tuple as a point
/// over the controller-KKT space (including "s"), and diagnostics.
struct ControllerSolution {
  bool ok = false;
  Eigen::VectorXd u;
  Point point;           // over ControllerKkt::set.space
  double objective = 0.0;
  double kkt_residual = 0.0;  // membership violation of the KKT set
  std::string note;
};

/// Numeric inner solver realizing one admissible selection rule: among the
/// KKT points found, the one with the smallest objective is returned.
///  - box projections are solved by exact clamping;
///  - quadratic problems with affine constraints by exhaustive active-set
///    enumeration (all activity patterns) within the size limits;
///  - projected-gradient chains by executing the literal iterations;
///  - everything else by a semismooth-Newton multistart on the KKT system.
class ControllerSolver {
 public:
  explicit ControllerSolver(const ControllerSpec& spec, const KktOptions& opts = {},
                            uint64_t seed = 0);

  const ControllerKkt& kkt() const { return kkt_; }

  ControllerSolution solve(const Eigen::VectorXd& s) const;

  /// Enumeration limits for the active-set path.
  static constexpr int kMaxEnumTheta = 12;
  static constexpr int kMaxEnumIneq = 16;

 private:
  ControllerSpec spec_;
  KktOptions opts_;
  ControllerKkt kkt_;
  GeneralNlpController flattened_;  // general-form view (projection/MPC mapped)
  bool is_chain_ = false;
  mutable std::mt19937_64 rng_;
};

}  // namespace loopcert
