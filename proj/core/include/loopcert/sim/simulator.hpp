#pragma once

#include <functional>
#include <optional>
#include <random>

#include "loopcert/certify/certificate.hpp"
#include "loopcert/certify/cost.hpp"
#include "loopcert/kkt/closed_loop.hpp"
#include "loopcert/sim/controller_solver.hpp"

namespace loopcert {

/// Draws one (w, v) sample per step.
using NoiseSampler =
    std::function<void(std::mt19937_64&, Eigen::VectorXd& w, Eigen::VectorXd& v)>;

/// A simulated closed-loop run. x has length T+1; u, controller points (and
/// noises) length min(T, tau). Transitions satisfy the dynamics exactly and
/// the controller KKT system to the solver's residual.
struct Trace {
  std::vector<Eigen::VectorXd> x, z, u;
  std::vector<Eigen::VectorXd> w, v;           // stochastic runs only
  std::vector<Point> controller_points;        // over the controller-KKT space
  std::optional<int> exit_index;               // tau per the first-exit rule
  double max_kkt_residual = 0.0;
  bool ok = true;
  std::string note;

  int steps() const { return static_cast<int>(u.size()); }
};

struct CostEstimate {
  double value = 0.0;
  double tail_bound = 0.0;   // alpha^H L/(1-alpha) when truncated
  double standard_error = 0.0;  // Monte-Carlo runs only
};

struct ValidationReport {
  bool passed = true;
  double worst_margin = 0.0;  // most negative slack observed
  int trials = 0;
  std::vector<std::string> notes;
};

/// Closed-loop simulation oracle: exact inner solves, traces, empirical
/// costs and a-posteriori certificate validation.
class Simulator {
 public:
  explicit Simulator(const ClosedLoopModel& model, const KktOptions& opts = {},
                     uint64_t seed = 0);

  const ClosedLoopModel& model() const { return model_; }
  const ControllerSolver* controller() const { return solver_ ? &*solver_ : nullptr; }

  ControllerSolution solve_controller_step(const Eigen::VectorXd& s) const;

  Trace simulate(const Eigen::VectorXd& x0, const Eigen::VectorXd& z0, int T,
                 const NoiseSampler* noise = nullptr) const;

  /// L alpha^tau + sum_{t<tau} alpha^t l(x_t, u_t), truncated at the horizon
  /// cap with the geometric tail bound reported.
  CostEstimate empirical_cost(const Trace& trace, const CostSpec& cost,
                              std::optional<int> horizon_cap = std::nullopt) const;

  /// Monte-Carlo estimate over sampled noise paths from one initial state.
  CostEstimate empirical_cost_mc(const Eigen::VectorXd& x0, const Eigen::VectorXd& z0,
                                 const CostSpec& cost, const NoiseSampler& noise,
                                 int paths, std::optional<int> horizon_cap = std::nullopt,
                                 int T = -1) const;

  /// Smallest H with alpha^H L / (1 - alpha) <= precision.
  static int default_horizon_cap(double alpha, double L, double precision = 1e-6);

  /// Checks the kind-specific trajectory inequality on `trials` random runs.
  ValidationReport validate_certificate(const Certificate& cert, int trials, double tol,
                                        const NoiseSampler* noise = nullptr,
                                        int horizon = 60) const;

  /// Builds a point of the assembled set from a trace transition (t -> t+1);
  /// used by membership tests and by the certificate checker's sampler.
  Point set_point(const ClosedLoopSet& cls, const Trace& trace, int t) const;

  /// Random state pair inside the model's state box (used for sampling set
  /// points and estimating the exit penalty).
  std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_state(std::mt19937_64& rng) const;

  /// Samples points of an assembled set by simulating one transition from a
  /// random state (returns fewer points if controller solves fail).
  std::vector<Point> sample_set_points(const ClosedLoopSet& cls, int count) const;

  /// sup of l(x, u) over sampled states with the controller applied; used by
  /// the exit-penalty estimate (1.1 * sup / (1 - alpha)).
  double sample_stage_cost_sup(const Polynomial& stage_cost, int samples = 400) const;

  /// CSV export: columns t, x[i], z[i], u[i] and V when a certificate is
  /// supplied.
  void write_trace_csv(const Trace& trace, const std::string& path,
                       const Certificate* cert = nullptr) const;

  mutable std::mt19937_64 rng;

 private:
  Eigen::VectorXd output_of(const Eigen::VectorXd& x, const Eigen::VectorXd* v) const;

  ClosedLoopModel model_;
  KktOptions opts_;
  std::optional<ControllerSolver> solver_;
  SpacePtr eval_space_;  // (x, z) for psi evaluation
  Eigen::VectorXd box_lo_, box_hi_;  // sampling box for (x, z)
};

}  // namespace loopcert
